"""Motion file IO.

One motion per UTF-8 JSON file:

    {
      "skeleton": [
        {"name": str, "parent": int | null, "offset": [x, y, z],
         "angle_min": [x, y, z], "angle_max": [x, y, z]},
        ...
      ],
      "frame_dt": float,
      "frames": [[[x, y, z] * joints] * n],
      "label": int            # optional
    }

All floats are decimal (NaN/Inf rejected). Serialization uses Python's repr
for floats, so save -> load round-trips bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MotionFormatError, ShapeMismatchError, SkeletonError
from .motion import Motion
from .skeleton import JointSpec, Skeleton


def skeleton_to_json(sk: Skeleton) -> list[dict]:
    return [
        {
            "name": j.name,
            "parent": j.parent,
            "offset": list(map(float, j.offset)),
            "angle_min": list(map(float, j.angle_min)),
            "angle_max": list(map(float, j.angle_max)),
        }
        for j in sk.joints
    ]


def skeleton_from_json(data: object) -> Skeleton:
    if not isinstance(data, list) or not data:
        raise MotionFormatError("skeleton must be a non-empty joint list")
    joints = []
    for i, entry in enumerate(data):
        try:
            joints.append(
                JointSpec(
                    name=str(entry["name"]),
                    parent=None if entry["parent"] is None else int(entry["parent"]),
                    offset=tuple(float(v) for v in entry["offset"]),
                    angle_min=tuple(float(v) for v in entry["angle_min"]),
                    angle_max=tuple(float(v) for v in entry["angle_max"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MotionFormatError(f"bad joint entry {i}: {exc}") from exc
        for key in ("offset", "angle_min", "angle_max"):
            if len(entry[key]) != 3:
                raise MotionFormatError(f"bad joint entry {i}: {key} must have 3 components")
    try:
        return Skeleton(joints=tuple(joints))
    except SkeletonError as exc:
        raise MotionFormatError(str(exc)) from exc


def save_motion(mo: Motion, path: str | Path) -> None:
    doc = {
        "skeleton": skeleton_to_json(mo.skeleton),
        "frame_dt": mo.frame_dt,
        "frames": mo.frames.tolist(),
    }
    if mo.label_hint is not None:
        doc["label"] = int(mo.label_hint)
    text = json.dumps(doc, allow_nan=False, separators=(",", ":"))
    Path(path).write_text(text, encoding="utf-8")


def load_motion(path: str | Path) -> Motion:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise MotionFormatError(f"cannot read motion file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MotionFormatError(f"{path}: top level must be an object")
    for key in ("skeleton", "frame_dt", "frames"):
        if key not in doc:
            raise MotionFormatError(f"{path}: missing field {key!r}")

    sk = skeleton_from_json(doc["skeleton"])
    frames = np.asarray(doc["frames"], dtype=float)
    label = doc.get("label")
    try:
        return Motion(
            skeleton=sk,
            frames=frames,
            frame_dt=float(doc["frame_dt"]),
            label_hint=None if label is None else int(label),
        )
    except (ShapeMismatchError, TypeError, ValueError) as exc:
        raise MotionFormatError(f"{path}: {exc}") from exc
