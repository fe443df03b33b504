"""Attack-quality metrics over batches of (original, adversarial) pairs.

Per pair of motions (all shapes shared across the batch):

* l: frame-normalized joint position deviation (meters),
* delta_a: joint acceleration deviation (m/s^2), second differences over time,
* delta_alpha: joint angular acceleration deviation (rad/s^2) on the inverse
  kinematics angle reading,
* bone_dev_pct: mean signed relative deviation of adversarial bone lengths
  from the skeleton's rest lengths (percent; signed terms can cancel, so an
  absolute variant is reported alongside),
* om_pct: share of adversarial motions passing the on-manifold check.

Angle-space metrics (delta_alpha, om_pct) are optional: data with missing or
synthetic joints may not support an angle reading, in which case they are
reported as absent rather than imputed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError
from .kinematics import inverse_kinematics
from .manifold import ProjectionConfig, check_on_manifold
from .motion import Motion, second_difference
from .skeleton import Skeleton

REPORT_COLUMNS = (
    "model",
    "mp_flag",
    "l",
    "delta_a",
    "delta_alpha",
    "bone_dev_pct",
    "bone_dev_abs_pct",
    "om_pct",
    "n_samples",
)


@dataclass(frozen=True)
class SampleMetrics:
    index: int
    l: float
    delta_a: float
    delta_alpha: float | None
    bone_dev_pct: float
    bone_dev_abs_pct: float
    on_manifold: bool | None


@dataclass(frozen=True)
class MetricsReport:
    l: float
    delta_a: float
    delta_alpha: float | None
    bone_dev_pct: float
    bone_dev_abs_pct: float
    om_pct: float | None
    sample_count: int
    per_sample: tuple[SampleMetrics, ...]


def compute_metrics(
    pairs: Sequence[tuple[Motion, Motion]],
    sk: Skeleton,
    cfg: ProjectionConfig = ProjectionConfig(),
    angle_space_available: bool = True,
) -> MetricsReport:
    """Aggregate deviation metrics for (original, adversarial) motion pairs."""
    if not pairs:
        raise ValueError("need at least one motion pair")
    shape = pairs[0][0].frames.shape
    for i, (orig, adv) in enumerate(pairs):
        if orig.frames.shape != shape or adv.frames.shape != shape:
            raise ShapeMismatchError(f"pair {i} does not match the batch shape {shape}")
        if orig.num_joints != sk.num_joints:
            raise ShapeMismatchError(f"pair {i} does not match the skeleton")

    n, num_joints = shape[0], shape[1]
    nonroot = np.flatnonzero(sk.parents >= 0)
    rest = sk.rest_lengths[nonroot]

    rows = []
    for i, (orig, adv) in enumerate(pairs):
        diff = orig.frames - adv.frames
        l = float(np.linalg.norm(diff.ravel())) / n

        acc_o = second_difference(orig.frames.reshape(n, -1), orig.frame_dt)
        acc_a = second_difference(adv.frames.reshape(n, -1), adv.frame_dt)
        delta_a = float(np.linalg.norm((acc_o - acc_a).ravel())) / (n * num_joints)

        adv_bones = adv.bone_lengths()[:, nonroot].mean(axis=0)
        signed = float(np.mean((rest - adv_bones) / rest)) * 100.0
        absolute = float(np.mean(np.abs(rest - adv_bones) / rest)) * 100.0

        delta_alpha = None
        on_manifold = None
        if angle_space_available:
            ang_o = inverse_kinematics(orig, sk).angles
            ang_a = inverse_kinematics(adv, sk).angles
            aac_o = second_difference(ang_o, orig.frame_dt)
            aac_a = second_difference(ang_a, adv.frame_dt)
            delta_alpha = float(np.linalg.norm((aac_o - aac_a).ravel())) / (n * num_joints)
            on_manifold = check_on_manifold(adv, sk, cfg).on_manifold

        rows.append(
            SampleMetrics(
                index=i,
                l=l,
                delta_a=delta_a,
                delta_alpha=delta_alpha,
                bone_dev_pct=signed,
                bone_dev_abs_pct=absolute,
                on_manifold=on_manifold,
            )
        )

    count = len(rows)
    return MetricsReport(
        l=sum(r.l for r in rows) / count,
        delta_a=sum(r.delta_a for r in rows) / count,
        delta_alpha=(
            sum(r.delta_alpha for r in rows) / count if angle_space_available else None
        ),
        bone_dev_pct=sum(r.bone_dev_pct for r in rows) / count,
        bone_dev_abs_pct=sum(r.bone_dev_abs_pct for r in rows) / count,
        om_pct=(
            100.0 * sum(1 for r in rows if r.on_manifold) / count
            if angle_space_available
            else None
        ),
        sample_count=count,
        per_sample=tuple(rows),
    )


def _cell(value) -> str:
    return "n/a" if value is None else repr(value)


def write_report_csv(report: MetricsReport, path: str | Path, model: str, mp_flag: bool) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        writer.writerow(
            (
                model,
                "MP" if mp_flag else "No MP",
                repr(report.l),
                repr(report.delta_a),
                _cell(report.delta_alpha),
                repr(report.bone_dev_pct),
                repr(report.bone_dev_abs_pct),
                _cell(report.om_pct),
                report.sample_count,
            )
        )


def write_report_json(report: MetricsReport, path: str | Path, model: str, mp_flag: bool) -> None:
    doc = {
        "model": model,
        "mp_flag": "MP" if mp_flag else "No MP",
        "l": report.l,
        "delta_a": report.delta_a,
        "delta_alpha": report.delta_alpha,
        "bone_dev_pct": report.bone_dev_pct,
        "bone_dev_abs_pct": report.bone_dev_abs_pct,
        "om_pct": report.om_pct,
        "n_samples": report.sample_count,
        "per_sample": [
            {
                "index": r.index,
                "l": r.l,
                "delta_a": r.delta_a,
                "delta_alpha": r.delta_alpha,
                "bone_dev_pct": r.bone_dev_pct,
                "bone_dev_abs_pct": r.bone_dev_abs_pct,
                "on_manifold": r.on_manifold,
            }
            for r in report.per_sample
        ],
    }
    Path(path).write_text(json.dumps(doc, allow_nan=False, separators=(",", ":"), sort_keys=True))


def format_report_row(
    l: float,
    delta_a: float,
    delta_alpha: float | None,
    bone_dev_pct: float,
    om_pct: float | None,
    model: str,
    mp_flag: bool,
) -> str:
    """Render one summary line in the conventional benchmark-table layout,
    e.g. "STGCN, MP, 0.13, 0.05, 0.11, 0.00%, 99.55%"."""
    alpha = "n/a" if delta_alpha is None else f"{delta_alpha:.2f}"
    om = "n/a" if om_pct is None else f"{om_pct:.2f}%"
    return (
        f"{model}, {'MP' if mp_flag else 'No MP'}, {l:.2f}, {delta_a:.2f}, "
        f"{alpha}, {bone_dev_pct:.2f}%, {om}"
    )
