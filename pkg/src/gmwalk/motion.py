"""Motion containers (joint-position and joint-angle time series) and
finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatchError
from .skeleton import Skeleton

MIN_FRAMES = 3  # second differences need an interior frame


@dataclass(frozen=True)
class Motion:
    """A motion clip as joint positions.

    frames: (n, O, 3) array, meters; n >= 3 and all values finite.
    frame_dt: seconds per frame.
    label_hint: class id as stored alongside the data; never trusted by the
        attack (the classifier is always re-queried).
    """

    skeleton: Skeleton
    frames: np.ndarray
    frame_dt: float
    label_hint: int | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise ShapeMismatchError(f"frames must be (n, joints, 3), got {frames.shape}")
        if frames.shape[1] != self.skeleton.num_joints:
            raise ShapeMismatchError(
                f"frames have {frames.shape[1]} joints, skeleton has "
                f"{self.skeleton.num_joints}"
            )
        if frames.shape[0] < MIN_FRAMES:
            raise ShapeMismatchError(f"motions need at least {MIN_FRAMES} frames, got {frames.shape[0]}")
        if not np.isfinite(frames).all():
            raise ShapeMismatchError("frames contain non-finite values")
        if not float(self.frame_dt) > 0.0:
            raise ShapeMismatchError(f"frame_dt must be positive, got {self.frame_dt}")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "frame_dt", float(self.frame_dt))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_joints(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray, label_hint: int | None = None) -> "Motion":
        """New Motion sharing this one's skeleton and frame_dt."""
        return replace(self, frames=frames, label_hint=label_hint)

    def bone_lengths(self) -> np.ndarray:
        """(n, O) observed bone lengths per frame; the root column is zero."""
        parents = self.skeleton.parents
        out = np.zeros(self.frames.shape[:2])
        nonroot = parents >= 0
        diffs = self.frames[:, nonroot] - self.frames[:, parents[nonroot]]
        out[:, nonroot] = np.linalg.norm(diffs, axis=2)
        return out


@dataclass(frozen=True)
class AngleMotion:
    """A motion clip as a root trajectory plus per-joint Euler angles.

    root_positions: (n, 3) meters; angles: (n, 3*O) radians wrapped to
    (-pi, pi], laid out joint-major (joint 0 xyz, joint 1 xyz, ...). The root
    joint's angle triple is the global body orientation.
    """

    skeleton: Skeleton
    root_positions: np.ndarray
    angles: np.ndarray
    frame_dt: float

    def __post_init__(self):
        root = np.asarray(self.root_positions, dtype=float)
        angles = np.asarray(self.angles, dtype=float)
        if root.ndim != 2 or root.shape[1] != 3:
            raise ShapeMismatchError(f"root_positions must be (n, 3), got {root.shape}")
        if angles.ndim != 2 or angles.shape[1] != 3 * self.skeleton.num_joints:
            raise ShapeMismatchError(
                f"angles must be (n, {3 * self.skeleton.num_joints}), got {angles.shape}"
            )
        if root.shape[0] != angles.shape[0]:
            raise ShapeMismatchError("root_positions and angles disagree on frame count")
        if root.shape[0] < MIN_FRAMES:
            raise ShapeMismatchError(f"motions need at least {MIN_FRAMES} frames, got {root.shape[0]}")
        if not (np.isfinite(root).all() and np.isfinite(angles).all()):
            raise ShapeMismatchError("non-finite values in angle motion")
        if np.any(angles <= -np.pi) or np.any(angles > np.pi):
            raise ShapeMismatchError("angles must be wrapped to (-pi, pi]")
        root = root.copy()
        angles = angles.copy()
        root.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "root_positions", root)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "frame_dt", float(self.frame_dt))

    @property
    def num_frames(self) -> int:
        return self.angles.shape[0]

    def joint_angles(self) -> np.ndarray:
        """Angles reshaped to (n, O, 3)."""
        n = self.num_frames
        return self.angles.reshape(n, self.skeleton.num_joints, 3)


def second_difference(series: np.ndarray, dt: float) -> np.ndarray:
    """Discrete second derivative along axis 0 with zero-padded boundary rows.

    Interior rows are (s[t-1] - 2 s[t] + s[t+1]) / dt**2; the first and last
    rows are zero. Exact for quadratics in t; linear in the input.
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] < MIN_FRAMES:
        raise ShapeMismatchError(
            f"second differences need at least {MIN_FRAMES} rows, got {series.shape[0]}"
        )
    out = np.zeros_like(series)
    out[1:-1] = (series[:-2] - 2.0 * series[1:-1] + series[2:]) / (dt * dt)
    return out


def second_difference_adjoint(series: np.ndarray, dt: float) -> np.ndarray:
    """Adjoint of :func:`second_difference`: <D u, v> == <u, D^T v> for all u, v."""
    series = np.asarray(series, dtype=float)
    if series.shape[0] < MIN_FRAMES:
        raise ShapeMismatchError(
            f"second differences need at least {MIN_FRAMES} rows, got {series.shape[0]}"
        )
    interior = series.copy()
    interior[0] = 0.0
    interior[-1] = 0.0
    padded = np.zeros((series.shape[0] + 2,) + series.shape[1:], dtype=float)
    padded[1:-1] = interior
    return (padded[:-2] - 2.0 * padded[1:-1] + padded[2:]) / (dt * dt)


def motion_distance(a: Motion | np.ndarray, b: Motion | np.ndarray) -> float:
    """Frame-normalized Euclidean distance between two motions.

    The l2 norm is taken over the full flattened clip and divided by the frame
    count, matching the per-sample distance used by the attack stopping rule
    and the evaluation report.
    """
    fa = a.frames if isinstance(a, Motion) else np.asarray(a)
    fb = b.frames if isinstance(b, Motion) else np.asarray(b)
    if fa.shape != fb.shape:
        raise ShapeMismatchError(f"motion shapes differ: {fa.shape} vs {fb.shape}")
    return float(np.linalg.norm((fa - fb).ravel()) / fa.shape[0])
