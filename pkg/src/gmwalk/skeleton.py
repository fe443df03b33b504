"""Skeleton data model: joint hierarchy, rest-pose bone offsets, per-axis angle limits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SkeletonError


@dataclass(frozen=True)
class JointSpec:
    """One joint: its parent link, rest offset from the parent (meters), and
    per-axis Euler angle limits (radians, intrinsic Z-Y-X convention)."""

    name: str
    parent: int | None
    offset: tuple[float, float, float]
    angle_min: tuple[float, float, float]
    angle_max: tuple[float, float, float]


@dataclass(frozen=True)
class Skeleton:
    """Joint hierarchy in topological order (parents before children).

    Derived arrays (offsets, limits, rest bone lengths) are precomputed once
    and exposed read-only; instances are immutable and safe to share across
    threads and processes.
    """

    joints: tuple[JointSpec, ...]
    root_index: int = field(init=False)

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        roots = [i for i, j in enumerate(joints) if j.parent is None]
        if len(roots) != 1:
            raise SkeletonError(f"expected exactly one root joint, found {len(roots)}")
        object.__setattr__(self, "root_index", roots[0])

        offsets = np.zeros((len(joints), 3))
        lo = np.zeros((len(joints), 3))
        hi = np.zeros((len(joints), 3))
        parents = np.full(len(joints), -1, dtype=int)
        for i, joint in enumerate(joints):
            if joint.parent is not None:
                if not 0 <= joint.parent < i:
                    raise SkeletonError(
                        f"joint {i} ({joint.name!r}) has parent {joint.parent}; "
                        "parents must precede children"
                    )
                parents[i] = joint.parent
            offsets[i] = joint.offset
            lo[i] = joint.angle_min
            hi[i] = joint.angle_max
            if np.any(lo[i] > hi[i]):
                raise SkeletonError(f"joint {i} ({joint.name!r}): angle_min > angle_max")

        lengths = np.linalg.norm(offsets, axis=1)
        nonroot = parents >= 0
        if np.any(lengths[nonroot] <= 0.0):
            bad = int(np.flatnonzero(nonroot & (lengths <= 0.0))[0])
            raise SkeletonError(
                f"joint {bad} ({joints[bad].name!r}): non-root offset must have positive length"
            )

        for arr in (offsets, lo, hi, parents, lengths):
            arr.setflags(write=False)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_angle_lo", lo)
        object.__setattr__(self, "_angle_hi", hi)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_rest_lengths", lengths)

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def parents(self) -> np.ndarray:
        """Parent index per joint; -1 for the root."""
        return self._parents

    @property
    def offsets(self) -> np.ndarray:
        """(O, 3) rest bone offsets, meters."""
        return self._offsets

    @property
    def angle_lo(self) -> np.ndarray:
        """(O, 3) per-axis lower angle limits, radians."""
        return self._angle_lo

    @property
    def angle_hi(self) -> np.ndarray:
        """(O, 3) per-axis upper angle limits, radians."""
        return self._angle_hi

    @property
    def rest_lengths(self) -> np.ndarray:
        """(O,) rest bone lengths; the root entry is the norm of its offset."""
        return self._rest_lengths

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    @property
    def mean_bone_length(self) -> float:
        """Mean rest length over the non-root bones."""
        nonroot = self._parents >= 0
        return float(np.mean(self._rest_lengths[nonroot]))
