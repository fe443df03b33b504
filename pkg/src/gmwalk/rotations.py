"""Batched rotation helpers: intrinsic Z-Y-X Euler angles and minimal alignment rotations.

Conventions used everywhere in this package:

* A joint's angle triple ``(ax, ay, az)`` is in radians and builds the local
  rotation matrix ``R = Rz(az) @ Ry(ay) @ Rx(ax)`` (intrinsic Z-Y-X).
* Angles are wrapped to the half-open interval (-pi, pi].
* All functions broadcast over leading axes; the last axis (or two) holds the
  vector (or matrix) data.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(theta: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi]."""
    wrapped = theta - TWO_PI * np.floor((theta + np.pi) / TWO_PI)
    # floor maps pi to -pi; move it back to the closed upper end
    return np.where(wrapped <= -np.pi, np.pi, wrapped)


def euler_to_matrix(angles: np.ndarray) -> np.ndarray:
    """Rotation matrices Rz @ Ry @ Rx for angle triples (..., 3) -> (..., 3, 3)."""
    angles = np.asarray(angles, dtype=float)
    ax, ay, az = angles[..., 0], angles[..., 1], angles[..., 2]
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)

    out = np.empty(angles.shape[:-1] + (3, 3), dtype=float)
    out[..., 0, 0] = cz * cy
    out[..., 0, 1] = cz * sy * sx - sz * cx
    out[..., 0, 2] = cz * sy * cx + sz * sx
    out[..., 1, 0] = sz * cy
    out[..., 1, 1] = sz * sy * sx + cz * cx
    out[..., 1, 2] = sz * sy * cx - cz * sx
    out[..., 2, 0] = -sy
    out[..., 2, 1] = cy * sx
    out[..., 2, 2] = cy * cx
    return out


def matrix_to_euler(rot: np.ndarray) -> np.ndarray:
    """Invert :func:`euler_to_matrix`; (..., 3, 3) -> (..., 3), wrapped to (-pi, pi].

    At gimbal lock (|r20| = 1) the x/z split is ambiguous; z is set to 0.
    """
    rot = np.asarray(rot, dtype=float)
    r20 = np.clip(rot[..., 2, 0], -1.0, 1.0)
    ay = -np.arcsin(r20)
    cy = np.cos(ay)
    locked = cy < 1e-9

    safe_cy = np.where(locked, 1.0, cy)
    ax = np.arctan2(rot[..., 2, 1] / safe_cy, rot[..., 2, 2] / safe_cy)
    az = np.arctan2(rot[..., 1, 0] / safe_cy, rot[..., 0, 0] / safe_cy)

    # gimbal lock: with sy = +-1 only (ax -+ az) is determined; put it all in x
    ax_locked = np.arctan2(-np.sign(r20) * rot[..., 0, 1], rot[..., 1, 1])
    ax = np.where(locked, ax_locked, ax)
    az = np.where(locked, 0.0, az)

    return wrap_angle(np.stack([ax, ay, az], axis=-1))


def align_rotation(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vectors ``src`` onto unit vectors ``dst``.

    The rotation axis is src x dst (zero twist about src). Broadcasts over
    leading axes: (..., 3) x (..., 3) -> (..., 3, 3). Antiparallel pairs get a
    pi rotation about a deterministic perpendicular axis.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    src, dst = np.broadcast_arrays(src, dst)

    cos = np.clip(np.sum(src * dst, axis=-1), -1.0, 1.0)
    axis = np.cross(src, dst)
    sin = np.linalg.norm(axis, axis=-1)

    antiparallel = cos < -1.0 + 1e-12
    degenerate = (sin < 1e-12) & ~antiparallel  # parallel: identity

    # deterministic perpendicular for the antiparallel case: cross src with the
    # basis vector it is least aligned with
    least = np.argmin(np.abs(src), axis=-1)
    basis = np.eye(3)[least]
    perp = np.cross(src, basis)
    perp_norm = np.linalg.norm(perp, axis=-1, keepdims=True)
    perp = perp / np.where(perp_norm == 0.0, 1.0, perp_norm)

    safe_sin = np.where(sin < 1e-12, 1.0, sin)
    unit_axis = axis / safe_sin[..., None]
    unit_axis = np.where(antiparallel[..., None], perp, unit_axis)

    kx, ky, kz = unit_axis[..., 0], unit_axis[..., 1], unit_axis[..., 2]
    zeros = np.zeros_like(kx)
    k_cross = np.stack(
        [
            np.stack([zeros, -kz, ky], axis=-1),
            np.stack([kz, zeros, -kx], axis=-1),
            np.stack([-ky, kx, zeros], axis=-1),
        ],
        axis=-2,
    )

    sin_eff = np.where(antiparallel, 0.0, sin)
    cos_eff = np.where(antiparallel, -1.0, cos)
    eye = np.broadcast_to(np.eye(3), k_cross.shape)
    rot = (
        eye
        + sin_eff[..., None, None] * k_cross
        + (1.0 - cos_eff)[..., None, None] * (k_cross @ k_cross)
    )
    return np.where(degenerate[..., None, None], eye, rot)
