"""Forward and inverse kinematics over the joint hierarchy.

The pose parameterization: every joint stores one local rotation (Euler Z-Y-X,
see :mod:`gmwalk.rotations`). A joint's *global* rotation is the product of
its ancestors' locals and its own, and it orients the bone leading *into* the
joint:

    pos[j] = pos[parent] + R_global[j] @ offset[j]
    R_global[j] = R_global[parent] @ R_local[j]

The root's rotation orients the whole body. Because each bone direction is
controlled by its own joint, inverse kinematics can reproduce every observed
bone direction exactly, joint by joint, with no fitting.

IK resolves the twist ambiguity per joint, in the parent's frame: the local
rotation is the minimal rotation aligning the rest offset onto the observed
bone direction pulled back into the parent's frame (axis = cross product of
the two, so zero twist about the bone). The root's rotation is set to
identity. This makes each joint's angle reading depend only on its own bone
direction relative to its parent's frame, so joint limits act locally, like
anatomical limits. Observed bone lengths are discarded: FK of the result
restores the skeleton's rest lengths, so FK(IK(.)) is exactly the per-frame
bone-length projection.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateBoneError, ShapeMismatchError
from .motion import AngleMotion, Motion
from .rotations import align_rotation, euler_to_matrix, matrix_to_euler
from .skeleton import Skeleton

LENGTH_EPSILON = 1e-8  # meters; observed bones shorter than this are degenerate


def forward_kinematics(am: AngleMotion, sk: Skeleton) -> Motion:
    """Joint positions from a root trajectory and local joint angles.

    Output bone lengths equal the skeleton's rest lengths up to rounding.
    """
    if am.skeleton.num_joints != sk.num_joints:
        raise ShapeMismatchError(
            f"angle motion has {am.skeleton.num_joints} joints, skeleton has {sk.num_joints}"
        )
    n = am.num_frames
    num_joints = sk.num_joints
    locals_ = euler_to_matrix(am.joint_angles())  # (n, O, 3, 3)

    positions = np.empty((n, num_joints, 3))
    globals_ = np.empty((n, num_joints, 3, 3))
    root = sk.root_index
    globals_[:, root] = locals_[:, root]
    positions[:, root] = am.root_positions

    parents = sk.parents
    offsets = sk.offsets
    for j in range(num_joints):
        if j == root:
            continue
        p = parents[j]
        globals_[:, j] = globals_[:, p] @ locals_[:, j]
        positions[:, j] = positions[:, p] + globals_[:, j] @ offsets[j]
    return Motion(skeleton=sk, frames=positions, frame_dt=am.frame_dt)


def inverse_kinematics(mo: Motion, sk: Skeleton) -> AngleMotion:
    """Local joint angles reproducing a motion's bone directions exactly.

    Raises DegenerateBoneError naming the first offending frame and joint when
    an observed bone is shorter than LENGTH_EPSILON.
    """
    if mo.num_joints != sk.num_joints:
        raise ShapeMismatchError(
            f"motion has {mo.num_joints} joints, skeleton has {sk.num_joints}"
        )
    frames = mo.frames
    n = mo.num_frames
    num_joints = sk.num_joints
    root = sk.root_index
    parents = sk.parents
    offsets = sk.offsets
    rest_dirs = offsets / np.where(sk.rest_lengths[:, None] == 0.0, 1.0, sk.rest_lengths[:, None])

    globals_ = np.empty((n, num_joints, 3, 3))
    globals_[:, root] = np.eye(3)
    angles = np.zeros((n, num_joints, 3))

    for j in range(num_joints):
        if j == root:
            continue
        p = parents[j]
        bone = frames[:, j] - frames[:, p]
        lengths = np.linalg.norm(bone, axis=1)
        short = lengths <= LENGTH_EPSILON
        if short.any():
            t = int(np.flatnonzero(short)[0])
            raise DegenerateBoneError(t, j, sk.joints[j].name, float(lengths[t]))
        observed_dirs = bone / lengths[:, None]
        # G_p^T @ dir: sum over the row index pulls the direction back into
        # the parent's frame
        pulled_back = np.einsum("tij,ti->tj", globals_[:, p], observed_dirs)
        local = align_rotation(np.broadcast_to(rest_dirs[j], (n, 3)), pulled_back)
        globals_[:, j] = globals_[:, p] @ local
        angles[:, j] = matrix_to_euler(local)

    return AngleMotion(
        skeleton=sk,
        root_positions=frames[:, root],
        angles=angles.reshape(n, 3 * num_joints),
        frame_dt=mo.frame_dt,
    )


def _rotate_toward(vecs: np.ndarray, target: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Rotate unit vectors a fraction t of the way toward unit targets."""
    target = np.broadcast_to(target, vecs.shape)
    cos = np.clip(np.sum(vecs * target, axis=-1), -1.0, 1.0)
    angle = np.arccos(cos)
    axis = np.cross(vecs, target)
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    axis = axis / np.where(norm < 1e-15, 1.0, norm)
    step = angle * np.asarray(t)
    c = np.cos(step)[..., None]
    s = np.sin(step)[..., None]
    k_dot_v = np.sum(axis * vecs, axis=-1, keepdims=True)
    rotated = vecs * c + np.cross(axis, vecs) * s + axis * k_dot_v * (1.0 - c)
    return np.where(norm < 1e-15, vecs, rotated)


def canonical_clamp(joint_angles: np.ndarray, sk: Skeleton, bisections: int = 18) -> np.ndarray:
    """Map per-joint Euler triples onto the in-limit, zero-twist angle set.

    The result is a (n, O, 3) angle array such that every joint's rotation is
    the minimal rotation onto its bone image (zero twist about the rest
    offset, exactly what inverse_kinematics reads back) and lies within the
    skeleton's limit box. FK of the result therefore passes the on-manifold
    check exactly: bones are rest-length by construction and the angle
    reading is the array itself.

    Per joint, the input rotation's bone image is kept where feasible; when
    its minimal-rotation angles leave the box, the image direction is pulled
    toward the rest direction (whose angles are zero, inside every valid box)
    by bisection until the reading fits. The root triple is clamped
    component-wise: it has no bone, so any in-box value reads back as zero
    and only needs to stay legal.
    """
    if np.any(sk.angle_lo > 0.0) or np.any(sk.angle_hi < 0.0):
        raise ValueError("canonical_clamp requires limit boxes that contain zero")
    joint_angles = np.asarray(joint_angles, dtype=float)
    root = sk.root_index
    nonroot = np.flatnonzero(sk.parents >= 0)
    rest_dirs = sk.offsets[nonroot] / sk.rest_lengths[nonroot, None]
    lo = sk.angle_lo[nonroot]
    hi = sk.angle_hi[nonroot]

    images = np.einsum(
        "tjab,jb->tja", euler_to_matrix(joint_angles[:, nonroot]), rest_dirs
    )
    reading = matrix_to_euler(align_rotation(rest_dirs, images))
    bad = np.any((reading < lo) | (reading > hi), axis=2)
    if bad.any():
        t_idx, j_idx = np.nonzero(bad)
        vecs = images[t_idx, j_idx]
        rests = rest_dirs[j_idx]
        lo_b, hi_b = lo[j_idx], hi[j_idx]
        t_lo = np.zeros(vecs.shape[0])
        t_hi = np.ones(vecs.shape[0])
        for _ in range(bisections):
            t = 0.5 * (t_lo + t_hi)
            cand = matrix_to_euler(align_rotation(rests, _rotate_toward(vecs, rests, t)))
            ok = np.all((cand >= lo_b) & (cand <= hi_b), axis=1)
            t_hi = np.where(ok, t, t_hi)
            t_lo = np.where(ok, t_lo, t)
        fixed = matrix_to_euler(align_rotation(rests, _rotate_toward(vecs, rests, t_hi)))
        # unreachable for inputs within pi of rest; zero is always legal
        fixed[np.any((fixed < lo_b) | (fixed > hi_b), axis=1)] = 0.0
        reading[t_idx, j_idx] = fixed

    out = np.zeros_like(joint_angles)
    out[:, root] = np.clip(joint_angles[:, root], sk.angle_lo[root], sk.angle_hi[root])
    out[:, nonroot] = reading
    return out
