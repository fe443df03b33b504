import numpy as np
import pytest

from gmwalk.kinematics import forward_kinematics
from gmwalk.motion import AngleMotion
from gmwalk.rotations import align_rotation, matrix_to_euler
from gmwalk.skeleton import JointSpec, Skeleton

WIDE = (-np.pi, -np.pi, -np.pi), (np.pi, np.pi, np.pi)


def chain_skeleton(num_links: int = 2, limits=WIDE) -> Skeleton:
    """Root plus num_links joints, each offset (1, 0, 0) from its parent."""
    joints = [JointSpec("root", None, (0.0, 0.0, 0.0), limits[0], limits[1])]
    for i in range(num_links):
        joints.append(JointSpec(f"link{i}", i, (1.0, 0.0, 0.0), limits[0], limits[1]))
    return Skeleton(joints=tuple(joints))


def branched_skeleton() -> Skeleton:
    """Five joints with a two-way branch, uneven offsets, finite limits."""
    lo, hi = (-1.2, -1.2, -1.2), (1.2, 1.2, 1.2)
    return Skeleton(
        joints=(
            JointSpec("root", None, (0.0, 0.0, 0.0), (-np.pi, -np.pi, -np.pi), (np.pi, np.pi, np.pi)),
            JointSpec("spine", 0, (0.0, 0.4, 0.0), lo, hi),
            JointSpec("l_arm", 1, (0.3, 0.05, 0.0), lo, hi),
            JointSpec("r_arm", 1, (-0.3, 0.05, 0.0), lo, hi),
            JointSpec("head", 1, (0.0, 0.25, 0.05), lo, hi),
        )
    )


def canonical_angle_motion(sk: Skeleton, rng: np.random.Generator, n: int = 6,
                           dt: float = 1.0 / 30.0, scale: float = 1.0) -> AngleMotion:
    """Random AngleMotion in the zero-twist form that inverse kinematics produces.

    Built independently of the IK implementation: per joint, a per-frame bone
    direction is drawn in the parent's frame near the rest direction, and the
    local rotation is the minimal rotation aligning one onto the other (axis
    perpendicular to both). Serves as the IK recovery oracle.
    """
    num_joints = sk.num_joints
    root = sk.root_index
    angles = np.zeros((n, num_joints, 3))
    for j in range(num_joints):
        if j == root:
            continue
        rest_dir = sk.offsets[j] / sk.rest_lengths[j]
        # random tilt axis perpendicular to nothing in particular; the align
        # construction below zero-twists whatever direction results
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        tilt = rng.uniform(0.05, 0.95) * scale
        wobble = rng.uniform(-0.2, 0.2, size=n) * scale
        dirs = np.stack([_rotate(rest_dir, axis, tilt + w) for w in wobble])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        angles[:, j] = matrix_to_euler(
            align_rotation(np.broadcast_to(rest_dir, (n, 3)), dirs)
        )

    root_positions = rng.normal(scale=0.3, size=(n, 3))
    return AngleMotion(
        skeleton=sk,
        root_positions=root_positions,
        angles=angles.reshape(n, 3 * num_joints),
        frame_dt=dt,
    )


def _rotate(vec, axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    vec = np.asarray(vec, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    return vec * c + np.cross(axis, vec) * s + axis * np.dot(axis, vec) * (1.0 - c)


def random_onmanifold_angle_motion(sk: Skeleton, rng: np.random.Generator, n: int = 6,
                                   dt: float = 1.0 / 30.0, scale: float = 0.5) -> AngleMotion:
    """Random zero-twist AngleMotion whose angles respect the skeleton limits.

    FK of the result is on-manifold by definition (its inverse kinematics
    reading is exactly these angles). Falls back to smaller excursions until
    the limits are met.
    """
    for _ in range(30):
        am = canonical_angle_motion(sk, rng, n=n, dt=dt, scale=scale)
        angles = am.joint_angles()
        if np.all(angles >= sk.angle_lo) and np.all(angles <= sk.angle_hi):
            return am
        scale *= 0.7
    raise RuntimeError("could not draw an in-limit canonical motion")


def random_inlimit_angle_motion(sk: Skeleton, rng: np.random.Generator, n: int = 6,
                                dt: float = 1.0 / 30.0, margin: float = 0.05) -> AngleMotion:
    """Random AngleMotion with every angle strictly inside the skeleton's limits."""
    lo = np.clip(sk.angle_lo, -np.pi + 1e-6, None)
    hi = np.clip(sk.angle_hi, None, np.pi)
    span = hi - lo
    u = rng.uniform(margin, 1.0 - margin, size=(n, sk.num_joints, 3))
    angles = lo + span * u
    return AngleMotion(
        skeleton=sk,
        root_positions=rng.normal(scale=0.2, size=(n, 3)),
        angles=angles.reshape(n, 3 * sk.num_joints),
        frame_dt=dt,
    )


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def chain2():
    return chain_skeleton(2)


@pytest.fixture
def branched():
    return branched_skeleton()


def fk_motion(sk, angles_by_frame, root_positions=None, dt=1.0 / 30.0):
    """Convenience: FK of explicit per-frame (O, 3) angle arrays."""
    angles = np.asarray(angles_by_frame, dtype=float)
    n = angles.shape[0]
    if root_positions is None:
        root_positions = np.zeros((n, 3))
    am = AngleMotion(
        skeleton=sk,
        root_positions=np.asarray(root_positions, dtype=float),
        angles=angles.reshape(n, 3 * sk.num_joints),
        frame_dt=dt,
    )
    return forward_kinematics(am, sk)
