import numpy as np
import pytest

from gmwalk.errors import DegenerateBoneError, ShapeMismatchError, SkeletonError
from gmwalk.kinematics import forward_kinematics, inverse_kinematics
from gmwalk.motion import AngleMotion, Motion
from gmwalk.rotations import euler_to_matrix, matrix_to_euler, wrap_angle
from gmwalk.skeleton import JointSpec, Skeleton

from conftest import (
    branched_skeleton,
    canonical_angle_motion,
    chain_skeleton,
    fk_motion,
    random_inlimit_angle_motion,
)


def test_rotation_round_trip_principal_range(rng):
    # z-y-x euler decomposition is unique only with the y angle in
    # [-pi/2, pi/2]; inside that range, angle triples round-trip exactly
    angles = rng.uniform(-np.pi + 1e-3, np.pi - 1e-3, size=(200, 3))
    angles[:, 1] = rng.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, size=200)
    recovered = matrix_to_euler(euler_to_matrix(angles))
    np.testing.assert_allclose(recovered, angles, atol=1e-10)


def test_rotation_matrix_round_trip_everywhere(rng):
    angles = rng.uniform(-np.pi + 1e-3, np.pi - 1e-3, size=(200, 3))
    mats = euler_to_matrix(angles)
    again = euler_to_matrix(matrix_to_euler(mats))
    np.testing.assert_allclose(again, mats, atol=1e-10)


def test_wrap_angle_half_open():
    assert wrap_angle(np.array(np.pi)) == pytest.approx(np.pi)
    assert wrap_angle(np.array(-np.pi)) == pytest.approx(np.pi)
    assert wrap_angle(np.array(3.0 * np.pi)) == pytest.approx(np.pi)
    np.testing.assert_allclose(wrap_angle(np.array([0.1, -0.1])), [0.1, -0.1])


def test_fk_zero_angles_chain(chain2):
    mo = fk_motion(chain2, np.zeros((3, 3, 3)))
    np.testing.assert_allclose(mo.frames[0, 1], [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(mo.frames[0, 2], [2.0, 0.0, 0.0], atol=1e-12)


def test_fk_root_rotated_quarter_turn(chain2):
    # root z-angle pi/2 turns the whole chain onto the y axis
    angles = np.zeros((3, 3, 3))
    angles[:, 0, 2] = np.pi / 2.0
    mo = fk_motion(chain2, angles)
    np.testing.assert_allclose(mo.frames[0, 1], [0.0, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(mo.frames[0, 2], [0.0, 2.0, 0.0], atol=1e-12)


def test_fk_preserves_bone_lengths(rng):
    sk = branched_skeleton()
    am = random_inlimit_angle_motion(sk, rng, n=8)
    mo = forward_kinematics(am, sk)
    lengths = mo.bone_lengths()
    nonroot = sk.parents >= 0
    rel_err = np.abs(lengths[:, nonroot] - sk.rest_lengths[nonroot]) / sk.rest_lengths[nonroot]
    assert rel_err.max() < 1e-9


def test_fk_joint_count_mismatch(chain2):
    other = chain_skeleton(3)
    am = AngleMotion(
        skeleton=other,
        root_positions=np.zeros((3, 3)),
        angles=np.zeros((3, 12)),
        frame_dt=0.1,
    )
    with pytest.raises(ShapeMismatchError):
        forward_kinematics(am, chain2)


def test_ik_recovers_canonical_angles(rng):
    sk = branched_skeleton()
    for _ in range(20):
        am = canonical_angle_motion(sk, rng, n=5)
        mo = forward_kinematics(am, sk)
        rec = inverse_kinematics(mo, sk)
        np.testing.assert_allclose(rec.angles, am.angles, atol=1e-6)
        np.testing.assert_allclose(rec.root_positions, am.root_positions, atol=0)


def test_ik_static_rest_pose_is_zero(chain2):
    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    mo = Motion(skeleton=chain2, frames=np.tile(rest, (4, 1, 1)), frame_dt=0.1)
    am = inverse_kinematics(mo, chain2)
    np.testing.assert_allclose(am.angles, 0.0, atol=1e-12)


def test_ik_degenerate_bone_names_frame_and_joint(chain2):
    frames = np.tile(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), (4, 1, 1))
    frames[2, 2] = frames[2, 1]  # joint 2 collapses onto its parent in frame 2
    mo = Motion(skeleton=chain2, frames=frames, frame_dt=0.1)
    with pytest.raises(DegenerateBoneError) as err:
        inverse_kinematics(mo, chain2)
    assert err.value.frame == 2
    assert err.value.joint == 2


def test_fk_ik_fk_fixed_point(rng):
    sk = branched_skeleton()
    for _ in range(10):
        am = random_inlimit_angle_motion(sk, rng, n=6)
        first = forward_kinematics(am, sk)
        again = forward_kinematics(inverse_kinematics(first, sk), sk)
        np.testing.assert_allclose(again.frames, first.frames, atol=1e-6)


def test_ik_fk_restores_positions_when_bones_match(rng):
    sk = branched_skeleton()
    am = random_inlimit_angle_motion(sk, rng, n=6)
    mo = forward_kinematics(am, sk)  # bone lengths match rest lengths exactly
    restored = forward_kinematics(inverse_kinematics(mo, sk), sk)
    np.testing.assert_allclose(restored.frames, mo.frames, atol=1e-6)


def test_ik_rescales_stretched_bones(chain2):
    # doubling all coordinates stretches bones 2x; FK(IK(.)) keeps directions
    # and restores rest lengths
    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    mo = Motion(skeleton=chain2, frames=np.tile(rest * 2.0, (3, 1, 1)), frame_dt=0.1)
    proj = forward_kinematics(inverse_kinematics(mo, chain2), chain2)
    np.testing.assert_allclose(proj.frames[0, 0], [0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(proj.frames[0, 1], [1.0, 0.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(proj.frames[0, 2], [1.0, 1.0, 0.0], atol=1e-9)


def test_skeleton_validation():
    with pytest.raises(SkeletonError):
        Skeleton(joints=(JointSpec("a", None, (0, 0, 0), (0, 0, 0), (0, 0, 0)),
                         JointSpec("b", None, (1, 0, 0), (0, 0, 0), (0, 0, 0))))
    with pytest.raises(SkeletonError):
        Skeleton(joints=(JointSpec("a", None, (0, 0, 0), (0, 0, 0), (0, 0, 0)),
                         JointSpec("b", 0, (0, 0, 0), (0, 0, 0), (0, 0, 0))))
    with pytest.raises(SkeletonError):
        Skeleton(joints=(JointSpec("a", None, (0, 0, 0), (0, 0, 0), (0, 0, 0)),
                         JointSpec("b", 1, (1, 0, 0), (0, 0, 0), (0, 0, 0))))
    with pytest.raises(SkeletonError):
        Skeleton(joints=(JointSpec("a", None, (0, 0, 0), (0, 0, 0), (0, 0, 0)),
                         JointSpec("b", 0, (1, 0, 0), (0.5, 0, 0), (-0.5, 0, 0))))
