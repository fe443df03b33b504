"""Synthetic labeled motion corpus on a fixed humanoid skeleton.

Classes are procedural motion programs: per class, each limb group gets its
own oscillation frequency, amplitude pattern, phase relation, and a static
posture bias. Per-sample jitter perturbs frequencies, amplitudes, phases and
adds smooth low-frequency angle noise. Motions are synthesized in joint-angle
space in the zero-twist form and verified against the joint limits, so every
emitted motion has exact bone lengths and in-limit angles by construction.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .kinematics import canonical_clamp, forward_kinematics
from .manifold import ProjectionConfig, check_on_manifold
from .motion import AngleMotion, Motion
from .skeleton import JointSpec, Skeleton


def humanoid_skeleton() -> Skeleton:
    """21-joint humanoid with per-axis limits.

    Limits are chosen so that cumulative limb-chain rotations stay well below
    pi: the zero-twist angle reading used by the manifold checks becomes
    ill-conditioned when a bone points nearly opposite its rest direction, so
    anatomical plausibility is traded a little for a safety margin there.
    """
    pi = np.pi
    torso = ((-0.4, -0.4, -0.4), (0.4, 0.4, 0.4))
    neck = ((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    shoulder = ((-0.95, -0.95, -0.85), (0.95, 0.95, 0.85))
    elbow = ((-0.35, -0.35, -1.55), (0.35, 0.35, 0.3))
    wrist = ((-0.35, -0.35, -0.35), (0.35, 0.35, 0.35))
    hand = ((-0.3, -0.3, -0.3), (0.3, 0.3, 0.3))
    hip = ((-0.9, -0.5, -0.5), (0.9, 0.5, 0.5))
    knee = ((-0.15, -0.2, -0.2), (1.35, 0.2, 0.2))
    ankle = ((-0.4, -0.35, -0.35), (0.4, 0.35, 0.35))
    foot = ((-0.3, -0.3, -0.3), (0.3, 0.3, 0.3))

    def mirror(limits):
        lo, hi = limits
        return tuple(-h for h in hi), tuple(-l for l in lo)

    joints = (
        JointSpec("hips", None, (0.0, 0.0, 0.0), (-pi, -pi, -pi), (pi, pi, pi)),
        JointSpec("spine", 0, (0.0, 0.12, 0.0), *torso),
        JointSpec("chest", 1, (0.0, 0.14, 0.0), *torso),
        JointSpec("neck", 2, (0.0, 0.12, 0.0), *neck),
        JointSpec("head", 3, (0.0, 0.10, 0.0), *neck),
        JointSpec("l_shoulder", 2, (0.16, 0.02, 0.0), *shoulder),
        JointSpec("l_elbow", 5, (0.26, 0.0, 0.0), *elbow),
        JointSpec("l_wrist", 6, (0.24, 0.0, 0.0), *wrist),
        JointSpec("l_hand", 7, (0.09, 0.0, 0.0), *hand),
        JointSpec("r_shoulder", 2, (-0.16, 0.02, 0.0), *mirror(shoulder)),
        JointSpec("r_elbow", 9, (-0.26, 0.0, 0.0), *mirror(elbow)),
        JointSpec("r_wrist", 10, (-0.24, 0.0, 0.0), *mirror(wrist)),
        JointSpec("r_hand", 11, (-0.09, 0.0, 0.0), *mirror(hand)),
        JointSpec("l_hip", 0, (0.09, -0.06, 0.0), *hip),
        JointSpec("l_knee", 13, (0.0, -0.40, 0.0), *knee),
        JointSpec("l_ankle", 14, (0.0, -0.40, 0.0), *ankle),
        JointSpec("l_foot", 15, (0.0, -0.06, 0.12), *foot),
        JointSpec("r_hip", 0, (-0.09, -0.06, 0.0), *mirror(hip)),
        JointSpec("r_knee", 17, (0.0, -0.40, 0.0), *knee),
        JointSpec("r_ankle", 18, (0.0, -0.40, 0.0), *ankle),
        JointSpec("r_foot", 19, (0.0, -0.06, 0.12), *mirror(foot)),
    )
    return Skeleton(joints=joints)


# joint groups driving the per-class motion programs
_ARM_JOINTS = ("l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist")
_LEG_JOINTS = ("l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle")
_TORSO_JOINTS = ("spine", "chest", "neck", "head")


class MotionClass:
    """Frozen per-class oscillation program drawn from a class-level seed."""

    def __init__(self, class_id: int, base_seed: int, sk: Skeleton):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, class_id])))
        self.class_id = class_id
        self.freq = 0.5 + 0.3 * class_id + rng.uniform(0.0, 0.15)
        self.arm_amp = rng.uniform(0.35, 0.8)
        self.leg_amp = rng.uniform(0.3, 0.7)
        self.torso_amp = rng.uniform(0.08, 0.2)
        self.antiphase_arms = bool(rng.integers(2))
        self.antiphase_legs = bool(rng.integers(2))
        names = sk.joint_names
        # per-joint posture bias and axis emphasis, drawn once per class
        self.bias = {}
        self.axis_weight = {}
        self.phase = {}
        for name in names:
            self.bias[name] = rng.uniform(-0.15, 0.15, size=3)
            wgt = rng.uniform(0.2, 1.0, size=3)
            self.axis_weight[name] = wgt / wgt.max()
            self.phase[name] = rng.uniform(0.0, 2.0 * np.pi)


def _group_amp(cls: MotionClass, name: str) -> float:
    if name in _ARM_JOINTS:
        return cls.arm_amp
    if name in _LEG_JOINTS:
        return cls.leg_amp
    if name in _TORSO_JOINTS:
        return cls.torso_amp
    if name.endswith("_hand"):
        return 0.3 * cls.arm_amp
    if name.endswith("_foot"):
        return 0.3 * cls.leg_amp
    return 0.0  # the root pose is carried by the root trajectory


def synthesize_motion(
    sk: Skeleton,
    cls: MotionClass,
    rng: np.random.Generator,
    num_frames: int = 60,
    frame_dt: float = 1.0 / 30.0,
) -> Motion:
    """One sample of a class program with per-sample jitter, on-manifold."""
    names = sk.joint_names
    lo, hi = sk.angle_lo, sk.angle_hi
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    freq = cls.freq * rng.uniform(0.93, 1.07)
    amp_jitter = rng.uniform(0.85, 1.15)
    global_phase = rng.uniform(0.0, 0.5)
    t = np.arange(num_frames) * frame_dt

    angles = np.zeros((num_frames, sk.num_joints, 3))
    for j, name in enumerate(names):
        amp = _group_amp(cls, name) * amp_jitter
        phase = cls.phase[name] + global_phase + rng.normal(scale=0.15)
        mirrored = name.startswith("r_")
        flip = -1.0 if (
            (mirrored and name in _ARM_JOINTS and cls.antiphase_arms)
            or (mirrored and name in _LEG_JOINTS and cls.antiphase_legs)
        ) else 1.0
        wave = np.sin(2.0 * np.pi * freq * t + phase) * flip
        slow_noise = rng.normal(scale=0.03, size=3)[None, :] * np.sin(
            2.0 * np.pi * (freq * 0.37) * t + rng.uniform(0.0, 2.0 * np.pi)
        )[:, None]
        swing = amp * cls.axis_weight[name][None, :] * wave[:, None] + slow_noise
        target = cls.bias[name][None, :] + swing
        # stay strictly inside the limits with a 10% margin
        angles[:, j, :] = center[j] + np.clip(target, -0.9, 0.9) * 0.9 * half[j]
    angles[:, sk.root_index, :] = 0.0

    drift = rng.normal(scale=0.05, size=3)
    bob = 0.02 * np.sin(2.0 * np.pi * freq * t + global_phase)
    root = np.zeros((num_frames, 3))
    root[:, 0] = drift[0] * t
    root[:, 1] = 0.9 + bob
    root[:, 2] = drift[2] * t

    # zero-twist the programs so the emitted motion's angle reading is the
    # synthesized angles themselves: on-manifold by construction
    am = AngleMotion(
        skeleton=sk,
        root_positions=root,
        angles=canonical_clamp(angles, sk).reshape(num_frames, -1),
        frame_dt=frame_dt,
    )
    mo = forward_kinematics(am, sk)
    return mo.with_frames(mo.frames, label_hint=cls.class_id)


def generate_dataset(
    out_dir: str | Path,
    num_classes: int = 8,
    samples_per_class: int = 40,
    seed: int = 0,
    num_frames: int = 60,
    frame_dt: float = 1.0 / 30.0,
) -> list[Path]:
    """Write a labeled corpus to ``out_dir``; deterministic per seed.

    Files are named sample_<index>.json with classes interleaved
    (index % num_classes == class id). Returns the sorted file list.
    """
    from .motion_io import save_motion

    if num_classes < 2:
        raise ValueError("need at least two classes")
    if samples_per_class < 1:
        raise ValueError("need at least one sample per class")
    sk = humanoid_skeleton()
    classes = [MotionClass(c, seed, sk) for c in range(num_classes)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx in range(num_classes * samples_per_class):
        c = idx % num_classes
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, c, idx])))
        mo = synthesize_motion(sk, classes[c], rng, num_frames=num_frames, frame_dt=frame_dt)
        path = out / f"sample_{idx:04d}.json"
        save_motion(mo, path)
        paths.append(path)
    return paths


def verify_dataset_on_manifold(paths: list[Path]) -> bool:
    from .motion_io import load_motion

    cfg = ProjectionConfig()
    for path in paths:
        mo = load_motion(path)
        if not check_on_manifold(mo, mo.skeleton, cfg).on_manifold:
            return False
    return True
