"""Pose-manifold checks and manifold projection.

A motion is on-manifold when every frame keeps the skeleton's bone lengths
(within a relative tolerance) and its joint angles within the per-axis limits
(within an absolute tolerance). Projection maps a perturbed motion back to
that set in three steps: inverse kinematics (which alone restores bone
lengths), a box-constrained quadratic solve in joint-angle space that stays
close to the perturbed angles while matching the original motion's angular
acceleration, and forward kinematics.

The quadratic objective, with ``t~`` the perturbed angles, ``t`` the original
motion's angles and ``D`` the (frame-index) second-difference operator:

    f(a) = ||a - t~||^2 + w ||D a - D t||^2,   angle_lo <= a <= angle_hi

It is solved by projected gradient descent with a backtracking line search;
the projection is a component-wise clamp. D is applied per frame index (unit
spacing): scaling by the physical frame time would only rescale w, and the
unit-spacing operator keeps the problem well conditioned for any frame rate.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeMismatchError
from .kinematics import canonical_clamp, forward_kinematics, inverse_kinematics
from .motion import AngleMotion, Motion, second_difference, second_difference_adjoint
from .rotations import wrap_angle
from .skeleton import Skeleton

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionConfig:
    w: float = 0.3
    max_solver_iters: int = 500
    grad_tolerance: float = 1e-6
    bone_rel_tolerance: float = 1e-3
    limit_tolerance: float = 1e-4

    def __post_init__(self):
        if self.w < 0.0:
            raise ValueError("w must be non-negative")
        if self.max_solver_iters < 1:
            raise ValueError("max_solver_iters must be positive")
        for name in ("grad_tolerance", "bone_rel_tolerance", "limit_tolerance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ManifoldReport:
    """Violation listing; on_manifold is true iff both lists are empty."""

    on_manifold: bool
    bone_violations: tuple[tuple[int, int, float], ...]   # (frame, bone joint, rel deviation)
    limit_violations: tuple[tuple[int, int, int, float], ...]  # (frame, joint, axis, exceedance rad)


def check_on_manifold(mo: Motion, sk: Skeleton, cfg: ProjectionConfig) -> ManifoldReport:
    """Flag per-frame bone-length and joint-limit violations."""
    if mo.num_joints != sk.num_joints:
        raise ShapeMismatchError(
            f"motion has {mo.num_joints} joints, skeleton has {sk.num_joints}"
        )
    nonroot = np.flatnonzero(sk.parents >= 0)
    lengths = mo.bone_lengths()[:, nonroot]
    rest = sk.rest_lengths[nonroot]
    rel_dev = np.abs(lengths - rest) / rest
    bone_violations = tuple(
        (int(t), int(nonroot[b]), float(rel_dev[t, b]))
        for t, b in np.argwhere(rel_dev > cfg.bone_rel_tolerance)
    )

    angles = inverse_kinematics(mo, sk).joint_angles()
    lo = sk.angle_lo[None, :, :]
    hi = sk.angle_hi[None, :, :]
    exceed = np.maximum(lo - angles, angles - hi)
    limit_violations = tuple(
        (int(t), int(j), int(a), float(exceed[t, j, a]))
        for t, j, a in np.argwhere(exceed > cfg.limit_tolerance)
    )
    return ManifoldReport(
        on_manifold=not bone_violations and not limit_violations,
        bone_violations=bone_violations,
        limit_violations=limit_violations,
    )


@dataclass
class SolverTrace:
    rows: list[tuple[int, float, float]] = field(default_factory=list)  # iter, objective, grad norm
    converged: bool = False

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "gradient_norm"])
            writer.writerows((i, repr(o), repr(g)) for i, o, g in self.rows)


def _objective_value(a, target, accel_target, w):
    fit = a - target
    val = float(np.dot(fit.ravel(), fit.ravel()))
    if w > 0.0:
        dyn = second_difference(a, 1.0) - accel_target
        val += w * float(np.dot(dyn.ravel(), dyn.ravel()))
    return val


def solve_box_quadratic(
    theta_start: np.ndarray,
    theta_target: np.ndarray,
    accel_target: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    cfg: ProjectionConfig,
) -> tuple[np.ndarray, SolverTrace]:
    """Minimize ||a - theta_target||^2 + w ||D a - accel_target||^2 on a box.

    Projected gradient descent with backtracking (step halved until the
    standard sufficient-decrease condition holds). Every iterate is feasible;
    the objective is non-increasing across accepted iterations. Stops when the
    unit-step projected-gradient residual norm drops below grad_tolerance.
    """
    w = cfg.w

    def objective(a):
        fit = a - theta_target
        val = float(np.dot(fit.ravel(), fit.ravel()))
        if w > 0.0:
            dyn = second_difference(a, 1.0) - accel_target
            val += w * float(np.dot(dyn.ravel(), dyn.ravel()))
        return val

    def gradient(a):
        g = 2.0 * (a - theta_target)
        if w > 0.0:
            g += 2.0 * w * second_difference_adjoint(second_difference(a, 1.0) - accel_target, 1.0)
        return g

    theta = np.clip(theta_start, lo, hi)
    f_val = objective(theta)
    trace = SolverTrace()
    step = 1.0
    for it in range(cfg.max_solver_iters):
        g = gradient(theta)
        residual = float(np.linalg.norm(theta - np.clip(theta - g, lo, hi)))
        trace.rows.append((it, f_val, residual))
        if residual <= cfg.grad_tolerance:
            trace.converged = True
            break

        step = min(step * 2.0, 1.0)
        while True:
            cand = np.clip(theta - step * g, lo, hi)
            delta = cand - theta
            dnorm2 = float(np.dot(delta.ravel(), delta.ravel()))
            if dnorm2 == 0.0:
                # gradient points straight out of the box: stationary
                trace.converged = True
                return theta, trace
            f_cand = objective(cand)
            if f_cand <= f_val + float(np.dot(g.ravel(), delta.ravel())) + dnorm2 / (2.0 * step):
                break
            step *= 0.5
        theta, f_val = cand, f_cand
    return theta, trace


class ManifoldProjector:
    """Projection bound to one original motion; reuses its angle-space view.

    The attack projects against the same original motion hundreds of times,
    so the original's inverse kinematics and acceleration target are computed
    once here.
    """

    def __init__(self, original: Motion, sk: Skeleton, cfg: ProjectionConfig):
        self.sk = sk
        self.cfg = cfg
        self.original = original
        n = original.num_frames
        theta_ref = inverse_kinematics(original, sk).angles
        self._accel_target = second_difference(theta_ref, 1.0)
        self._lo = np.tile(sk.angle_lo.reshape(1, -1), (n, 1))
        self._hi = np.tile(sk.angle_hi.reshape(1, -1), (n, 1))
        self._warm: np.ndarray | None = None

    def project(self, perturbed: Motion, trace_path: str | Path | None = None) -> Motion:
        if perturbed.frames.shape != self.original.frames.shape:
            raise ShapeMismatchError("perturbed motion shape differs from the original")
        sk, cfg = self.sk, self.cfg
        tilde = inverse_kinematics(perturbed, sk)
        # successive projections within one attack solve nearby problems, so
        # the previous solution is a good start when it beats clip(target)
        start = tilde.angles
        if self._warm is not None:
            f_warm = _objective_value(self._warm, tilde.angles, self._accel_target, cfg.w)
            clipped = np.clip(tilde.angles, self._lo, self._hi)
            if f_warm < _objective_value(clipped, tilde.angles, self._accel_target, cfg.w):
                start = self._warm
        theta, trace = solve_box_quadratic(
            start, tilde.angles, self._accel_target, self._lo, self._hi, cfg
        )
        self._warm = theta
        if not trace.converged:
            log.warning(
                "projection solver stopped at %d iterations with residual %.3e",
                cfg.max_solver_iters, trace.rows[-1][2],
            )
        if trace_path is not None:
            trace.write_csv(trace_path)

        # The solved angles are in the box, but clipping Euler components can
        # inject twist, and the zero-twist reading of a twisted rotation may
        # leave the box again. canonical_clamp removes the twist per joint and
        # pulls any escaping bone image back until its reading fits, so the
        # output's angle reading is in-limit exactly.
        n = perturbed.num_frames
        clamped = canonical_clamp(theta.reshape(n, sk.num_joints, 3), sk)
        return forward_kinematics(
            AngleMotion(
                skeleton=sk,
                root_positions=tilde.root_positions,
                angles=wrap_angle(clamped.reshape(n, -1)),
                frame_dt=perturbed.frame_dt,
            ),
            sk,
        )


def project_to_manifold(
    xt: Motion,
    x: Motion,
    sk: Skeleton,
    cfg: ProjectionConfig,
    trace_path: str | Path | None = None,
) -> Motion:
    """Project a perturbed motion onto the pose manifold of the original.

    Bone lengths are restored exactly by the IK/FK pass; joint angles are kept
    as close as possible to the perturbed motion's, subject to the limits,
    while matching the original motion's angular acceleration with weight w.
    The root trajectory of ``xt`` passes through unmodified. The adversarial
    property is NOT enforced here; the attack driver restores it by probing.
    """
    return ManifoldProjector(x, sk, cfg).project(xt, trace_path=trace_path)
