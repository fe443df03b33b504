"""The guided manifold walk: a hard-label boundary attack that keeps its
iterates on the natural pose manifold.

One iteration runs three sub-routines, each gated by the hard-label oracle:

* random exploration: an orthogonal-to-target random step of scale lambda,
  retried with lambda halved until the result stays adversarial;
* aimed probing: linear interpolation toward the attacked motion with step
  beta, retried with beta halved likewise;
* manifold projection: bone lengths and joint limits restored in angle space;
  if the projected motion loses adversarialness it is pulled back toward the
  last adversarial iterate until the oracle flips again.

Both step scales grow on success (capped at 1) and the walk stops when either
scale underflows its floor, the iteration cap is reached, the query budget is
exhausted, or the distance to the attacked motion drops below epsilon. The
current iterate is adversarial at every point after initialization, so every
stop reason still yields a valid attack.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import ClassifierGateway, Label
from .errors import BudgetExhaustedError, GmwalkError, InitializationError, ShapeMismatchError
from .manifold import ManifoldProjector, ProjectionConfig, check_on_manifold
from .motion import Motion, motion_distance
from .skeleton import Skeleton

# bisection steps resolving the largest adversarial interpolation toward the
# target during initialization; a coarse resolution is deliberate, leaving the
# starting point a healthy margin inside the adversarial region instead of
# pinning it onto the decision boundary
INIT_PROBE_BISECTIONS = 4

# cap on post-projection pulls back toward the adversarial iterate; the pull
# sequence converges to that iterate, so the cap only guards fp stagnation
MAX_MP_PULLS = 64

# repeated-projection passes applied to initialization candidates: projection
# is a proximal step toward the original's angular acceleration, so iterating
# it settles onto the fully dynamics-matched pose, leaving the walk free of a
# standing correction that every later projection would re-apply
INIT_SETTLE_PASSES = 10

DEFAULT_SPINE_NAMES = ("hips", "spine", "chest", "neck", "head")


@dataclass(frozen=True)
class AttackConfig:
    """Tunables of the walk.

    Step scales adapt geometrically: halved while candidates fail, grown x1.5
    on success up to their caps. The exploration cap defaults deliberately
    small: every orthogonal step inflates the distance by sqrt(1 + lambda^2)
    and its off-manifold component must stay below the projection-acceptance
    margin, which scales with lambda itself; large caps make the walk diverge.
    The dynamics weight is likewise small by default: the projection's pull
    toward the original's angular acceleration is a standing correction that
    must fit inside the same margin. Epsilon defaults to a scale-aware
    0.01 x mean bone length x sqrt(joint count) when unset."""

    mode: str = "untargeted"  # "untargeted" | "targeted"
    target_class: int | None = None
    max_iters: int = 500
    epsilon: float | None = None  # None: resolved from the skeleton
    lambda_init: float = 0.01
    beta_init: float = 0.1
    lambda_floor: float = 1e-10
    beta_floor: float = 1e-10
    adapt_up: float = 1.5
    adapt_down: float = 0.5
    lambda_cap: float = 0.01
    beta_cap: float = 1.0
    joint_weights: tuple[float, ...] | None = None  # per joint; None: from spine list
    spine_joint_names: tuple[str, ...] = DEFAULT_SPINE_NAMES
    spine_weight: float = 0.3
    manifold_projection: bool = True
    w: float = 0.02  # dynamics weight handed to the projection
    rng_seed: int = 0
    query_budget: int | None = 1_000_000

    def __post_init__(self):
        if self.mode not in ("untargeted", "targeted"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "targeted" and self.target_class is None:
            raise ValueError("targeted mode needs target_class")
        if not 0.0 < self.adapt_down < 1.0 < self.adapt_up:
            raise ValueError("need 0 < adapt_down < 1 < adapt_up")
        for name in ("lambda_init", "beta_init"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.lambda_floor <= 0.0 or self.beta_floor <= 0.0:
            raise ValueError("floors must be positive")
        for name in ("lambda_cap", "beta_cap"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        if self.joint_weights is not None and any(w < 0.0 for w in self.joint_weights):
            raise ValueError("joint weights must be non-negative")
        if self.w < 0.0:
            raise ValueError("w must be non-negative")

    def resolve_epsilon(self, sk: Skeleton) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return 0.01 * sk.mean_bone_length * float(np.sqrt(sk.num_joints))

    def resolve_joint_weights(self, sk: Skeleton) -> np.ndarray:
        if self.joint_weights is not None:
            if len(self.joint_weights) != sk.num_joints:
                raise ShapeMismatchError(
                    f"{len(self.joint_weights)} joint weights for {sk.num_joints} joints"
                )
            return np.asarray(self.joint_weights, dtype=float)
        spine = set(self.spine_joint_names)
        return np.array(
            [self.spine_weight if j.name in spine else 1.0 for j in sk.joints],
            dtype=float,
        )

    def projection_config(self) -> ProjectionConfig:
        return ProjectionConfig(w=self.w)


@dataclass
class AttackState:
    current: Motion  # always adversarial
    lambda_: float
    beta: float
    iteration: int
    queries_used: int
    rng: np.random.Generator


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    phase: str
    lambda_: float
    beta: float
    l: float
    adversarial: bool
    queries_cumulative: int


# phases that correspond to exactly one classifier invocation
QUERY_PHASES = frozenset(
    {"orig_label", "init_pool", "init_probe", "explore", "probe", "mp_check", "mp_pull"}
)
ACCEPT_PHASES = frozenset({"init_accept", "accept_explore", "accept_probe", "accept_mp"})

TRACE_COLUMNS = ("iteration", "phase", "lambda", "beta", "l", "adversarial", "queries_cumulative")


def write_trace_csv(trace: Sequence[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow(
                (
                    row.iteration,
                    row.phase,
                    repr(row.lambda_),
                    repr(row.beta),
                    repr(row.l),
                    "true" if row.adversarial else "false",
                    row.queries_cumulative,
                )
            )


@dataclass(frozen=True)
class AttackResult:
    adversarial: Motion
    success: bool
    status: str  # converged_epsilon | lambda_floor | beta_floor | max_iters | budget_exhausted
    queries: int
    final_l: float
    initial_l: float
    original_label: Label
    trace: tuple[TraceRow, ...]

    def write_trace(self, path: str | Path) -> None:
        write_trace_csv(self.trace, path)


def _passes_manifold_check(mo: Motion, sk: Skeleton, cfg: ProjectionConfig) -> bool:
    try:
        return check_on_manifold(mo, sk, cfg).on_manifold
    except GmwalkError:
        return False


def adversarial_predicate(label: Label, cfg: AttackConfig, original_label: Label) -> bool:
    if cfg.mode == "targeted":
        return label == cfg.target_class
    return label != original_label


def random_exploration(
    x_adv: Motion,
    x: Motion,
    lambda_: float,
    joint_weights: np.ndarray,
    rng: np.random.Generator,
) -> Motion:
    """Random step orthogonal to the direction toward the attacked motion.

    Each coordinate axis is treated as one flattened slice of length
    frames x joints: a unit Gaussian direction is scaled by lambda and the
    slice's distance to the target, then its component along the target
    direction is removed. The joint weight matrix scales the per-joint rows of
    the final update.
    """
    diff = x.frames - x_adv.frames  # points from x' toward x
    if not np.any(diff):
        raise ValueError("exploration undefined: adversarial sample equals the target")
    n, num_joints = diff.shape[:2]
    delta = np.empty_like(diff)
    for axis in range(3):
        slice_ = diff[:, :, axis].ravel()
        r = rng.standard_normal(slice_.size)
        norm = float(np.linalg.norm(slice_))
        if norm == 0.0:
            delta[:, :, axis] = 0.0
            continue
        d = slice_ / norm
        step = lambda_ * (r / np.linalg.norm(r)) * norm
        step -= np.dot(step, d) * d
        delta[:, :, axis] = step.reshape(n, num_joints)
    weights = np.asarray(joint_weights, dtype=float)
    return x_adv.with_frames(x_adv.frames + delta * weights[None, :, None])


def aimed_probing(x_adv: Motion, target: Motion, beta: float) -> Motion:
    """Linear interpolation x' + beta (target - x')."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if x_adv.frames.shape != target.frames.shape:
        raise ShapeMismatchError("probing endpoints have different shapes")
    return x_adv.with_frames(x_adv.frames + beta * (target.frames - x_adv.frames))


class _GmwRun:
    """Mutable state of one attack execution (trace, counters, step scales)."""

    def __init__(
        self,
        x: Motion,
        sk: Skeleton,
        cfg: AttackConfig,
        gateway: ClassifierGateway,
        rng: np.random.Generator | None = None,
    ):
        self.x = x
        self.sk = sk
        self.cfg = cfg
        self.gateway = gateway
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(cfg.rng_seed))
        self.trace: list[TraceRow] = []
        self.queries = 0
        self.lambda_ = cfg.lambda_init
        self.beta = cfg.beta_init
        self.iteration = 0
        self.weights = cfg.resolve_joint_weights(sk)
        self.original_label: Label | None = None

    def record(self, phase: str, l: float, adversarial: bool) -> None:
        self.trace.append(
            TraceRow(self.iteration, phase, self.lambda_, self.beta, l, adversarial, self.queries)
        )

    def query(self, mo: Motion, phase: str) -> bool:
        label = self.gateway.classify(mo, phase)
        self.queries += 1
        adv = adversarial_predicate(label, self.cfg, self.original_label)
        self.record(phase, motion_distance(mo, self.x), adv)
        return adv

    def fetch_original_label(self) -> Label:
        label = self.gateway.classify(self.x, "orig_label")
        self.queries += 1
        self.original_label = label
        self.record("orig_label", 0.0, False)
        if self.cfg.mode == "targeted" and self.cfg.target_class == label:
            raise InitializationError(
                f"target class {self.cfg.target_class} equals the motion's own label"
            )
        return label

    def initialize(self, pool: Sequence[Motion], projector: ManifoldProjector | None = None) -> Motion:
        if self.original_label is None:
            self.fetch_original_label()
        qualifying = [mo for mo in pool if self.query(mo, "init_pool")]
        if not qualifying:
            raise InitializationError(
                "no pool motion satisfies the adversarial predicate "
                f"(mode={self.cfg.mode}, target={self.cfg.target_class})"
            )
        seed = qualifying[int(self.rng.integers(len(qualifying)))]

        # Largest interpolation toward x that stays adversarial. With manifold
        # projection on, candidates are projected before querying, so the walk
        # starts on the manifold instead of carrying the blend's bone-length
        # debt, which later projections could not shed without losing
        # adversarialness.
        def candidate(beta: float) -> Motion:
            blend = aimed_probing(seed, self.x, beta)
            if projector is None:
                return blend
            for _ in range(INIT_SETTLE_PASSES):
                settled = projector.project(blend)
                if float(np.abs(settled.frames - blend.frames).max()) < 1e-9:
                    break
                blend = settled
            return blend

        lo, hi = 0.0, 1.0
        best = None
        for _ in range(INIT_PROBE_BISECTIONS):
            mid = 0.5 * (lo + hi)
            probe = candidate(mid)
            if self.query(probe, "init_probe"):
                lo, best = mid, probe
            else:
                hi = mid
        if best is None:
            start = candidate(0.0)
            if projector is not None and not self.query(start, "init_probe"):
                start = seed  # projecting the seed itself flipped it; fall back
        else:
            start = best
        self.record("init_accept", motion_distance(start, self.x), True)
        return start

    def explore_step(self, current: Motion) -> Motion | None:
        """Adversarial exploration candidate, or None when lambda underflows."""
        while True:
            candidate = random_exploration(current, self.x, self.lambda_, self.weights, self.rng)
            if self.query(candidate, "explore"):
                self.lambda_ = min(self.cfg.lambda_cap, self.lambda_ * self.cfg.adapt_up)
                self.record("accept_explore", motion_distance(candidate, self.x), True)
                return candidate
            self.lambda_ *= self.cfg.adapt_down
            if self.lambda_ < self.cfg.lambda_floor:
                return None

    def probe_step(self, current: Motion) -> Motion | None:
        """Adversarial probing candidate, or None when beta underflows."""
        while True:
            candidate = aimed_probing(current, self.x, self.beta)
            if self.query(candidate, "probe"):
                self.beta = min(self.cfg.beta_cap, self.beta * self.cfg.adapt_up)
                self.record("accept_probe", motion_distance(candidate, self.x), True)
                return candidate
            self.beta *= self.cfg.adapt_down
            if self.beta < self.cfg.beta_floor:
                return None

    def mp_step(self, current: Motion, projector: ManifoldProjector) -> tuple[Motion, bool]:
        """Projected motion, retreated toward `current` until adversarial.

        Returns the accepted motion and whether the full projection survived
        as-is (an exactly on-manifold state). On rejection the retreat
        interpolates in joint-angle space, the representation the projection
        itself works in: every retreat candidate is then a forward-kinematics
        pose with exact bone lengths, so partial retreats do not re-introduce
        the violations the projection just removed. The retreat fraction is at
        least 1/2 regardless of how small the probing step scale has become,
        so the sequence closes in on (the bone-exact reading of) `current`
        within the pull cap; if even that is not adversarial, the walk falls
        back to `current` itself, which is.
        """
        xhat = projector.project(current)
        if self.query(xhat, "mp_check"):
            return xhat, True

        from .kinematics import forward_kinematics, inverse_kinematics
        from .rotations import wrap_angle

        proj_angles = inverse_kinematics(xhat, self.sk)
        cur_angles = inverse_kinematics(current, self.sk)
        swing = wrap_angle(cur_angles.angles - proj_angles.angles)
        pull = max(self.beta, 0.5)
        t = 0.0
        for _ in range(MAX_MP_PULLS):
            t += pull * (1.0 - t)
            candidate = forward_kinematics(
                type(proj_angles)(
                    skeleton=self.sk,
                    root_positions=cur_angles.root_positions,
                    angles=wrap_angle(proj_angles.angles + t * swing),
                    frame_dt=current.frame_dt,
                ),
                self.sk,
            )
            if self.query(candidate, "mp_pull"):
                return candidate, False
        return current, False

    def state(self, current: Motion) -> AttackState:
        return AttackState(
            current=current,
            lambda_=self.lambda_,
            beta=self.beta,
            iteration=self.iteration,
            queries_used=self.queries,
            rng=self.rng,
        )


def initialize(
    x: Motion,
    pool: Sequence[Motion],
    cfg: AttackConfig,
    classifier: ClassifierGateway,
    rng: np.random.Generator | None = None,
    original_label: Label | None = None,
) -> AttackState:
    """Adversarial starting state: a verified pool seed probed toward x.

    Pool labels are never trusted; every member is re-queried. ``original_label``
    may be passed when classify(x) is already known, saving one query.
    """
    run = _GmwRun(x, x.skeleton, cfg, classifier, rng=rng)
    if original_label is not None:
        run.original_label = original_label
    start = run.initialize(pool)
    return run.state(start)


def gmw_attack(
    x: Motion,
    pool: Sequence[Motion],
    sk: Skeleton,
    cfg: AttackConfig,
    classifier: ClassifierGateway,
) -> AttackResult:
    """Run the full walk against a hard-label classifier gateway.

    The returned motion is adversarial for every stop status; `status` records
    why the walk ended. Initialization failures (empty qualifying pool, budget
    exhausted before an adversarial iterate exists) raise instead.
    """
    run = _GmwRun(x, sk, cfg, classifier)
    original_label = run.fetch_original_label()
    projector = (
        ManifoldProjector(x, sk, cfg.projection_config()) if cfg.manifold_projection else None
    )
    current = run.initialize(pool, projector=projector)
    initial_l = motion_distance(current, x)
    epsilon = cfg.resolve_epsilon(sk)

    # `settled` is the best state to stand on when the walk ends: with
    # projection on, the last iterate whose full projection was accepted
    # outright (exactly on-manifold; the projected initial state qualifies),
    # otherwise simply the state of the last completed iteration. Ending on a
    # partially pulled-back or mid-iteration state would hand back the knife-
    # edge boundary hug the walk degenerates into once its step scales
    # underflow.
    settled = current
    status = "max_iters"
    try:
        for k in range(1, cfg.max_iters + 1):
            run.iteration = k

            candidate = run.explore_step(current)
            if candidate is None:
                status = "lambda_floor"
                break
            current = candidate

            candidate = run.probe_step(current)
            if candidate is None:
                status = "beta_floor"
                break
            current = candidate

            if projector is not None:
                xhat, on_manifold = run.mp_step(current, projector)
            else:
                xhat, on_manifold = current, True

            if motion_distance(xhat, x) >= epsilon:
                current = xhat
                if projector is not None:
                    run.record("accept_mp", motion_distance(current, x), True)
                    if not on_manifold:
                        # partially pulled-back states still count as settled
                        # when the un-recovered residue is below the manifold
                        # tolerances
                        on_manifold = _passes_manifold_check(current, sk, projector.cfg)
                if on_manifold:
                    settled = current
            else:
                status = "converged_epsilon"
                break
    except BudgetExhaustedError:
        status = "budget_exhausted"
    current = settled

    return AttackResult(
        adversarial=current,
        success=True,
        status=status,
        queries=run.queries,
        final_l=motion_distance(current, x),
        initial_l=initial_l,
        original_label=original_label,
        trace=tuple(run.trace),
    )
