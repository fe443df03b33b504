"""Hard-label query oracle: ledger-counted gateway plus a built-in
nearest-centroid classifier.

The gateway is the only place the attack touches a model. It validates the
motion shape, enforces the query budget, counts every query per phase, and
returns nothing but an integer class label: scores, logits and gradients never
cross this boundary.

The built-in model is a nearest-centroid classifier over z-normalized,
downsampled joint trajectories plus their first differences. It is
deterministic, cheap enough to query millions of times, and still has the
curved decision boundaries a boundary-walking attack needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExhaustedError, ShapeMismatchError
from .motion import Motion

Label = int

MODEL_FORMAT = "gmwalk-centroid-model@1"


@dataclass
class QueryLedger:
    """Exact accounting of classifier invocations, optionally budget-capped."""

    budget: int | None = None
    total: int = 0
    per_phase: dict[str, int] = field(default_factory=dict)

    def record(self, phase: str) -> None:
        if self.budget is not None and self.total >= self.budget:
            raise BudgetExhaustedError(
                f"query budget of {self.budget} exhausted (phase {phase!r})"
            )
        self.total += 1
        self.per_phase[phase] = self.per_phase.get(phase, 0) + 1


class ClassifierGateway:
    """Wraps a decision function behind the hard-label query contract.

    decision: callable mapping an (n, O, 3) frame array to an int label.
    Shape checks run before the ledger is touched, so rejected calls are free.
    The optional cache is a debugging aid only: cache hits are not queries and
    do not appear in the ledger.
    """

    def __init__(
        self,
        decision: Callable[[np.ndarray], int],
        num_classes: int,
        num_joints: int,
        expected_frames: int | None = None,
        budget: int | None = None,
        cache: bool = False,
    ):
        self.decision = decision
        self.num_classes = int(num_classes)
        self.num_joints = int(num_joints)
        self.expected_frames = expected_frames
        self.ledger = QueryLedger(budget=budget)
        self._cache: dict[bytes, int] | None = {} if cache else None

    def classify(self, mo: Motion, phase: str = "query") -> Label:
        frames = mo.frames
        if frames.shape[1] != self.num_joints:
            raise ShapeMismatchError(
                f"classifier expects {self.num_joints} joints, motion has {frames.shape[1]}"
            )
        if self.expected_frames is not None and frames.shape[0] != self.expected_frames:
            raise ShapeMismatchError(
                f"classifier expects {self.expected_frames} frames, motion has {frames.shape[0]}"
            )
        if self._cache is not None:
            key = frames.tobytes()
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        self.ledger.record(phase)
        label = int(self.decision(frames))
        if self._cache is not None:
            self._cache[key] = label
        return label


@dataclass(frozen=True)
class FeatureSpec:
    """Downsampling and channel selection for the built-in classifier.

    sigma_floor_frac bounds the per-dimension normalization: dimensions whose
    training std falls below this fraction of the median std are normalized
    by the floored value instead. Without it, channels that barely move in
    the training data get enormous weights and dominate the metric with
    measurement-noise-scale differences.
    """

    num_frames: int = 16
    include_positions: bool = True
    include_velocity: bool = True
    sigma_floor_frac: float = 0.25

    def __post_init__(self):
        if self.num_frames < 2:
            raise ValueError("feature downsampling needs at least 2 frames")
        if not (self.include_positions or self.include_velocity):
            raise ValueError("at least one feature channel must be enabled")
        if not 0.0 <= self.sigma_floor_frac <= 1.0:
            raise ValueError("sigma_floor_frac must be in [0, 1]")

    def frame_indices(self, n: int) -> np.ndarray:
        return np.round(np.linspace(0.0, n - 1, self.num_frames)).astype(int)

    def raw_features(self, frames: np.ndarray) -> np.ndarray:
        sampled = frames[self.frame_indices(frames.shape[0])]
        parts = []
        if self.include_positions:
            parts.append(sampled.ravel())
        if self.include_velocity:
            parts.append(np.diff(sampled, axis=0).ravel())
        return np.concatenate(parts)


@dataclass(frozen=True)
class CentroidModel:
    """Per-class feature centroids with the normalization of the training set."""

    feature_spec: FeatureSpec
    num_joints: int
    mu: np.ndarray
    sigma: np.ndarray
    centroids: np.ndarray  # (num_classes, dim), row index == class id

    def __post_init__(self):
        for name in ("mu", "sigma", "centroids"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.centroids.ndim != 2 or self.centroids.shape[1] != self.mu.shape[0]:
            raise ShapeMismatchError("centroid / normalization dimensions disagree")

    @property
    def num_classes(self) -> int:
        return self.centroids.shape[0]

    def features(self, frames: np.ndarray) -> np.ndarray:
        raw = self.feature_spec.raw_features(frames)
        if raw.shape[0] != self.mu.shape[0]:
            raise ShapeMismatchError(
                f"feature dimension {raw.shape[0]} does not match model ({self.mu.shape[0]})"
            )
        return (raw - self.mu) / self.sigma

    def decide(self, frames: np.ndarray) -> Label:
        z = self.features(frames)
        dists = np.sum((self.centroids - z[None, :]) ** 2, axis=1)
        return int(np.argmin(dists))  # argmin takes the lowest class id on ties

    def save(self, path: str | Path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "feature_spec": {
                "num_frames": self.feature_spec.num_frames,
                "include_positions": self.feature_spec.include_positions,
                "include_velocity": self.feature_spec.include_velocity,
                "sigma_floor_frac": self.feature_spec.sigma_floor_frac,
            },
            "num_joints": self.num_joints,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "centroids": self.centroids.tolist(),
        }
        Path(path).write_text(json.dumps(doc, allow_nan=False, separators=(",", ":")))

    @classmethod
    def load(cls, path: str | Path) -> "CentroidModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a centroid model file")
        spec = FeatureSpec(**doc["feature_spec"])
        return cls(
            feature_spec=spec,
            num_joints=int(doc["num_joints"]),
            mu=np.asarray(doc["mu"]),
            sigma=np.asarray(doc["sigma"]),
            centroids=np.asarray(doc["centroids"]),
        )


def train_centroid(
    dataset: Sequence[tuple[Motion, Label]],
    feature_spec: FeatureSpec = FeatureSpec(),
) -> CentroidModel:
    """Fit per-class feature means with per-dimension z-normalization.

    Needs at least two classes with one sample each. Class ids must be dense
    in [0, k). Means commute, so sample order does not matter beyond float
    rounding.
    """
    if not dataset:
        raise ValueError("empty training set")
    labels = np.array([label for _, label in dataset], dtype=int)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("training set must contain at least two classes")
    if classes[0] != 0 or classes[-1] != classes.size - 1:
        raise ValueError("class ids must be dense in [0, k)")

    num_joints = dataset[0][0].num_joints
    raw = np.stack([feature_spec.raw_features(mo.frames) for mo, _ in dataset])
    mu = raw.mean(axis=0)
    sigma = raw.std(axis=0)
    floor = feature_spec.sigma_floor_frac * float(np.median(sigma))
    sigma = np.maximum(sigma, max(floor, 1e-8))
    normalized = (raw - mu) / sigma
    centroids = np.stack([normalized[labels == c].mean(axis=0) for c in classes])
    return CentroidModel(
        feature_spec=feature_spec,
        num_joints=num_joints,
        mu=mu,
        sigma=sigma,
        centroids=centroids,
    )


def centroid_classify(model: CentroidModel, mo: Motion) -> Label:
    """Nearest centroid by Euclidean distance; ties break to the lowest id."""
    return model.decide(mo.frames)


def centroid_gateway(model: CentroidModel, budget: int | None = None,
                     cache: bool = False) -> ClassifierGateway:
    return ClassifierGateway(
        decision=model.decide,
        num_classes=model.num_classes,
        num_joints=model.num_joints,
        budget=budget,
        cache=cache,
    )
