"""Hard-label black-box adversarial attacks on skeletal action recognizers.

The walk explores around the decision boundary, probes toward the attacked
motion, and projects its iterates back onto the natural pose manifold (exact
bone lengths, joint angles within limits, dynamics matched), so the resulting
adversarial motions remain kinematically plausible.
"""

__version__ = "0.1.0"

from .attack import (
    AttackConfig,
    AttackResult,
    AttackState,
    TraceRow,
    adversarial_predicate,
    aimed_probing,
    gmw_attack,
    initialize,
    random_exploration,
    write_trace_csv,
)
from .classifier import (
    CentroidModel,
    ClassifierGateway,
    FeatureSpec,
    QueryLedger,
    centroid_classify,
    centroid_gateway,
    train_centroid,
)
from .errors import (
    BudgetExhaustedError,
    DegenerateBoneError,
    GmwalkError,
    InitializationError,
    MotionFormatError,
    ProtocolError,
    ShapeMismatchError,
    SkeletonError,
    TransportError,
)
from .kinematics import canonical_clamp, forward_kinematics, inverse_kinematics
from .manifold import (
    ManifoldProjector,
    ManifoldReport,
    ProjectionConfig,
    check_on_manifold,
    project_to_manifold,
)
from .metrics import MetricsReport, compute_metrics, format_report_row
from .motion import AngleMotion, Motion, motion_distance, second_difference
from .motion_io import load_motion, save_motion
from .skeleton import JointSpec, Skeleton
from .synthetic import generate_dataset, humanoid_skeleton
from .wire import RemoteClassifier, remote_classify, remote_gateway

__all__ = [
    "AngleMotion",
    "AttackConfig",
    "AttackResult",
    "AttackState",
    "BudgetExhaustedError",
    "CentroidModel",
    "ClassifierGateway",
    "DegenerateBoneError",
    "FeatureSpec",
    "GmwalkError",
    "InitializationError",
    "JointSpec",
    "ManifoldProjector",
    "ManifoldReport",
    "MetricsReport",
    "Motion",
    "MotionFormatError",
    "ProjectionConfig",
    "ProtocolError",
    "QueryLedger",
    "RemoteClassifier",
    "ShapeMismatchError",
    "Skeleton",
    "SkeletonError",
    "TraceRow",
    "TransportError",
    "adversarial_predicate",
    "aimed_probing",
    "canonical_clamp",
    "centroid_classify",
    "centroid_gateway",
    "check_on_manifold",
    "compute_metrics",
    "format_report_row",
    "forward_kinematics",
    "generate_dataset",
    "gmw_attack",
    "humanoid_skeleton",
    "initialize",
    "inverse_kinematics",
    "load_motion",
    "motion_distance",
    "project_to_manifold",
    "random_exploration",
    "remote_classify",
    "remote_gateway",
    "save_motion",
    "second_difference",
    "train_centroid",
    "write_trace_csv",
]
