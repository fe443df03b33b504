"""Exception types shared across the package."""


class GmwalkError(Exception):
    """Base class for all package-specific errors."""


class SkeletonError(GmwalkError, ValueError):
    """Invalid skeleton structure (root count, parent order, offsets, limits)."""


class ShapeMismatchError(GmwalkError, ValueError):
    """Array shapes inconsistent with the skeleton or with each other."""


class MotionFormatError(GmwalkError, ValueError):
    """Malformed or invalid motion file."""


class DegenerateBoneError(GmwalkError, ValueError):
    """A near-zero observed bone vector makes the joint rotation undefined."""

    def __init__(self, frame: int, joint: int, joint_name: str, length: float):
        self.frame = frame
        self.joint = joint
        self.joint_name = joint_name
        self.length = length
        super().__init__(
            f"degenerate bone at frame {frame}, joint {joint} ({joint_name!r}): "
            f"length {length:.3e} below threshold"
        )


class InitializationError(GmwalkError, RuntimeError):
    """Attack initialization could not produce an adversarial starting point."""


class BudgetExhaustedError(GmwalkError, RuntimeError):
    """The classifier query budget was exhausted."""


class ProtocolError(GmwalkError, RuntimeError):
    """Remote classifier sent a response that violates the wire protocol."""


class TransportError(GmwalkError, RuntimeError):
    """Remote classifier connection failed (timeout, closed stream, refused)."""
