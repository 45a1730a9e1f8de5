"""Exception types raised across the package."""


class DsvmError(Exception):
    """Base class for all package-specific errors."""


class InvalidEdge(DsvmError):
    """Edge references an out-of-range node or is a self-loop."""


class DisconnectedGraph(DsvmError):
    """Edge set does not connect all nodes."""


class ShapeMismatch(DsvmError):
    """Array shapes are inconsistent with the problem dimensions."""


class ParseError(DsvmError):
    """Dataset file could not be parsed."""


class LabelError(DsvmError):
    """Class label outside {-1, +1}."""


class DimMismatch(DsvmError):
    """Rows of a dataset file have differing feature counts."""


class TooFewSamples(DsvmError):
    """Fewer samples than nodes; every node must own at least one."""


class InvalidParam(DsvmError):
    """Generator or configuration parameter outside its valid range."""


class NegativeState(DsvmError):
    """A projected variable is negative; the integrator contract was violated."""


class NonFiniteState(DsvmError):
    """NaN or infinity encountered while stepping (step size too large)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class OracleScaleExceeded(DsvmError):
    """Dataset larger than the exhaustive solver's sample cap."""


class NoSolution(DsvmError):
    """Exhaustive solver found no feasible candidate (internal error)."""


class EmbedFailure(DsvmError):
    """A reference solution cannot be embedded consistently into the network problem."""


class MissingSnapshots(DsvmError):
    """Operation requires full state snapshots but the trace has none."""


class ConfigError(DsvmError):
    """Run configuration failed validation."""
