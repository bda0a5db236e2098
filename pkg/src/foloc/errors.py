"""Exception types shared across the package."""


class FolocError(Exception):
    """Base class for all errors raised by this package."""


class CaseParseError(FolocError):
    """A case/scenario file could not be parsed (bad JSON or bad schema)."""


class CaseValidationError(FolocError):
    """A parsed case violates a structural invariant (named in the message)."""


class SimulationError(FolocError):
    """Invalid simulation request (Nyquist violation, non-integral sample count, ...)."""


class IdentificationError(FolocError):
    """Parameter identification failed (insufficient excitation, non-physical estimate)."""


class LocalizationError(FolocError):
    """Invalid localization request (empty bin range, empty candidate set, ...)."""


class TrajectoryIOError(FolocError):
    """Trajectory file could not be read or written (schema mismatch, bad columns)."""
