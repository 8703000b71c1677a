"""Error types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """An input violates a documented precondition (e.g. unnormalized target rows)."""


class DegenerateInputError(ValueError):
    """Input is numerically degenerate (zero-norm rows, constant loss arrays, K<2 batches)."""


class ParameterError(ValueError):
    """A hyperparameter is outside its valid range."""


class ConfigError(ValueError):
    """Config file is missing, malformed, or contains unknown keys."""


class IdxParseError(ValueError):
    """An IDX file is corrupted; the message names the byte offset."""


class CheckpointError(ValueError):
    """A checkpoint file is corrupted or has the wrong magic/version."""
