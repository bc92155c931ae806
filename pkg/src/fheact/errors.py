"""Exception hierarchy shared across the emulator."""


class FheactError(Exception):
    """Base class for all library errors."""


class CapacityError(FheactError):
    """More values than the parameter set has slots for (or zero values)."""


class ParamsMismatch(FheactError):
    """Two ciphertexts created under different parameter sets were combined."""


class ShapeMismatch(FheactError):
    """Operand lengths or tensor shapes disagree."""


class DepthExhausted(FheactError):
    """A multiplication was attempted on a ciphertext at level 0.

    Signals that the bootstrap planner must insert a refresh before this op.
    """


class UnschedulableLayer(FheactError):
    """A single layer needs more depth than a fresh bootstrap provides."""


class WeightFormatError(FheactError):
    """A weight CSV file is missing, malformed, or has the wrong shape."""


class ConfigError(FheactError):
    """Invalid run configuration or network description."""
