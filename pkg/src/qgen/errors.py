"""Exception hierarchy shared by every qgen module."""


class QGenError(ValueError):
    """Base class for all qgen errors."""


class DimensionMismatch(QGenError):
    pass


class UnnormalizedState(QGenError):
    pass


class NonUnitary(QGenError):
    pass


class IncompletePartition(QGenError):
    pass


class TooLong(QGenError):
    """Requested table would exceed the configured enumeration cap."""


class InvalidSpec(QGenError):
    pass


class VerificationFailed(QGenError):
    def __init__(self, quantity: str, value: float, tolerance: float):
        super().__init__(f"{quantity} = {value:.3e} exceeds tolerance {tolerance:.1e}")
        self.quantity = quantity
        self.value = value
        self.tolerance = tolerance


class ZeroProbabilityPath(QGenError):
    pass


class BadWires(QGenError):
    pass


class EnumerationTooLarge(QGenError):
    pass


class BadClamp(QGenError):
    pass


class InfiniteDivergence(QGenError):
    """KL(P||Q) is infinite: Q vanishes somewhere on the support of P."""


class Underflow(QGenError):
    pass


class EmptyNet(QGenError):
    pass


class EmptySamples(QGenError):
    pass


class BadEta(QGenError):
    pass


class TooLarge(QGenError):
    pass
