"""Exception types shared across the package."""


class MTLError(Exception):
    """Base class for all library errors."""


class NonFiniteError(MTLError, ArithmeticError):
    """A computation overflowed or produced NaN."""


class RadiusError(MTLError, ValueError):
    """An argument lies outside a declared radius of convergence."""


class DegreeError(MTLError, ValueError):
    """A polynomial degree exceeds a declared or configured cap."""


class KernelError(MTLError, ValueError):
    """Bad kernel input, or a Gram system that stays singular after jitter."""


class DivergenceError(MTLError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch, loss):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class ProgramSyntaxError(MTLError, ValueError):
    """Malformed program text; carries the character offset of the problem."""

    def __init__(self, message, pos=None):
        where = f" at offset {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")
        self.pos = pos


class UndefinedRegionError(MTLError, ValueError):
    """Input falls inside a margin band or outside every cluster ball."""


class GeneratorError(MTLError, ValueError):
    """A dataset generator cannot satisfy its constraints."""
