"""Exception hierarchy shared by every module of the package."""


class BBMError(Exception):
    """Base class for all package errors."""


class EmptyMeasure(BBMError):
    """An operation that needs a nonzero point measure received the empty one."""


class NonIntegrable(BBMError):
    """An intensity has infinite (or uncomputable) mass over the sampling window."""


class Overflow(BBMError):
    """A lattice multiplicity exceeds the supported integer range."""


class ParticleBudgetExceeded(BBMError):
    """A branching simulation produced more particles than ``step_cap``."""


class CulledBiasTooLarge(BBMError):
    """Barrier culling may have biased the derivative martingale beyond tolerance."""


class DegenerateZ(BBMError):
    """The derivative martingale is non-positive, so log(Z_t) is undefined."""


class GridTooNarrow(BBMError):
    """The FKPP grid does not cover the region the computation needs."""


class FrontLost(BBMError):
    """The FKPP solution never crosses 1/2 on the grid."""


class OutOfValidityWindow(BBMError):
    """Parameters lie outside the window where Bramson's psi bound applies."""


class SingularLog(BBMError):
    """log(1 - u) is singular because u reached 1 at an atom."""


class EmptyTail(BBMError):
    """A tail count needed by the shift estimator vanished."""


class Divergent(BBMError):
    """A Laplace-Stieltjes transform is infinite."""


class DescriptorMismatch(BBMError):
    """A realization was sampled from a different intensity than the one supplied."""


class InsufficientReplicates(BBMError):
    """A statistical test received fewer samples than it requires."""


class ConfigError(BBMError):
    """A run configuration failed validation."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
