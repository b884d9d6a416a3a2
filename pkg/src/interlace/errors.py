"""Exception types raised by the toolkit."""


class InterlaceError(Exception):
    """Base class for all toolkit errors."""


class EmptySetError(InterlaceError, ValueError):
    """An operation received an empty site set where a nonempty one is required."""


class NotInSetError(InterlaceError, ValueError):
    """A site was expected to lie inside a given set and does not."""


class OutOfRangeError(InterlaceError, ValueError):
    """A coordinate or parameter lies outside the supported range."""


class UnboundedStopError(InterlaceError, ValueError):
    """A walk stop rule could take infinitely many steps and no cap was given."""


class RangeOverrunError(InterlaceError, RuntimeError):
    """A walk exceeded its step budget before the stop rule fired."""


class KillBudgetError(InterlaceError, ValueError):
    """No kill radius satisfying the requested bias target is affordable."""


class DpBudgetError(InterlaceError, ValueError):
    """Horizon too large for the exact stopped-walk dynamic program."""


class QuadBudgetError(InterlaceError, RuntimeError):
    """Quadrature failed to reach the requested tolerance within budget."""


class SolveFailedError(InterlaceError, RuntimeError):
    """A linear solve did not converge or its residual check failed."""


class NegativeMassError(InterlaceError, RuntimeError):
    """An equilibrium weight came out negative beyond tolerance."""


class EmptyEnsembleError(InterlaceError, ValueError):
    """A statistic was requested over an empty collection of walks."""


class ChainBudgetError(InterlaceError, RuntimeError):
    """Absorbing-chain truncation cannot meet the requested error bound."""


class NotConnectedError(InterlaceError, ValueError):
    """A lower bound that requires a connected set was called on a disconnected one."""


class RayEmptyError(InterlaceError, ValueError):
    """No occupied site found on the scanned ray within the window."""


class SparseRangeError(InterlaceError, RuntimeError):
    """Too few usable site pairs after repeated resampling."""


class SlabBudgetError(InterlaceError, ValueError):
    """Slab geometry exceeds the desk-scale solver or memory budget."""


class ClobberError(InterlaceError, FileExistsError):
    """Refusing to overwrite an existing output without --force."""


class MixedConfigError(InterlaceError, ValueError):
    """Result files with different config hashes cannot be merged."""


class ConfigError(InterlaceError, ValueError):
    """Malformed experiment config (bad line, unknown key, bad value)."""


class FieldFormatError(InterlaceError, ValueError):
    """A serialized occupancy field is corrupt or has an unsupported version."""
