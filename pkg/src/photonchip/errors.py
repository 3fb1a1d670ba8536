"""Exception types raised across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant."""


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given data (e.g. zero mean photon number)."""


class OutOfModelError(ValueError):
    """A value falls outside the domain of the physical model it is mapped through."""


class CutoffError(RuntimeError):
    """The requested photon-number cutoff is too small or too large for the computation."""


class FitError(RuntimeError):
    """A least-squares fit could not be carried out."""


class UnencodableGraphError(ValueError):
    """A graph has adjacency eigenvalues outside the open interval (-1, 1)."""
