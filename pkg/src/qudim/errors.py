"""Exception types shared across the package."""


class QudimError(Exception):
    """Base class for every package-specific error."""


class InvalidInput(QudimError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateGroundState(QudimError):
    """The error Hamiltonian has a (near-)degenerate ground state at the
    requested point, so the quantum metric is not defined there."""


class DegenerateBatch(QudimError):
    """Every point in a gradient batch has a degenerate ground state."""


class TrainingDiverged(QudimError):
    """The training loss became non-finite.

    Carries the last configuration and report observed with a finite loss.
    """

    def __init__(self, message, config=None, report=None):
        super().__init__(message)
        self.config = config
        self.report = report


class NoGap(QudimError):
    """All metric eigenvalues sit below the numerical floor; there is no
    spectral gap to locate."""


class EstimationFailed(QudimError):
    """Every data point was skipped; no local estimates to aggregate."""


class ParseError(QudimError, ValueError):
    """Tabular input could not be parsed. Carries 1-based row/column context
    when available."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
