"""Exception hierarchy shared by the analysis, simulation and CLI layers."""


class SnstfError(Exception):
    """Base class for all workbench errors."""

    exit_code = 1


class DomainError(SnstfError, ValueError):
    """An argument lies outside the domain where a formula is defined."""

    exit_code = 4


class UndefinedBoundError(DomainError):
    """A bound cannot be formed, e.g. a zero single-photon yield."""


class IncompleteLedgerError(SnstfError, KeyError):
    """A counts ledger lacks a row needed by the analysis."""

    exit_code = 3

    def __init__(self, row):
        self.row = row
        super().__init__(f"ledger is missing required row {row!r}")

    def __str__(self):
        return self.args[0]


class DegenerateSliceError(DomainError):
    """A phase slice contains no pulse pairs."""


class InsufficientReferenceError(DomainError):
    """Phase-reference window has no counts to normalize."""


class LedgerSchemaError(SnstfError):
    """A ledger file does not follow the documented schema."""

    exit_code = 3


class ConfigError(SnstfError):
    """Run configuration failed validation; ``problems`` lists every issue."""

    exit_code = 6

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class QuadratureError(SnstfError, ArithmeticError):
    """Phase-averaging quadrature failed to converge."""

    exit_code = 5


class PhaseReferenceError(SnstfError):
    """A detection event refers to a window without a phase estimate."""

    exit_code = 4
