"""Typed errors shared across the library.

Guard violations and infeasible inputs raise; definitional violations
(failed stability checks, choice-function property failures) are returned
as data instead, since callers usually want the witnesses.
"""


class TenureMatchError(Exception):
    """Base class for all library errors."""


class UnknownAgent(TenureMatchError):
    """A teacher or school id does not belong to the problem at hand."""


class QuotaExceededByTenure(TenureMatchError):
    """The inherited matching places more teachers at a school than its quota.

    Raised by priority derivation: tenured teachers cannot be ranked into
    a school that cannot hold them.
    """


class SubstitutabilityViolation(TenureMatchError):
    """A reported preference induces a choice function that is not
    path-independent, so the report is inadmissible."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotLexicographicByTenure(TenureMatchError):
    """Cohort-sequential DA requires earlier cohorts to outrank later ones
    at every school; the witness is a (school, earlier, later) triple."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DomainTooLarge(TenureMatchError):
    """An exhaustive enumeration was requested beyond the guard bounds."""


class NotStableInput(TenureMatchError):
    """An operation defined only on dynamically stable matchings received
    an unstable one."""


class InvalidProblem(TenureMatchError):
    """Structurally inconsistent problem data (misaligned rosters, an
    inherited matching over quota, incomplete priorities)."""
