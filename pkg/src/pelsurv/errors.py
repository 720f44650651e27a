"""Exception hierarchy.

Data problems (bad files, impossible samples) are kept distinct from
estimation problems (optimizer failures, empty donor cells) so callers
can map them to different exit codes.
"""

from __future__ import annotations


class PelsurvError(Exception):
    """Base class for all library errors."""


class DataError(PelsurvError):
    """Invalid input data or metadata."""


class ParseError(DataError):
    """Malformed CSV/JSON input (wrong arity, bad numbers, unknown labels)."""


class NoRespondentsError(DataError):
    """A stratum contains sampled units but no respondents.

    Deliberately distinct from ParseError: the file is well formed, the
    sample just cannot support estimation.
    """

    def __init__(self, stratum: int):
        self.stratum = stratum
        super().__init__(f"no respondents in stratum {stratum}")


class EstimationError(PelsurvError):
    """Estimation could not be carried out on valid data."""


class NonpositiveDenominator(EstimationError):
    """A likelihood-mass denominator was <= 0 at the requested parameters.

    Signals parameters outside the admissible region; the optimizer treats
    the same condition as a rejected objective value instead of an error.
    """

    def __init__(self, stratum: int, unit: int):
        self.stratum = stratum
        self.unit = unit
        super().__init__(
            f"nonpositive mass denominator for respondent {unit} in stratum {stratum}"
        )


class InitialPointRejected(EstimationError):
    """The search could not find an admissible starting point."""


class EmptyRespondentCell(EstimationError):
    """A cell-level estimator needed respondents in a cell that has none."""

    def __init__(self, stratum: int, category: str):
        self.stratum = stratum
        self.category = category
        super().__init__(
            f"no respondents in cell (stratum {stratum}, category {category})"
        )


class ZeroMassError(EstimationError):
    """A weighted mean was requested but the total mass is zero."""
