"""
Exception hierarchy for panelspectra

Every analytic module raises a subclass of AnalysisError so the pipeline can
attribute failures to the stage that produced them.
"""
from typing import Iterable, Optional


class AnalysisError(Exception):
    """Base class for all panelspectra errors"""


class PanelError(AnalysisError, ValueError):
    """Problems with the input panel"""


class MissingColumn(PanelError):
    def __init__(self, column: str, available: Iterable[str] = ()):
        self.column = column
        self.available = list(available)
        super().__init__(f"Column '{column}' not found (available: {', '.join(self.available)})")


class NonNumericRate(PanelError):
    pass


class NegativeRate(NonNumericRate):
    pass


class DuplicateYearForUnit(PanelError):
    def __init__(self, fips: str, year: int):
        self.fips = fips
        self.year = year
        super().__init__(f"Unit {fips} has more than one row for year {year}")


class UnbalancedPanel(PanelError):
    def __init__(self, fips: str, missing_years: Iterable[int]):
        self.fips = fips
        self.missing_years = sorted(missing_years)
        years = ", ".join(str(y) for y in self.missing_years)
        super().__init__(f"Unit {fips} is missing year(s) {years}")


class UnmatchedUnit(PanelError):
    def __init__(self, names: Iterable[str]):
        self.names = list(names)
        super().__init__(f"No canonical match for: {', '.join(self.names)}")


class AmbiguousMatch(PanelError):
    def __init__(self, name: str, candidates: Iterable[str]):
        self.name = name
        self.candidates = list(candidates)
        super().__init__(f"'{name}' matches several canonical names: {', '.join(self.candidates)}")


class SeriesTooShort(AnalysisError, ValueError):
    def __init__(self, length: int, minimum: int, fips: Optional[str] = None):
        self.length = length
        self.minimum = minimum
        self.fips = fips
        unit = f" for unit {fips}" if fips else ""
        super().__init__(f"Series length {length}{unit} is below the minimum of {minimum}")


# Spectral

class InvalidProportion(AnalysisError, ValueError):
    pass


class InvalidSpan(AnalysisError, ValueError):
    pass


class InvalidPartition(AnalysisError, ValueError):
    pass


class MismatchedUnitSets(AnalysisError, ValueError):
    pass


# Bispectral

class EmptyDomain(AnalysisError, ValueError):
    pass


# Clustering

class ZeroVarianceColumn(AnalysisError, ValueError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Feature column '{column}' has zero variance")


class FeaturesNotStandardized(AnalysisError, ValueError):
    pass


class KExceedsUnits(AnalysisError, ValueError):
    def __init__(self, k: int, n_units: int):
        self.k = k
        self.n_units = n_units
        super().__init__(f"k={k} exceeds the number of units ({n_units})")


class EmptyClusterUnrecoverable(AnalysisError):
    pass


class SingleCluster(AnalysisError, ValueError):
    pass


# Breakpoints

class DegenerateInterval(AnalysisError, ValueError):
    pass


class SeriesTooShortForBreak(AnalysisError, ValueError):
    def __init__(self, length: int, h: int, fips: Optional[str] = None):
        self.length = length
        self.h = h
        self.fips = fips
        unit = f"Unit {fips}: " if fips else ""
        super().__init__(f"{unit}series length {length} < 2h = {2 * h}")


class UnassignedUnit(AnalysisError, ValueError):
    pass


# Spatial

class InvalidGeometry(AnalysisError, ValueError):
    def __init__(self, unit: str, reason: str):
        self.unit = unit
        self.reason = reason
        super().__init__(f"Invalid geometry for unit {unit}: {reason}")


class ConstantValues(AnalysisError, ValueError):
    pass


class TooFewUnits(AnalysisError, ValueError):
    pass


class EmptyKeepSet(AnalysisError, ValueError):
    pass


# Inference

class RankDeficientDesign(AnalysisError, ValueError):
    pass


class TooFewObservations(AnalysisError, ValueError):
    pass


class NotNested(AnalysisError, ValueError):
    pass


class LengthMismatch(AnalysisError, ValueError):
    pass


class ConstantInput(AnalysisError, ValueError):
    pass


# Synthetic data

class InvalidSpec(AnalysisError, ValueError):
    pass


class InvalidGrid(AnalysisError, ValueError):
    pass


# Outputs

class NoMatchingUnits(AnalysisError, ValueError):
    pass


class NonNumericProperty(AnalysisError, ValueError):
    pass


class StageError(AnalysisError):
    """A failure inside a pipeline stage, tagged with the stage name"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
