"""Error taxonomy shared by every module.

Each exception carries a stable machine-readable ``code`` (its class name)
so the HTTP layer and CLI can surface errors without string matching.
"""


class PredismError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- geometry / raster ---

class MalformedWkt(PredismError):
    pass


class EmptyFootprint(PredismError):
    pass


class NoValidFootprints(PredismError):
    pass


# --- hazard scoring ---

class UnknownAttribute(PredismError):
    pass


class NegativeValue(PredismError):
    pass


class NoAttributes(PredismError):
    pass


class NonMonotoneRow(PredismError):
    pass


class IncompleteRow(PredismError):
    pass


# --- dataset ingestion ---

class MalformedLabelFile(PredismError):
    pass


class UnknownDamageClass(PredismError):
    pass


class UnknownDisasterType(PredismError):
    pass


class UnclassifiedNotMappable(PredismError):
    pass


class EmptyCatalog(PredismError):
    pass


class MixedDisasterTypesInEvent(PredismError):
    pass


class InsufficientData(PredismError):
    pass


# --- model / ensemble ---

class NonMonotoneCutPoints(PredismError):
    pass


class NoBackboneAvailable(PredismError):
    pass


class DegenerateDataset(PredismError):
    pass


class BackboneFailure(PredismError):
    pass


# --- damage maps ---

class MissingGeoBounds(PredismError):
    pass


class IdMismatch(PredismError):
    pass


# --- service ---

class BadConfig(PredismError):
    pass


class BackendStartupFailure(PredismError):
    pass


class PortUnavailable(PredismError):
    pass
