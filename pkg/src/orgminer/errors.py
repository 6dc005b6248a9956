"""Exception hierarchy shared by all stages."""


class OrgMinerError(Exception):
    """Base class for every error raised by orgminer."""


# dataset
class CodebookError(OrgMinerError):
    pass


class DuplicateAttribute(CodebookError):
    pass


class InvalidAttribute(CodebookError):
    pass


class HeaderMismatch(OrgMinerError):
    pass


class UnknownCategory(OrgMinerError):
    def __init__(self, row: int, column: str, token: str):
        super().__init__(f"row {row}, column {column!r}: unknown category {token!r}")
        self.row = row
        self.column = column
        self.token = token


class NonNumericValue(OrgMinerError):
    def __init__(self, row: int, column: str, token: str):
        super().__init__(f"row {row}, column {column!r}: non-numeric token {token!r}")
        self.row = row
        self.column = column
        self.token = token


class InvalidValue(OrgMinerError):
    pass


class UnknownAttribute(OrgMinerError):
    pass


# prep
class AllMissingColumn(OrgMinerError):
    def __init__(self, attribute: str):
        super().__init__(f"column {attribute!r} has no observed values")
        self.attribute = attribute


# cluster
class KExceedsN(OrgMinerError):
    pass


class SingleCluster(OrgMinerError):
    pass


class IncompleteData(OrgMinerError):
    pass


# trees
class EmptyNode(OrgMinerError):
    pass


class NonPartition(OrgMinerError):
    pass


class DegenerateTable(OrgMinerError):
    pass


class TargetNotCategorical(OrgMinerError):
    pass


class TargetMissing(OrgMinerError):
    pass


class SchemaMismatch(OrgMinerError):
    pass


class EmptyTestSet(OrgMinerError):
    pass


# rules
class ConsequentNotCategorical(OrgMinerError):
    pass


class SearchSpaceTooLarge(OrgMinerError):
    pass


class UnknownCluster(OrgMinerError):
    pass


# synth
class InfeasibleSpec(OrgMinerError):
    pass


class LengthMismatch(OrgMinerError):
    pass


# pipeline
class BundleIncomplete(OrgMinerError):
    pass


class StageError(OrgMinerError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
