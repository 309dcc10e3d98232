"""Exception hierarchy shared by all knnportfolio modules."""


class PortfolioError(Exception):
    """Base class for every error raised by knnportfolio."""


# -- DIMACS parsing ---------------------------------------------------------

class DimacsError(PortfolioError, ValueError):
    """Malformed DIMACS input. ``line`` is 1-based, or None when unknown."""

    def __init__(self, message, line=None, source=""):
        self.line = line
        self.source = source
        where = source or "<input>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


class MissingProblemLine(DimacsError):
    pass


class MalformedProblemLine(DimacsError):
    pass


class LiteralOutOfRange(DimacsError):
    pass


class EmptyClause(DimacsError):
    pass


class NonIntegerToken(DimacsError):
    pass


class NoClauses(DimacsError):
    pass


# -- features / metrics -----------------------------------------------------

class EmptySampleSet(PortfolioError, ValueError):
    pass


class NegativeCoordinate(PortfolioError, ValueError):
    pass


class SolvedTimeExceedsCutoff(PortfolioError, ValueError):
    pass


class MissingOutcome(PortfolioError, KeyError):
    pass


# -- knowledge base ---------------------------------------------------------

class KnowledgeBaseError(PortfolioError, ValueError):
    pass


class MissingCnfAndFeatures(KnowledgeBaseError):
    pass


class MalformedRow(KnowledgeBaseError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class FormatVersionMismatch(KnowledgeBaseError):
    pass


class ChecksumMismatch(KnowledgeBaseError):
    pass


class SchemaError(KnowledgeBaseError):
    pass


class KTooLarge(PortfolioError, ValueError):
    pass


class EmptyKnowledgeBase(PortfolioError, ValueError):
    pass


# -- runner -----------------------------------------------------------------

class ExecutableNotFound(PortfolioError, FileNotFoundError):
    pass


class SpawnFailure(PortfolioError, OSError):
    pass


class AllSolversFailed(PortfolioError, RuntimeError):
    """Every attempted solver FAILED. ``report`` holds the final SolveReport."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
