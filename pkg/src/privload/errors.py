"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter is outside the domain of the operation."""


class AlignmentError(ValueError):
    """Series that must share timestamps do not."""

    def __init__(self, message, entity_id=None):
        super().__init__(message)
        self.entity_id = entity_id


class CoverageError(ValueError):
    """Required temperature (or other input) data is missing for some timestamps."""


class ParseError(ValueError):
    """A wide CSV row could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{where}{message}")


class OrderingError(ParseError):
    """Dates for one entity are not strictly increasing in file order."""
