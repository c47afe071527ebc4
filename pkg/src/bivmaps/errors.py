"""Exception hierarchy shared by every module."""


class BivmapsError(Exception):
    """Base class for all errors raised on bad input."""


class ParseError(BivmapsError):
    """Malformed document or CSV row.

    ``row`` is the 1-based data row number (header excluded) when known.
    """

    def __init__(self, message, *, source=None, row=None):
        self.source = source
        self.row = row
        prefix = ""
        if source:
            prefix += f"{source}: "
        if row is not None:
            prefix += f"row {row}: "
        super().__init__(prefix + message)


class ValidationError(BivmapsError):
    """A value violates a domain invariant."""


class GeometryError(ValidationError):
    def __init__(self, message, *, region_id=None, ring_index=None):
        self.region_id = region_id
        self.ring_index = ring_index
        where = []
        if region_id is not None:
            where.append(f"region {region_id!r}")
        if ring_index is not None:
            where.append(f"ring {ring_index}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class ConvergenceError(BivmapsError):
    """An iterative layout failed to settle within its sweep budget."""
