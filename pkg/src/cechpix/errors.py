"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: usage errors exit 1, ValidationError
(and OracleLimitError) exit 2, InternalInvariantError exits 3.
"""


class CechpixError(Exception):
    pass


class ValidationError(CechpixError):
    """Bad user input: malformed files, out-of-range parameters."""


class OracleLimitError(ValidationError):
    """Brute-force oracle asked for an instance beyond its guard."""


class IndeterminateIntersection(CechpixError):
    """Ball-intersection test could not be decided to the requested tolerance."""


class InternalInvariantError(CechpixError):
    """A guaranteed geometric invariant failed; signals an implementation bug."""


class MalformedStreamError(ValidationError):
    """Token stream violates the replay rules; carries the offending token index."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(f"token {index}: {message}")
