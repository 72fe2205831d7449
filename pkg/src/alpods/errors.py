"""Exception hierarchy shared by the library and the CLI."""


class AlpodsError(Exception):
    """Base class for all errors raised by this package."""


class InputError(AlpodsError, ValueError):
    """Invalid arguments or data passed to an operation."""


class SchemaError(InputError):
    """A declared column is missing or the column roles are inconsistent."""


class ParseError(InputError):
    """A cell could not be parsed as a finite number."""


class IntegrityError(InputError):
    """The data violates a structural invariant (e.g. one case, two classes)."""


class EmptyDataError(InputError):
    """A data file has a header but no event rows."""


class AbstainError(AlpodsError):
    """No informative population classifier is available to vote."""


class BundleError(AlpodsError):
    """A model bundle is malformed, from another format version, or mismatched."""
