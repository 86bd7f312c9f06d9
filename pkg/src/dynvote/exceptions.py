"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class DimensionMismatchError(InvalidInputError):
    """A feature vector does not have the dimension the model was trained on."""


class UndefinedAccuracyError(InvalidInputError):
    """No sample has an out-of-bag sub-forest, so OOB accuracy is undefined."""


class IngestionError(InvalidInputError):
    """A table or manifest could not be loaded.

    ``row`` is the 1-based line number in the source file and ``column`` the
    header name, when the failure can be pinned to a cell.
    """

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ModelFormatError(ValueError):
    """A model container is truncated, corrupt or not a model file."""


class ModelVersionError(ModelFormatError):
    """A model container was written with an incompatible major version."""
