"""Exception hierarchy shared across the package."""


class BlockgenError(Exception):
    pass


class DataError(BlockgenError):
    """Input data could not be used (CLI exit code 3)."""


class FormatError(DataError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class IntegrityError(DataError):
    pass


class NotFoundError(DataError):
    pass


class DecompositionError(DataError):
    pass


class ConfigError(BlockgenError):
    """Invalid configuration (CLI exit code 2)."""


class IncompatibleCheckpointError(BlockgenError):
    pass


class ChecksumError(IncompatibleCheckpointError):
    pass


class NumericError(BlockgenError):
    pass
