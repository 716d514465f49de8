class ConfigError(ValueError):
    """Invalid configuration; `path` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class UndefinedMetricError(ValueError):
    pass


class UnsupportedConfiguration(ConfigError):
    pass


class CellFailure(RuntimeError):
    """A sweep cell raised; identifies the failing (method, i, j)."""

    def __init__(self, method: str, i: int, j: int | None, cause: BaseException):
        self.method, self.i, self.j, self.cause = method, i, j, cause
        self.partial = []  # records finished before the failure
        where = f"train seed index i={i}" if j is None else f"cell (method={method}, i={i}, j={j})"
        super().__init__(f"{where} failed: {type(cause).__name__}: {cause}")
