"""Exception hierarchy shared by all modules."""


class MeshBalError(Exception):
    """Base class for errors raised by meshbal."""


class InvalidArgumentError(MeshBalError, ValueError):
    pass


class DegenerateInputError(MeshBalError, ValueError):
    """Input is well-formed but carries no usable information (zero total
    weight, zero-size bounding box)."""


class NotFoundError(MeshBalError, LookupError):
    pass


class PreconditionError(MeshBalError, ValueError):
    pass


class ConsistencyError(MeshBalError, RuntimeError):
    """A mirrored structure disagrees with the event it is asked to apply."""


class UnsupportedError(MeshBalError, NotImplementedError):
    pass


class ScenarioError(MeshBalError, RuntimeError):
    pass


class MeshParseError(MeshBalError, ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
