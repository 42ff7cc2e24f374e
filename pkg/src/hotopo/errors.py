"""Exception hierarchy shared by all hotopo modules."""


class HotopoError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class MeshError(HotopoError):
    """Invalid mesh connectivity or geometry."""


class PointOutsideMesh(HotopoError):
    pass


class SingularMassMatrix(HotopoError):
    pass


class InvalidOrder(HotopoError, ValueError):
    pass


class SingularMomentMatrix(HotopoError):
    pass


class SupportExitsDomain(HotopoError):
    pass


class GridMismatch(HotopoError):
    pass


class MeshMismatch(HotopoError):
    pass


class ConstantField(HotopoError):
    pass


class DegenerateGrid(HotopoError):
    pass


class NotSimplyConnected(HotopoError):
    pass


class ConvergenceFailure(HotopoError):
    pass


class InvalidSpec(HotopoError, ValueError):
    pass


class FormatError(HotopoError):
    """Malformed input file."""
