"""Exception types raised by the numerical routines."""


class LineDefectError(Exception):
    """Base class for all errors raised by linedefect."""


class StencilError(LineDefectError, ValueError):
    pass


class BallNotInteriorError(LineDefectError, ValueError):
    pass


class ResolutionError(LineDefectError, ValueError):
    pass


class DegenerateHeightError(LineDefectError, ArithmeticError):
    pass


class DivergenceError(LineDefectError, ArithmeticError):
    pass


class EmptyBallError(LineDefectError, ValueError):
    pass


class PointsTooFarError(LineDefectError, ValueError):
    pass
