class BilevelError(Exception):
  """ Base class for every error raised by the bilevellearn package.
  """


class DomainError(BilevelError, ValueError):
  """ Raised for malformed domains, grids or unsupported dimensions.
  """


class GridMismatchError(BilevelError, ValueError):
  """ Raised when two signals that must share a grid do not.
  """


class QuadratureError(BilevelError, ArithmeticError):
  """ Raised when a pair integrand returns a non-finite value.
      The offending node pair is kept in the pair attribute.
  """
  def __init__(self, message, pair=None):
    super().__init__(message)
    self.pair = pair


class ParameterError(BilevelError, ValueError):
  """ Raised for parameter / family combinations that make no sense,
      e.g. a LowerEdge Brezis-Nguyen evaluation without K(phi).
  """


class SolverError(BilevelError, RuntimeError):
  """ Raised when a solver fails in a way the caller cannot ignore.
      The partial SolveResult, if any, is kept in the result attribute.
  """
  def __init__(self, message, result=None):
    super().__init__(message)
    self.result = result


class EstimationError(BilevelError, RuntimeError):
  """ Raised when a numerical extrapolation does not settle.
  """


class BracketError(BilevelError, ValueError):
  """ Raised when a root bracket has no sign change.
  """


class ConfigError(BilevelError, ValueError):
  """ Raised for invalid run configurations.
  """


class SignalFormatError(BilevelError, ValueError):
  """ Raised for malformed CSV / PGM signal files.
  """
