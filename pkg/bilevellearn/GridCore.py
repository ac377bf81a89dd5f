"""
Discretized domains and signals.

Cell-centred uniform grids over an interval or a rectangle, the signals
living on them, and the midpoint quadratures and seminorms every other
module of the package is built on.
"""
import dataclasses
import functools
import logging
import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .Errors import DomainError, GridMismatchError, QuadratureError

logger = logging.getLogger(__name__)

# pair entries per block in the all-pairs loops over 2D grids
PAIR_BLOCK_ENTRIES = 2 ** 20


def _block_rows(n):
  return max(1, min(n, PAIR_BLOCK_ENTRIES // n))


@dataclasses.dataclass(frozen=True)
class Domain:
  """ An open interval (a, b) or rectangle (a1, b1) x (a2, b2).

      Attributes:
        bounds (tuple): ((a, b),) or ((a1, b1), (a2, b2))
  """
  bounds: Tuple[Tuple[float, float], ...]

  def __post_init__(self):
    bounds = tuple((float(a), float(b)) for a, b in self.bounds)
    if len(bounds) not in (1, 2):
      raise DomainError('only 1D intervals and 2D rectangles are supported, got dimension %d' % len(bounds))
    for a, b in bounds:
      if not a < b:
        raise DomainError('empty axis (%g, %g)' % (a, b))
    object.__setattr__(self, 'bounds', bounds)

  @classmethod
  def interval(cls, a, b):
    return cls(((a, b),))

  @classmethod
  def rect(cls, a1, b1, a2, b2):
    return cls(((a1, b1), (a2, b2)))

  @property
  def dim(self):
    return len(self.bounds)

  @property
  def kind(self):
    return 'Interval' if self.dim == 1 else 'Rect'

  @property
  def side_lengths(self):
    return tuple(b - a for a, b in self.bounds)

  @property
  def measure(self):
    return math.prod(self.side_lengths)

  @property
  def diameter(self):
    return math.sqrt(sum(s * s for s in self.side_lengths))


@dataclasses.dataclass(init=False, frozen=True)
class Grid:
  """ Uniform cell-centred grid on a Domain.

      Distinct nodes are at least one spacing apart, so kernels that blow
      up on the diagonal stay finite on every off-diagonal node pair.

      Attributes:
        domain (Domain)
        shape (tuple of int): cells per axis
  """
  domain: Domain
  shape: Tuple[int, ...]

  def __init__(self, domain: Domain, points_per_axis: Union[int, Sequence[int]]):
    if isinstance(points_per_axis, (int, np.integer)):
      shape = (int(points_per_axis),) * domain.dim
    else:
      shape = tuple(int(n) for n in points_per_axis)
    if len(shape) != domain.dim:
      raise DomainError('grid shape %s does not match domain dimension %d' % (shape, domain.dim))
    if min(shape) < 1:
      raise DomainError('points per axis must be positive, got %s' % (shape,))
    object.__setattr__(self, 'domain', domain)
    object.__setattr__(self, 'shape', shape)

  @property
  def dim(self):
    return self.domain.dim

  @property
  def points_per_axis(self):
    return self.shape[0] if len(set(self.shape)) == 1 else self.shape

  @property
  def size(self):
    return math.prod(self.shape)

  @property
  def spacing(self):
    return tuple(s / n for s, n in zip(self.domain.side_lengths, self.shape))

  @property
  def h(self):
    """ The smallest spacing; the minimal distance of two distinct nodes. """
    return min(self.spacing)

  @property
  def cell_volume(self):
    return math.prod(self.spacing)

  @functools.cached_property
  def axes(self):
    """ Cell-centre coordinates per axis. """
    return tuple(a + (np.arange(n) + 0.5) * hk
                 for (a, _), n, hk in zip(self.domain.bounds, self.shape, self.spacing))

  @functools.cached_property
  def nodes(self):
    """ Node coordinates, shape (size, dim), row-major over the axes. """
    mesh = np.meshgrid(*self.axes, indexing='ij')
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    nodes.flags.writeable = False
    return nodes

  def same_as(self, other):
    return isinstance(other, Grid) and self.domain == other.domain and self.shape == other.shape


@dataclasses.dataclass(frozen=True, eq=False)
class GridSignal:
  """ A discretized function on a Grid, one finite value per node.

      Attributes:
        grid (Grid)
        values (ndarray): flat, row-major over the grid axes, read-only
  """
  grid: Grid
  values: np.ndarray

  def __post_init__(self):
    values = np.array(self.values, dtype=float).ravel()
    if values.size != self.grid.size:
      raise GridMismatchError('signal has %d values, grid has %d nodes' % (values.size, self.grid.size))
    if not np.all(np.isfinite(values)):
      raise ValueError('signal values must be finite')
    values.flags.writeable = False
    object.__setattr__(self, 'values', values)

  @classmethod
  def from_function(cls, grid: Grid, f: Callable):
    """ Samples f at the grid nodes; f receives one coordinate array per axis. """
    mesh = np.meshgrid(*grid.axes, indexing='ij')
    vals = np.broadcast_to(np.asarray(f(*mesh), dtype=float), grid.shape)
    return cls(grid, vals.ravel())

  @classmethod
  def constant(cls, grid: Grid, c: float):
    return cls(grid, np.full(grid.size, float(c)))

  def as_array(self):
    return self.values.reshape(self.grid.shape)

  def _other_values(self, other):
    if isinstance(other, GridSignal):
      check_same_grid(self, other)
      return other.values
    return float(other)

  def __add__(self, other):
    return GridSignal(self.grid, self.values + self._other_values(other))

  __radd__ = __add__

  def __sub__(self, other):
    return GridSignal(self.grid, self.values - self._other_values(other))

  def __rsub__(self, other):
    return GridSignal(self.grid, self._other_values(other) - self.values)

  def __mul__(self, c):
    return GridSignal(self.grid, self.values * float(c))

  __rmul__ = __mul__

  def __truediv__(self, c):
    return GridSignal(self.grid, self.values / float(c))

  def __neg__(self):
    return GridSignal(self.grid, -self.values)


@dataclasses.dataclass(frozen=True)
class TrainingSet:
  """ N >= 1 pairs of (clean, noisy) signals on one grid.
  """
  grid: Grid
  pairs: Tuple[Tuple[GridSignal, GridSignal], ...]

  def __post_init__(self):
    pairs = tuple((c, n) for c, n in self.pairs)
    if len(pairs) == 0:
      raise ValueError('a training set needs at least one pair')
    for clean, noisy in pairs:
      if not (clean.grid.same_as(self.grid) and noisy.grid.same_as(self.grid)):
        raise GridMismatchError('all training signals must share the training grid')
    object.__setattr__(self, 'pairs', pairs)

  @classmethod
  def single(cls, clean: GridSignal, noisy: GridSignal):
    return cls(clean.grid, ((clean, noisy),))

  @property
  def N(self):
    return len(self.pairs)

  @property
  def clean(self):
    return [c for c, _ in self.pairs]

  @property
  def noisy(self):
    return [n for _, n in self.pairs]


def check_same_grid(u: GridSignal, v: GridSignal):
  if not u.grid.same_as(v.grid):
    raise GridMismatchError('signals live on different grids: %s vs %s' % (u.grid, v.grid))


def l2_norm_sq(u: GridSignal) -> float:
  """ Midpoint rule for the integral of u^2 over the domain. """
  return u.grid.cell_volume * math.fsum(u.values * u.values)


def l2_inner(u: GridSignal, v: GridSignal) -> float:
  check_same_grid(u, v)
  return u.grid.cell_volume * math.fsum(u.values * v.values)


def l2_distance_sq(u: GridSignal, v: GridSignal) -> float:
  check_same_grid(u, v)
  d = u.values - v.values
  return u.grid.cell_volume * math.fsum(d * d)


def mean_value(u: GridSignal) -> float:
  return u.grid.cell_volume * math.fsum(u.values) / u.grid.domain.measure


def is_constant(u: GridSignal, rtol: float = 1e-10) -> bool:
  """ Max-deviation constancy test, scaled by (1 + sup norm). """
  vals = u.values
  return float(vals.max() - vals.min()) <= rtol * (1.0 + float(np.abs(vals).max()))


def distance(x, y):
  """ Euclidean distance of coordinate arrays of shape (..., dim). """
  return np.sqrt(np.sum((x - y) ** 2, axis=-1))


def node_pairs(grid: Grid, max_distance: Optional[float] = None):
  """ Unordered off-diagonal node pairs i < j, optionally only those
      closer than max_distance.

      Returns:
        (I, J, D): index arrays and pair distances
  """
  if grid.dim == 1:
    n = grid.size
    h = grid.spacing[0]
    kmax = n - 1
    if max_distance is not None:
      kmax = min(kmax, int(math.ceil(max_distance / h)))
    I, J, D = [], [], []
    for k in range(1, kmax + 1):
      d = k * h
      if max_distance is not None and d >= max_distance:
        break
      i = np.arange(n - k)
      I.append(i)
      J.append(i + k)
      D.append(np.full(n - k, d))
    if not I:
      return np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0)
    return np.concatenate(I), np.concatenate(J), np.concatenate(D)
  nodes = grid.nodes
  I, J = np.triu_indices(grid.size, k=1)
  D = distance(nodes[I], nodes[J])
  if max_distance is not None:
    keep = D < max_distance
    I, J, D = I[keep], J[keep], D[keep]
  return I, J, D


def _raise_nonfinite(vals, xi, yi, grid):
  bad = int(np.flatnonzero(~np.isfinite(vals))[0])
  pair = (int(xi[bad]), int(yi[bad]))
  raise QuadratureError('pair integrand is not finite at node pair %s (x=%s, y=%s)'
                        % (pair, grid.nodes[pair[0]], grid.nodes[pair[1]]), pair=pair)


def double_integral(g: Callable, u: GridSignal, symmetric: bool = False,
                    max_distance: Optional[float] = None) -> float:
  """ Midpoint quadrature of the double integral of g(x, y, u(x), u(y))
      over Omega x Omega, diagonal cells omitted.

      Parameters:
        g (callable): g(x, y, xi, zeta) with x, y coordinate arrays of
          shape (m, dim) and xi, zeta value arrays of shape (m,)
        u (GridSignal)
        symmetric (bool): g(x,y,xi,zeta) = g(y,x,zeta,xi), so each
          unordered pair is evaluated once and doubled
        max_distance (float): pairs at distance >= max_distance are
          known to contribute zero and are skipped
      Returns:
        float
  """
  grid = u.grid
  nodes = grid.nodes
  vals = u.values
  partials = []
  if grid.dim == 1:
    n = grid.size
    h = grid.spacing[0]
    for k in range(1, n):
      if max_distance is not None and k * h >= max_distance:
        break
      i = np.arange(n - k)
      j = i + k
      orders = ((i, j),) if symmetric else ((i, j), (j, i))
      for a, b in orders:
        gv = np.asarray(g(nodes[a], nodes[b], vals[a], vals[b]), dtype=float)
        gv = np.broadcast_to(gv, a.shape)
        if not np.all(np.isfinite(gv)):
          _raise_nonfinite(gv, a, b, grid)
        partials.append(float(np.sum(gv)) * (2.0 if symmetric else 1.0))
  else:
    n = grid.size
    cols = np.arange(n)
    for start in range(0, n, _block_rows(n)):
      rows = np.arange(start, min(start + _block_rows(n), n))
      a = np.repeat(rows, n)
      b = np.tile(cols, rows.size)
      keep = a != b
      if max_distance is not None:
        keep &= distance(nodes[a], nodes[b]) < max_distance
      a, b = a[keep], b[keep]
      if a.size == 0:
        continue
      gv = np.asarray(g(nodes[a], nodes[b], vals[a], vals[b]), dtype=float)
      gv = np.broadcast_to(gv, a.shape)
      if not np.all(np.isfinite(gv)):
        _raise_nonfinite(gv, a, b, grid)
      partials.append(float(np.sum(gv)))
  return grid.cell_volume ** 2 * math.fsum(partials)


def pair_max(g: Callable, u: GridSignal, symmetric: bool = False) -> float:
  """ Largest value of g(x, y, u(x), u(y)) over off-diagonal node pairs,
      the grid counterpart of the essential supremum over Omega x Omega.
  """
  grid = u.grid
  nodes = grid.nodes
  vals = u.values
  n = grid.size
  best = 0.0 if n < 2 else -np.inf
  if grid.dim == 1:
    for k in range(1, n):
      i = np.arange(n - k)
      j = i + k
      orders = ((i, j),) if symmetric else ((i, j), (j, i))
      for a, b in orders:
        gv = np.asarray(g(nodes[a], nodes[b], vals[a], vals[b]), dtype=float)
        if not np.all(np.isfinite(gv)):
          _raise_nonfinite(np.broadcast_to(gv, a.shape), a, b, grid)
        best = max(best, float(np.max(gv)))
    return best
  cols = np.arange(n)
  for start in range(0, n, _block_rows(n)):
    rows = np.arange(start, min(start + _block_rows(n), n))
    a = np.repeat(rows, n)
    b = np.tile(cols, rows.size)
    keep = a != b
    a, b = a[keep], b[keep]
    gv = np.asarray(g(nodes[a], nodes[b], vals[a], vals[b]), dtype=float)
    if not np.all(np.isfinite(gv)):
      _raise_nonfinite(np.broadcast_to(gv, a.shape), a, b, grid)
    best = max(best, float(np.max(gv)))
  return best


def tv_discrete(u: GridSignal) -> float:
  """ Discrete total variation. In 2D the anisotropic sum of forward
      differences along both axes, each weighted by the transverse spacing.
  """
  grid = u.grid
  if grid.dim == 1:
    return math.fsum(np.abs(np.diff(u.values)))
  arr = u.as_array()
  h1, h2 = grid.spacing
  return math.fsum([h2 * math.fsum(np.abs(np.diff(arr, axis=0)).ravel()),
                    h1 * math.fsum(np.abs(np.diff(arr, axis=1)).ravel())])


def lipschitz_constant(u: GridSignal) -> float:
  """ Largest difference quotient; adjacent nodes in 1D, all pairs in 2D. """
  grid = u.grid
  if grid.size < 2:
    return 0.0
  if grid.dim == 1:
    return float(np.max(np.abs(np.diff(u.values)))) / grid.spacing[0]
  nodes = grid.nodes
  vals = u.values
  best = 0.0
  n = grid.size
  for start in range(0, n, _block_rows(n)):
    rows = np.arange(start, min(start + _block_rows(n), n))
    d = distance(nodes[rows][:, None, :], nodes[None, :, :])
    dv = np.abs(vals[rows][:, None] - vals[None, :])
    d[d == 0.0] = np.inf
    best = max(best, float(np.max(dv / d)))
  return best


def gagliardo_seminorm(u: GridSignal, p: float, beta: float) -> float:
  """ [u]_{p, beta} = (double integral of |u(x)-u(y)|^p / |x-y|^(beta p))^(1/p). """
  if p < 1:
    raise ValueError('p must be >= 1, got %g' % p)
  if not 0.0 <= beta <= 1.0:
    raise ValueError('beta must lie in [0, 1], got %g' % beta)

  def integrand(x, y, xi, zeta):
    return np.abs(xi - zeta) ** p / distance(x, y) ** (beta * p)

  return double_integral(integrand, u, symmetric=True) ** (1.0 / p)
