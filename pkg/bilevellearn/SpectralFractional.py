import dataclasses
import functools
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from . import GridCore
from .Errors import BracketError, DomainError, ParameterError
from .GridCore import Grid, GridSignal

""" Spectral fractional Laplacian regularizers on (0, pi) and (0, pi)^2.
    The Dirichlet eigenfunctions are products of normalized sines, so every
    quantity of the fractional family reduces to sums over eigenmodes.
"""

logger = logging.getLogger(__name__)

DEFAULT_M_MAX = 64
S_SCAN_POINTS = 64


def _is_zero_pi(bounds):
  a, b = bounds
  return math.isclose(a, 0.0, abs_tol=1e-12) and math.isclose(b, math.pi, rel_tol=1e-12)


@dataclasses.dataclass(frozen=True, eq=False)
class EigenBasis:
  """ Dirichlet Laplacian eigenmodes with max index component <= M_max,
      ordered by eigenvalue (ties by index).
      Attributes:
        domain (Domain)
        M_max (int)
        indices (tuple): m (1D) or (m1, m2) (2D), 1-based
        eigenvalues (ndarray): lambda_m, non-decreasing
  """
  domain: GridCore.Domain
  M_max: int
  indices: tuple = dataclasses.field(init=False)
  eigenvalues: np.ndarray = dataclasses.field(init=False, repr=False)

  def __post_init__(self):
    if not all(_is_zero_pi(b) for b in self.domain.bounds):
      raise DomainError('the spectral basis is only available on (0, pi) and (0, pi)^2')
    if self.M_max < 1:
      raise DomainError('M_max must be >= 1')
    m = np.arange(1, self.M_max + 1)
    if self.domain.dim == 1:
      idx = [(int(k),) for k in m]
      lam = [float(k * k) for k in m]
    else:
      idx = [(int(a), int(b)) for a in m for b in m]
      lam = [float(a * a + b * b) for a, b in idx]
    order = sorted(range(len(idx)), key=lambda i: (lam[i], idx[i]))
    eig = np.array([lam[i] for i in order])
    eig.flags.writeable = False
    object.__setattr__(self, 'indices', tuple(idx[i] for i in order))
    object.__setattr__(self, 'eigenvalues', eig)
    # positions of each mode inside the M_max x ... coefficient array
    pos = tuple(np.array([idx[i][k] - 1 for i in order]) for k in range(self.domain.dim))
    object.__setattr__(self, '_positions', pos)

  @property
  def size(self):
    return len(self.indices)

  @property
  def normalization(self):
    """ Factor per axis making the sine products orthonormal in L^2. """
    return math.sqrt(2.0 / math.pi)

  def check_grid(self, grid: Grid):
    if not all(_is_zero_pi(b) for b in grid.domain.bounds):
      raise DomainError('grid domain %s does not match the basis domain' % (grid.domain.bounds,))
    if grid.dim != self.domain.dim:
      raise DomainError('grid dimension %d does not match the basis' % grid.dim)
    if min(grid.shape) <= self.M_max:
      raise DomainError('points per axis (%s) must exceed M_max=%d' % (grid.shape, self.M_max))

  def axis_matrix(self, grid: Grid, axis: int):
    """ Phi[i, m - 1] = sqrt(2 / pi) sin(m x_i) on the nodes of one axis. """
    x = grid.axes[axis]
    m = np.arange(1, self.M_max + 1)
    return self.normalization * np.sin(np.outer(x, m))

  def mode(self, grid: Grid, k: int) -> GridSignal:
    """ The k-th eigenfunction sampled on the grid. """
    c = np.zeros(self.size)
    c[k] = 1.0
    return synthesize(SpectralCoeffs(self, c), grid)

  def index_of(self, m):
    return self.indices.index(tuple(m) if not isinstance(m, int) else (m,))


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralCoeffs:
  """ Coefficients u_m = <u, psi_m> aligned with basis.indices; grid is the
      grid the coefficients were analyzed on, if any.
  """
  basis: EigenBasis
  coeffs: np.ndarray
  grid: Optional[Grid] = None

  def __post_init__(self):
    c = np.array(self.coeffs, dtype=float).ravel()
    if c.size != self.basis.size:
      raise ValueError('coefficient count %d does not match %d basis modes' % (c.size, self.basis.size))
    c.flags.writeable = False
    object.__setattr__(self, 'coeffs', c)

  def with_coeffs(self, c):
    return SpectralCoeffs(self.basis, c, self.grid)

  def norm_sq(self):
    return math.fsum(self.coeffs * self.coeffs)


@dataclasses.dataclass(frozen=True)
class FracConditionReport:
  h1_value: float
  h1_holds: bool
  h2_value: float
  h2_holds: bool
  mu: float

  def show(self):
    print('FRACTIONAL ORDER CONDITIONS (mu = %s)' % round(self.mu, 6))
    print('{:<{width}s}{:>16s}{:>8s}'.format('Condition', 'Value', 'Holds', width=12))
    print('{:<{width}s}{:>16s}{:>8s}'.format('H1_s', '%.6g' % self.h1_value, str(self.h1_holds), width=12))
    print('{:<{width}s}{:>16s}{:>8s}'.format('H2_s', '%.6g' % self.h2_value, str(self.h2_holds), width=12))

  def to_json(self):
    return {'H1_s': {'value': self.h1_value, 'holds': self.h1_holds},
            'H2_s': {'value': self.h2_value, 'holds': self.h2_holds}, 'mu': self.mu}


@functools.lru_cache(maxsize=32)
def build_basis(domain, M_max=DEFAULT_M_MAX):
  """ Eigenbasis of the Dirichlet Laplacian on (0, pi) or (0, pi)^2.
      Parameters:
        domain (Domain)
        M_max (int): largest index per axis
      Returns:
        EigenBasis
  """
  return EigenBasis(domain, int(M_max))


def analyze(u: GridSignal, basis: EigenBasis) -> SpectralCoeffs:
  grid = u.grid
  basis.check_grid(grid)
  if grid.dim == 1:
    full = grid.cell_volume * (basis.axis_matrix(grid, 0).T @ u.values)
    c = full[basis._positions[0]]
  else:
    full = grid.cell_volume * (basis.axis_matrix(grid, 0).T @ u.as_array() @ basis.axis_matrix(grid, 1))
    c = full[basis._positions[0], basis._positions[1]]
  return SpectralCoeffs(basis, c, grid)


def synthesize(c: SpectralCoeffs, grid: Optional[Grid] = None) -> GridSignal:
  grid = grid or c.grid
  if grid is None:
    raise ParameterError('synthesize needs a grid')
  basis = c.basis
  basis.check_grid(grid)
  if grid.dim == 1:
    full = np.zeros(basis.M_max)
    full[basis._positions[0]] = c.coeffs
    return GridSignal(grid, basis.axis_matrix(grid, 0) @ full)
  full = np.zeros((basis.M_max, basis.M_max))
  full[basis._positions[0], basis._positions[1]] = c.coeffs
  return GridSignal(grid, basis.axis_matrix(grid, 0) @ full @ basis.axis_matrix(grid, 1).T)


def _check_s(s):
  if not 0.0 <= s <= 1.0:
    raise ParameterError('s must lie in [0, 1], got %g' % s)


def frac_seminorm_sq(c: SpectralCoeffs, s: float, mu: float) -> float:
  """ mu * sum lambda_m^s u_m^2. """
  _check_s(s)
  return mu * math.fsum(c.basis.eigenvalues ** s * c.coeffs ** 2)


def frac_minimizer(c_eta: SpectralCoeffs, s: float, mu: float) -> SpectralCoeffs:
  _check_s(s)
  return c_eta.with_coeffs(c_eta.coeffs / (1.0 + mu * c_eta.basis.eigenvalues ** s))


def frac_minimizer_derivative(c_eta: SpectralCoeffs, s: float, mu: float) -> SpectralCoeffs:
  """ Derivative in s of the minimizer coefficients. """
  lam = c_eta.basis.eigenvalues
  ls = lam ** s
  return c_eta.with_coeffs(-mu * np.log(lam) * ls / (1.0 + mu * ls) ** 2 * c_eta.coeffs)


class _TrainingSpectrum:
  """ Coefficients of every training pair plus the off-span part of the clean data. """
  def __init__(self, training, basis):
    self.basis = basis
    self.clean = [analyze(c, basis) for c in training.clean]
    self.noisy = [analyze(n, basis) for n in training.noisy]
    self.off_span = math.fsum(max(GridCore.l2_norm_sq(c) - a.norm_sq(), 0.0)
                              for c, a in zip(training.clean, self.clean))


def _spectrum(training, basis):
  if isinstance(training, _TrainingSpectrum):
    return training
  return _TrainingSpectrum(training, basis)


def upper_value(s, mu, training, basis) -> float:
  """ I(s): summed squared distance of the fractional reconstructions to the clean data. """
  sp = _spectrum(training, basis)
  parts = [sp.off_span]
  for cc, cn in zip(sp.clean, sp.noisy):
    w = frac_minimizer(cn, s, mu).coeffs
    parts.append(math.fsum((w - cc.coeffs) ** 2))
  return math.fsum(parts)


def upper_derivative(s, mu, training, basis) -> float:
  """ I'(s) = 2 sum_j <d_s w_j, w_j - u_c_j>. """
  sp = _spectrum(training, basis)
  parts = []
  for cc, cn in zip(sp.clean, sp.noisy):
    w = frac_minimizer(cn, s, mu).coeffs
    dw = frac_minimizer_derivative(cn, s, mu).coeffs
    parts.append(2.0 * math.fsum(dw * (w - cc.coeffs)))
  return math.fsum(parts)


def _h1_value(sp, mu):
  lam = sp.basis.eigenvalues
  return math.fsum(math.fsum(np.log(lam) * n.coeffs * (n.coeffs - (1.0 + mu) * c.coeffs))
                   for c, n in zip(sp.clean, sp.noisy))


def _h2_value(sp, mu):
  lam = sp.basis.eigenvalues
  den = (1.0 + mu * lam) ** 3
  return math.fsum(math.fsum(lam * np.log(lam) * n.coeffs * (n.coeffs - (1.0 + mu * lam) * c.coeffs) / den)
                   for c, n in zip(sp.clean, sp.noisy))


def check_conditions(training, mu, basis) -> FracConditionReport:
  """ Sign conditions for an interior optimal order: H1_s holds iff I'(0) < 0
      and H2_s holds iff I'(1) > 0.
  """
  sp = _spectrum(training, basis)
  h1 = _h1_value(sp, mu)
  h2 = _h2_value(sp, mu)
  return FracConditionReport(h1, h1 > 0, h2, h2 < 0, mu)


def _bisect_root(fn, lo, hi, name):
  flo, fhi = fn(lo), fn(hi)
  if flo == 0.0:
    return lo
  if fhi == 0.0:
    return hi
  if (flo > 0) == (fhi > 0):
    raise BracketError('%s has no sign change on [%g, %g]' % (name, lo, hi))
  return optimize.bisect(fn, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500)


def mu_window(training, basis, bracket: Tuple[float, float] = (1e-4, 1.0)):
  """ The window (mu_minus, mu_plus) of weights for which both sign
      conditions hold: mu_plus is the root of the H1_s sum, mu_minus the
      root of the H2_s sum.
      Returns:
        (float, float)
  """
  sp = _spectrum(training, basis)
  lo, hi = bracket
  mu_plus = _bisect_root(lambda m: _h1_value(sp, m), lo, hi, 'H1_s')
  mu_minus = _bisect_root(lambda m: _h2_value(sp, m), lo, hi, 'H2_s')
  if not mu_minus < mu_plus:
    logger.warning('empty mu window: mu_minus=%.9g, mu_plus=%.9g', mu_minus, mu_plus)
  return mu_minus, mu_plus


def learn_s(training, mu, basis):
  """ Global minimizer of I over s in [0, 1].

      Scans I' on a uniform grid, bisects every cell where I' turns from
      negative to positive and compares the local minima with s = 0 and
      s = 1. Exact ties go to the smallest s.
      Returns:
        (s_hat, boundary): boundary is True when s_hat is 0 or 1
  """
  sp = _spectrum(training, basis)
  ss = np.linspace(0.0, 1.0, S_SCAN_POINTS)
  ds = [upper_derivative(s, mu, sp, basis) for s in ss]
  candidates = [0.0, 1.0]
  for k in range(len(ss) - 1):
    if ds[k] < 0.0 < ds[k + 1]:
      root = optimize.bisect(lambda s: upper_derivative(s, mu, sp, basis), ss[k], ss[k + 1], xtol=1e-12)
      candidates.append(float(root))
    elif ds[k + 1] == 0.0 and ds[k] < 0.0:
      candidates.append(float(ss[k + 1]))
  values = [(upper_value(s, mu, sp, basis), s) for s in candidates]
  best_value, s_hat = min(values)
  logger.info('learn_s: mu=%g, candidates %s, s_hat=%.12g', mu, candidates, s_hat)
  return s_hat, s_hat in (0.0, 1.0)


def _order(family, param):
  if param.is_lower:
    return 0.0
  if param.is_upper:
    return 1.0
  return param.t


def eval_fractional(family, param, u: GridSignal) -> float:
  """ mu [u]_s^2 on the truncated basis; the s = 0 and s = 1 edges use the same formula. """
  basis = build_basis(u.grid.domain, family.M_max)
  return frac_seminorm_sq(analyze(u, basis), _order(family, param), family.mu)


def solve_fractional(family, param, u_eta: GridSignal):
  """ Closed form reconstruction in the span of the truncated basis. """
  from .LowerSolvers import build_result
  basis = build_basis(u_eta.grid.domain, family.M_max)
  s = _order(family, param)
  w_c = frac_minimizer(analyze(u_eta, basis), s, family.mu)
  w = synthesize(w_c)
  res = build_result(w, u_eta, frac_seminorm_sq(w_c, s, family.mu), 'spectral-closed-form')
  return res
