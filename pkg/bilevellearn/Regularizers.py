"""
Regularizer families R_lambda and their Mosco-limit boundary models.

Five families are supported: a weight in front of a fixed base regularizer,
an integrability exponent of a double-integral regularizer, the amount of
nonlocality in the Brezis-Nguyen and Aubert-Kornprobst functionals, and the
order of a spectral fractional Laplacian. Each evaluator accepts an
ExtendedParam, so the same call covers interior parameters and both edges
of the closed parameter interval.
"""
import dataclasses
import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import GridCore
from .Errors import EstimationError, ParameterError
from .GridCore import GridSignal, distance

logger = logging.getLogger(__name__)

# evaluate f^p through max-scaling above this exponent
LOG_SPACE_EXPONENT = 64.0
# the discrete nonlocal models degenerate for delta below this many grid spacings
MIN_DELTA_SPACINGS = 8


@dataclasses.dataclass(frozen=True)
class ExtendedParam:
  """ A point of the closed parameter interval: Interior(t), LowerEdge or UpperEdge.
  """
  variant: str
  t: Optional[float] = None

  def __post_init__(self):
    if self.variant not in ('Interior', 'LowerEdge', 'UpperEdge'):
      raise ParameterError('unknown parameter variant %r' % self.variant)
    if self.variant == 'Interior':
      if self.t is None or not math.isfinite(self.t):
        raise ParameterError('an interior parameter needs a finite value')
      object.__setattr__(self, 't', float(self.t))
    elif self.t is not None:
      raise ParameterError('edge parameters carry no value')

  @classmethod
  def interior(cls, t):
    return cls('Interior', t)

  @classmethod
  def lower(cls):
    return cls('LowerEdge')

  @classmethod
  def upper(cls):
    return cls('UpperEdge')

  @property
  def is_interior(self):
    return self.variant == 'Interior'

  @property
  def is_lower(self):
    return self.variant == 'LowerEdge'

  @property
  def is_upper(self):
    return self.variant == 'UpperEdge'

  def sort_key(self):
    if self.is_lower:
      return (0, 0.0)
    if self.is_upper:
      return (2, 0.0)
    return (1, self.t)

  def label(self):
    return '%.17g' % self.t if self.is_interior else self.variant

  def to_json(self):
    return {'variant': self.variant, 't': self.t}

  @classmethod
  def from_json(cls, d):
    return cls(d['variant'], d.get('t'))


def kappa_n(n: int) -> float:
  """ Average of |e . sigma| over the unit sphere S^(n-1). """
  if n == 1:
    return 1.0
  if n == 2:
    return 2.0 / math.pi
  raise ParameterError('kappa_n is only available for n in {1, 2}, got %r' % (n,))


def gamma_n(n: int) -> float:
  """ Integral of |e . sigma| over the unit sphere S^(n-1). """
  if n == 1:
    return 2.0
  if n == 2:
    return 4.0
  raise ParameterError('gamma_n is only available for n in {1, 2}, got %r' % (n,))


def sphere_measure(n: int) -> float:
  if n == 1:
    return 2.0
  if n == 2:
    return 2.0 * math.pi
  raise ParameterError('unsupported dimension %r' % (n,))


def ball_volume(n: int, r: float) -> float:
  return sphere_measure(n) * r ** n / n


@dataclasses.dataclass(frozen=True)
class BaseRegularizer:
  """ Fixed regularizer R for the weight family.

      variant: 'QuadraticL2' (||u||^2), 'TV' (|Du|(Omega)),
      'GagliardoP' ([u]_{p,beta}^p) or 'Custom' (callback(u) -> float).
  """
  variant: str
  p: float = 1.0
  beta: float = 0.0
  callback: Optional[Callable] = None

  def __post_init__(self):
    if self.variant not in ('QuadraticL2', 'TV', 'GagliardoP', 'Custom'):
      raise ParameterError('unknown base regularizer %r' % self.variant)
    if self.variant == 'Custom' and self.callback is None:
      raise ParameterError('a custom base regularizer needs a callback')
    if self.variant == 'GagliardoP' and (self.p < 1 or not 0 <= self.beta <= 1):
      raise ParameterError('GagliardoP needs p >= 1 and beta in [0, 1]')

  @property
  def vanishes_on_constants(self):
    """ False for QuadraticL2, which vanishes on {0} only. """
    return self.variant != 'QuadraticL2'

  def __call__(self, u: GridSignal) -> float:
    if self.variant == 'QuadraticL2':
      return GridCore.l2_norm_sq(u)
    if self.variant == 'TV':
      return GridCore.tv_discrete(u)
    if self.variant == 'GagliardoP':
      return GridCore.gagliardo_seminorm(u, self.p, self.beta) ** self.p
    return float(self.callback(u))

  def describe(self):
    d = {'variant': self.variant}
    if self.variant == 'GagliardoP':
      d.update(p=self.p, beta=self.beta)
    return d


@dataclasses.dataclass(frozen=True)
class DoubleIntegrand:
  """ Double integrand f(x, y, xi, zeta) of the exponent family.

      'WeightedAbsDiff': f = a(x - y) |xi - zeta| with an even kernel a(z),
        z of shape (m, dim), bounded above and away from zero;
      'DiffQuotient':    f = b |xi - zeta| / |x - y|;
      'Custom':          callback(x, y, xi, zeta) with growth constants
        M, delta_growth and beta.
  """
  variant: str
  kernel: Optional[Callable] = None
  b: float = 1.0
  callback: Optional[Callable] = None
  M: Optional[float] = None
  delta_growth: float = 1.0
  beta: Optional[float] = None

  def __post_init__(self):
    if self.variant == 'WeightedAbsDiff':
      if self.kernel is None:
        object.__setattr__(self, 'kernel', lambda z: np.ones(z.shape[0]))
      object.__setattr__(self, 'beta', 0.0)
    elif self.variant == 'DiffQuotient':
      if not self.b > 0:
        raise ParameterError('DiffQuotient needs b > 0')
      object.__setattr__(self, 'beta', 1.0)
      object.__setattr__(self, 'M', max(self.b, 1.0 / self.b))
    elif self.variant == 'Custom':
      if self.callback is None or self.M is None or self.beta is None:
        raise ParameterError('a custom integrand needs callback, M and beta')
      if not 0.0 <= self.beta <= 1.0:
        raise ParameterError('beta must lie in [0, 1]')
    else:
      raise ParameterError('unknown double integrand %r' % self.variant)
    self._check_growth()

  @classmethod
  def weighted_abs_diff(cls, kernel=None):
    return cls('WeightedAbsDiff', kernel=kernel)

  @classmethod
  def diff_quotient(cls, b=1.0):
    return cls('DiffQuotient', b=b)

  @property
  def is_builtin(self):
    return self.variant != 'Custom'

  def __call__(self, x, y, xi, zeta):
    if self.variant == 'WeightedAbsDiff':
      return self.kernel(x - y) * np.abs(xi - zeta)
    if self.variant == 'DiffQuotient':
      return self.b * np.abs(xi - zeta) / distance(x, y)
    return self.callback(x, y, xi, zeta)

  def pair_weights(self, x, y):
    """ w(x, y) with f = w(x, y) |xi - zeta|, builtin integrands only. """
    if self.variant == 'WeightedAbsDiff':
      return np.asarray(self.kernel(x - y), dtype=float)
    if self.variant == 'DiffQuotient':
      return self.b / distance(x, y)
    raise ParameterError('pair weights exist for builtin integrands only')

  def _check_growth(self):
    """ Spot-check of the growth bounds and the symmetry on random samples. """
    rng = np.random.default_rng(0)
    for dim in (1, 2):
      x = rng.uniform(-1.0, 1.0, (256, dim))
      y = rng.uniform(-1.0, 1.0, (256, dim))
      xi = rng.normal(size=256)
      zeta = rng.normal(size=256)
      try:
        fv = np.asarray(self(x, y, xi, zeta), dtype=float)
        fs = np.asarray(self(y, x, zeta, xi), dtype=float)
      except (ValueError, IndexError):
        if dim == 2:
          continue
        raise
      if self.variant == 'WeightedAbsDiff':
        a = np.asarray(self.kernel(x - y), dtype=float)
        if np.min(a) <= 0:
          raise ParameterError('the kernel a must be bounded away from zero')
        M = max(float(np.max(a)), 1.0 / float(np.min(a)))
        if self.M is None or self.M < M:
          object.__setattr__(self, 'M', M)
      if not np.allclose(fv, fs, rtol=1e-10, atol=1e-12):
        raise ParameterError('the double integrand must be symmetric')
      d = distance(x, y)
      jump = np.abs(xi - zeta) / d ** self.beta
      upper = self.M * (jump + np.abs(xi) + np.abs(zeta) + 1.0)
      if np.any(fv > upper * (1 + 1e-12)):
        raise ParameterError('the double integrand violates its upper growth bound')
      near = d < self.delta_growth
      if np.any(fv[near] < jump[near] / self.M - self.M - 1e-12):
        raise ParameterError('the double integrand violates its lower growth bound')

  def describe(self):
    d = {'variant': self.variant, 'beta': self.beta}
    if self.variant == 'DiffQuotient':
      d['b'] = self.b
    return d


def _phi_step(t):
  return np.where(t > 1.0, 1.0, 0.0)


def _phi_quadcap(t):
  return np.minimum(t * t, 1.0)


def _phi_one_minus_exp(t):
  return -np.expm1(-t * t)


_PHI_PROFILES = {'Step': _phi_step, 'QuadCap': _phi_quadcap, 'OneMinusExp': _phi_one_minus_exp}


@dataclasses.dataclass(frozen=True)
class PhiSpec:
  """ Profile phi of the Brezis-Nguyen functional, normalized at construction
      so that gamma_n * integral of phi(t) t^-2 over (0, inf) equals one.

      Attributes:
        variant (str): 'Step', 'QuadCap', 'OneMinusExp' or 'Custom'
        n (int): ambient dimension, fixes gamma_n
        c (float): the normalization factor (computed)
        a (float): the constant with phi(t) <= min(a t^2, a)
  """
  variant: str
  n: int = 1
  callback: Optional[Callable] = None
  c: float = dataclasses.field(default=0.0, init=False)
  a: float = dataclasses.field(default=0.0, init=False)

  def __post_init__(self):
    if self.variant in _PHI_PROFILES:
      profile = _PHI_PROFILES[self.variant]
    elif self.variant == 'Custom':
      if self.callback is None:
        raise ParameterError('a custom phi needs a callback')
      profile = self.callback
    else:
      raise ParameterError('unknown phi %r' % self.variant)
    object.__setattr__(self, '_profile', profile)
    mass = _phi_mass(profile)
    if not mass > 0:
      raise ParameterError('phi has zero mass against t^-2')
    c = 1.0 / (gamma_n(self.n) * mass)
    object.__setattr__(self, 'c', c)
    t = np.linspace(1e-3, 20.0, 4001)
    bound = np.minimum(t * t, 1.0)
    a = c * max(1.0, float(np.max(profile(t) / bound)))
    object.__setattr__(self, 'a', a)
    report = self.check()
    if not (report['H2']['holds'] and report['H3']['holds'] and report['H4']['holds']):
      raise ParameterError('phi violates its hypotheses: %s' % report)

  def __call__(self, t):
    return self.c * self._profile(np.asarray(t, dtype=float))

  def derivative(self, t):
    t = np.asarray(t, dtype=float)
    if self.variant == 'QuadCap':
      return self.c * np.where(t < 1.0, 2.0 * t, 0.0)
    if self.variant == 'OneMinusExp':
      return self.c * 2.0 * t * np.exp(-t * t)
    eps = 1e-3
    return (self(t + eps) - self(np.maximum(t - eps, 0.0))) / (t + eps - np.maximum(t - eps, 0.0))

  @property
  def power_near_zero(self):
    """ (c, r) when phi(t) = c t^r on a neighbourhood of zero, else None. """
    if self.variant == 'QuadCap':
      return self.c, 2.0
    return None

  def check(self):
    """ Sampled report on the hypotheses on phi. """
    t = np.concatenate([np.linspace(0.0, 5.0, 5001), np.geomspace(5.0, 1e4, 200)])
    v = self(t)
    h1 = bool(np.all(np.isfinite(v)))
    h2 = bool(np.all(v <= np.minimum(self.a * t * t, self.a) * (1 + 1e-9) + 1e-15))
    h3 = bool(np.all(np.diff(v) >= -1e-12))
    h4_value = gamma_n(self.n) * self.c * _phi_mass(self._profile)
    h5 = bool(np.all(v[t > 0] > 0))
    return {'H1': {'value': None, 'holds': h1},
            'H2': {'value': self.a, 'holds': h2},
            'H3': {'value': float(np.min(np.diff(v))), 'holds': h3},
            'H4': {'value': h4_value, 'holds': abs(h4_value - 1.0) <= 1e-8},
            'H5': {'value': None, 'holds': h5}}

  def describe(self):
    return {'variant': self.variant, 'n': self.n, 'c': self.c, 'a': self.a}


def _phi_mass(profile):
  """ Integral of profile(t) t^-2 over (0, inf), split at t = 1. """
  def g(t):
    return float(profile(np.array([t]))[0]) / (t * t) if t > 0 else 0.0
  first, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
  second, _ = integrate.quad(g, 1.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
  return first + second


def check_bn_phi(phi: PhiSpec):
  """ Hypotheses (H1)-(H5) on phi as a condition map. """
  return phi.check()


@dataclasses.dataclass(frozen=True)
class RhoSpec:
  """ Radial kernel rho(|x|) of the Aubert-Kornprobst functional with unit
      mass over R^n.

      'BallIndicator': rho = 1 / |B_radius| on [0, radius); the default
        radius makes rho equal to one near zero.
      'Custom': callback(r) with r >= 0, optional support radius.
  """
  variant: str
  n: int = 1
  radius: Optional[float] = None
  callback: Optional[Callable] = None
  support: Optional[float] = None

  def __post_init__(self):
    if self.variant == 'BallIndicator':
      radius = self.radius
      if radius is None:
        radius = 1.0 / ball_volume(self.n, 1.0) ** (1.0 / self.n)
      if not radius > 0:
        raise ParameterError('ball radius must be positive')
      object.__setattr__(self, 'radius', float(radius))
      object.__setattr__(self, 'support', float(radius))
    elif self.variant == 'Custom':
      if self.callback is None:
        raise ParameterError('a custom rho needs a callback')
    else:
      raise ParameterError('unknown rho %r' % self.variant)
    r = np.linspace(0.0, 10.0 if self.support is None else self.support * 1.5, 4001)
    if np.any(np.diff(self(r)) > 1e-12):
      raise ParameterError('rho must be non-increasing')
    mass = self.mass()
    if abs(mass - 1.0) > 1e-8:
      raise ParameterError('rho must have unit mass over R^n, got %.12g' % mass)

  def __call__(self, r):
    r = np.asarray(r, dtype=float)
    if self.variant == 'BallIndicator':
      return np.where(r < self.radius, 1.0 / ball_volume(self.n, self.radius), 0.0)
    return np.asarray(self.callback(r), dtype=float)

  def mass(self):
    if self.variant == 'BallIndicator':
      return ball_volume(self.n, self.radius) / ball_volume(self.n, self.radius)
    upper = np.inf if self.support is None else self.support
    val, _ = integrate.quad(lambda r: float(self(np.array([r]))[0]) * r ** (self.n - 1),
                            0.0, upper, epsabs=1e-13, epsrel=1e-12, limit=200)
    return sphere_measure(self.n) * val

  @property
  def equals_one_near_zero(self):
    return abs(float(self(np.array([0.0]))[0]) - 1.0) <= 1e-12

  def describe(self):
    return {'variant': self.variant, 'n': self.n, 'radius': self.radius, 'support': self.support}


@dataclasses.dataclass(frozen=True)
class FamilySpec:
  """ One regularizer family, with its hyperparameters.

      variant: 'Weight' (base), 'Exponent' (f), 'BrezisNguyen' (phi, K_phi),
      'AubertKornprobst' (rho) or 'SpectralFractional' (mu, M_max).
  """
  variant: str
  base: Optional[BaseRegularizer] = None
  f: Optional[DoubleIntegrand] = None
  phi: Optional[PhiSpec] = None
  rho: Optional[RhoSpec] = None
  mu: Optional[float] = None
  K_phi: Optional[float] = None
  M_max: int = 64

  def __post_init__(self):
    needs = {'Weight': 'base', 'Exponent': 'f', 'BrezisNguyen': 'phi',
             'AubertKornprobst': 'rho', 'SpectralFractional': 'mu'}
    if self.variant not in needs:
      raise ParameterError('unknown family %r' % self.variant)
    if getattr(self, needs[self.variant]) is None:
      raise ParameterError('family %s needs %s' % (self.variant, needs[self.variant]))
    if self.variant == 'SpectralFractional' and not self.mu > 0:
      raise ParameterError('the fractional family needs mu > 0')
    if self.K_phi is not None and not 0 < self.K_phi <= 1:
      raise ParameterError('K(phi) lies in (0, 1]')

  @classmethod
  def weight(cls, base):
    return cls('Weight', base=base)

  @classmethod
  def exponent(cls, f):
    return cls('Exponent', f=f)

  @classmethod
  def brezis_nguyen(cls, phi, K_phi=None):
    return cls('BrezisNguyen', phi=phi, K_phi=K_phi)

  @classmethod
  def aubert_kornprobst(cls, rho):
    return cls('AubertKornprobst', rho=rho)

  @classmethod
  def spectral_fractional(cls, mu, M_max=64):
    return cls('SpectralFractional', mu=mu, M_max=M_max)

  @property
  def edge_values(self):
    """ Numeric positions of LowerEdge and UpperEdge. """
    return {'Weight': (0.0, math.inf), 'Exponent': (1.0, math.inf),
            'BrezisNguyen': (0.0, math.inf), 'AubertKornprobst': (0.0, math.inf),
            'SpectralFractional': (0.0, 1.0)}[self.variant]

  def validate_param(self, param: ExtendedParam):
    if self.variant == 'Exponent' and param.is_lower:
      raise ParameterError('p = 1 belongs to the exponent interval; use Interior(1)')
    if not param.is_interior:
      return param
    lo, hi = self.edge_values
    t = param.t
    inside = (lo <= t < hi) if self.variant == 'Exponent' else (lo < t < hi)
    if not inside:
      raise ParameterError('%s is outside the %s parameter interval' % (t, self.variant))
    return param

  def describe(self):
    d = {'variant': self.variant}
    if self.base is not None:
      d['base'] = self.base.describe()
    if self.f is not None:
      d['f'] = self.f.describe()
    if self.phi is not None:
      d['phi'] = self.phi.describe()
      d['K_phi'] = self.K_phi
    if self.rho is not None:
      d['rho'] = self.rho.describe()
    if self.mu is not None:
      d['mu'] = self.mu
      d['M_max'] = self.M_max
    return d


def eval_weight(alpha: ExtendedParam, base: BaseRegularizer, u: GridSignal) -> float:
  """ alpha R(u); 0 at alpha = 0; at alpha = inf the indicator of the set
      where R vanishes (constants, or {0} for QuadraticL2).
  """
  if alpha.is_lower:
    return 0.0
  if alpha.is_upper:
    if not base.vanishes_on_constants:
      return 0.0 if float(np.max(np.abs(u.values))) <= 1e-10 else math.inf
    return 0.0 if GridCore.is_constant(u) else math.inf
  return alpha.t * base(u)


def eval_exponent(p: ExtendedParam, f: DoubleIntegrand, u: GridSignal) -> float:
  """ Normalized L^p mean of f over Omega x Omega; the maximum of f at p = inf. """
  if p.is_upper:
    return GridCore.pair_max(f, u)
  if p.is_lower:
    raise ParameterError('the exponent family has no lower edge')
  pv = p.t
  if pv < 1:
    raise ParameterError('p must be >= 1, got %g' % pv)
  area = u.grid.domain.measure ** 2
  if pv <= LOG_SPACE_EXPONENT:
    total = GridCore.double_integral(lambda x, y, xi, zeta: f(x, y, xi, zeta) ** pv, u)
    return (total / area) ** (1.0 / pv)
  top = GridCore.pair_max(f, u)
  if top <= 0.0:
    return 0.0
  total = GridCore.double_integral(lambda x, y, xi, zeta: (f(x, y, xi, zeta) / top) ** pv, u)
  return top * math.exp((math.log(total) - math.log(area)) / pv) if total > 0 else 0.0


def eval_bn(delta: ExtendedParam, phi: PhiSpec, u: GridSignal, K_phi: Optional[float] = None) -> float:
  """ Brezis-Nguyen functional; K(phi) TV(u) at delta = 0 and 0 at delta = inf. """
  if delta.is_upper:
    return 0.0
  if delta.is_lower:
    if K_phi is None:
      raise ParameterError('the delta = 0 Brezis-Nguyen model needs K(phi)')
    return K_phi * GridCore.tv_discrete(u)
  d = delta.t
  n = u.grid.dim

  def integrand(x, y, xi, zeta):
    return phi(np.abs(xi - zeta) / d) / distance(x, y) ** (n + 1)

  return d * GridCore.double_integral(integrand, u, symmetric=True)


def eval_ak(delta: ExtendedParam, rho: RhoSpec, u: GridSignal) -> float:
  """ Aubert-Kornprobst functional; kappa_n TV(u) at delta = 0 and 0 at delta = inf. """
  if delta.is_upper:
    return 0.0
  if delta.is_lower:
    return kappa_n(u.grid.dim) * GridCore.tv_discrete(u)
  d = delta.t
  n = u.grid.dim

  def integrand(x, y, xi, zeta):
    r = distance(x, y)
    return np.abs(xi - zeta) / r * rho(r / d)

  reach = None if rho.support is None else rho.support * d
  return d ** (-n) * GridCore.double_integral(integrand, u, symmetric=True, max_distance=reach)


def r_tilde_ak(u: GridSignal) -> float:
  """ Double integral of |u(x)-u(y)| / |x-y|, the large-delta profile of the AK family. """
  return GridCore.double_integral(lambda x, y, xi, zeta: np.abs(xi - zeta) / distance(x, y), u, symmetric=True)


def r_tilde_bn(u: GridSignal, phi: PhiSpec) -> float:
  """ c times the double integral of |u(x)-u(y)|^r / |x-y|^(n+1) for phi = c t^r near zero. """
  power = phi.power_near_zero
  if power is None:
    raise ParameterError('phi is not a pure power near zero')
  c, r = power
  n = u.grid.dim
  return c * GridCore.double_integral(
      lambda x, y, xi, zeta: np.abs(xi - zeta) ** r / distance(x, y) ** (n + 1), u, symmetric=True)


def bn_large_delta_identity(delta: float, phi: PhiSpec, u: GridSignal):
  """ For delta beyond the oscillation of u, R_delta(u) = delta^(1-r) R~(u).

      Returns:
        (R_delta(u), delta^(1-r) R~(u), applicable)
  """
  c, r = phi.power_near_zero or (None, None)
  if r is None:
    raise ParameterError('phi is not a pure power near zero')
  osc = float(np.max(u.values) - np.min(u.values))
  lhs = eval_bn(ExtendedParam.interior(delta), phi, u)
  rhs = delta ** (1.0 - r) * r_tilde_bn(u, phi)
  return lhs, rhs, osc / delta <= 1.0


def eval_family(family: FamilySpec, param: ExtendedParam, u: GridSignal) -> float:
  """ R_lambda(u) for any family and any point of the closed interval. """
  family.validate_param(param)
  if family.variant == 'Weight':
    return eval_weight(param, family.base, u)
  if family.variant == 'Exponent':
    return eval_exponent(param, family.f, u)
  if family.variant == 'BrezisNguyen':
    return eval_bn(param, family.phi, u, family.K_phi)
  if family.variant == 'AubertKornprobst':
    return eval_ak(param, family.rho, u)
  from . import SpectralFractional
  return SpectralFractional.eval_fractional(family, param, u)


def _ramp(points):
  grid = GridCore.Grid(GridCore.Domain.interval(0.0, 1.0), points)
  return GridSignal.from_function(grid, lambda x: x)


def estimate_K_phi(phi: PhiSpec, points: int = 1024, deltas=None, rtol: float = 5e-3) -> float:
  """ Numerical estimate of the Brezis-Nguyen constant K(phi).

      R_delta is evaluated on the ramp u(x) = x over (0, 1), divided by
      TV(u), and fitted against 1, delta log(1/delta) and delta; the constant
      term is the delta -> 0 limit. The default deltas sit half a grid
      spacing off the nodes and never go below 16 spacings. A pointwise
      limit only bounds K(phi) from above, so the estimate is clamped to (0, 1].

      Parameters:
        phi (PhiSpec): must be positive on (0, inf)
        points (int): grid resolution
        deltas (list): optional delta sequence in (0, 1]
        rtol (float): largest relative fit residual accepted
      Returns:
        float
  """
  if phi.n != 1:
    phi = PhiSpec(phi.variant, 1, phi.callback)
  if not phi.check()['H5']['holds']:
    logger.warning('phi vanishes on part of (0, inf); the K(phi) estimate is heuristic')
  u = _ramp(points)
  h = u.grid.h
  if deltas is None:
    deltas = [(16.0 * 2 ** j + 0.5) * h for j in range(6)]
  deltas = np.array(sorted(deltas), dtype=float)
  if deltas.size < 4:
    raise EstimationError('need at least four deltas to estimate K(phi)')
  if deltas[-1] > 1.0:
    raise EstimationError('deltas must not exceed the domain length')
  tv = GridCore.tv_discrete(u)
  ratios = np.array([eval_bn(ExtendedParam.interior(d), phi, u) / tv for d in deltas])
  design = np.column_stack([np.ones_like(deltas), deltas * np.log(1.0 / deltas), deltas])
  coef, *_ = np.linalg.lstsq(design, ratios, rcond=None)
  residual = float(np.max(np.abs(design @ coef - ratios)))
  logger.debug('K(phi) ratios %s, fit %s, residual %.3g', ratios, coef, residual)
  if not math.isfinite(coef[0]) or residual > rtol * abs(coef[0]):
    raise EstimationError('K(phi) fit did not settle (residual %.3g)' % residual)
  return float(min(max(coef[0], np.finfo(float).tiny), 1.0))
