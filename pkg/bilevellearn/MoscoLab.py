import dataclasses
import logging
import math
import warnings
from typing import List, Optional

import numpy as np
from scipy import optimize

from . import GridCore
from . import Regularizers
from .Errors import EstimationError, GridMismatchError, ParameterError
from .GridCore import Grid, GridSignal
from .Regularizers import ExtendedParam, FamilySpec

""" Numerical diagnostics for the limit tables of the regularizer families:
    regularizer values along parameter sequences and recovery sequences,
    extrapolated limits and the monotonicity bounds between parameters.
"""

logger = logging.getLogger(__name__)

MODELS = ('power-law', 'linear-in-1/k')
MIN_SPACINGS = Regularizers.MIN_DELTA_SPACINGS


@dataclasses.dataclass
class SequenceScan:
  """ Values R_{lambda_k}(u_k) along a parameter sequence, next to the value
      the regularizers module gives at the target parameter.

      Attributes:
        family (FamilySpec)
        target (ExtendedParam)
        sequence (list): the parameters lambda_k
        values (list): R_{lambda_k}(u_k)
        rule (str): recovery rule, 'constant', 'scaled' or 'custom'
        expected (float): R at the target, from the edge evaluators
        extrapolated (float): fitted limit of the values
        rate (float), r2 (float): fit exponent and quality
        bounds (list): certified upper bounds per k, when the scan has them
  """
  family: FamilySpec
  target: ExtendedParam
  sequence: List[float]
  values: List[float]
  rule: str
  expected: float
  extrapolated: float = math.nan
  rate: float = math.nan
  r2: float = math.nan
  bounds: Optional[List[float]] = None
  note: str = ''
  identity_residual: float = math.nan

  @property
  def rel_gap(self):
    """ Relative gap of the extrapolated limit; absolute when the expected limit is zero. """
    gap = abs(self.extrapolated - self.expected)
    return gap if self.expected == 0.0 else gap / abs(self.expected)

  @property
  def finite(self):
    return all(math.isfinite(v) for v in self.values)

  def within_bounds(self, slack=1e-12):
    if self.bounds is None:
      return True
    return all(v <= b * (1 + slack) + slack for v, b in zip(self.values, self.bounds))

  def rows(self):
    """ CSV rows (param, value, bound, expected). """
    bounds = self.bounds or [math.nan] * len(self.values)
    return [{'param': t, 'value': v, 'bound': b, 'expected': self.expected}
            for t, v, b in zip(self.sequence, self.values, bounds)]

  def to_json(self):
    return {'family': self.family.describe(), 'target': self.target.to_json(), 'rule': self.rule,
            'sequence': list(self.sequence), 'values': list(self.values), 'bounds': self.bounds,
            'expected': self.expected, 'extrapolated': self.extrapolated, 'rate': self.rate,
            'r2': self.r2, 'rel_gap': self.rel_gap, 'identity_residual': self.identity_residual,
            'note': self.note}

  def show(self):
    print('SEQUENCE SCAN (%s family, %s recovery, target %s)' % (self.family.variant, self.rule, self.target.label()))
    print('{:<{width}s}{:>22s}{:>22s}'.format('Parameter', 'Value', 'Bound', width=22))
    for row in self.rows():
      print('{:<{width}s}{:>22s}{:>22s}'.format('%.10g' % row['param'], '%.12g' % row['value'],
                                                 '%.6g' % row['bound'], width=22))
    print()
    print('{:<{width}s}{:>22s}'.format('Expected limit', '%.12g' % self.expected, width=22))
    print('{:<{width}s}{:>22s}'.format('Extrapolated', '%.12g' % self.extrapolated, width=22))
    print('{:<{width}s}{:>22s}'.format('Relative gap', '%.3g' % self.rel_gap, width=22))
    if self.note:
      print(self.note)


def _distance_to_target(target: ExtendedParam, family: FamilySpec, t):
  """ Abscissa that goes to zero as t approaches the target. """
  if target.is_interior:
    return abs(t - target.t)
  lo, hi = family.edge_values
  if target.is_lower:
    return t - lo
  return 1.0 / t if math.isinf(hi) else hi - t


def _fill_limit(scan: SequenceScan, xs, model='power-law'):
  if len(scan.values) < 4:
    return scan
  nonzero = [(x, v) for x, v in zip(xs, scan.values) if x != 0.0]
  if len(nonzero) < len(scan.values):
    # the sequence already sits on the target
    exact = [v for x, v in zip(xs, scan.values) if x == 0.0]
    scan.extrapolated, scan.rate, scan.r2 = exact[-1], 0.0, 1.0
    return scan
  try:
    scan.extrapolated, scan.rate, scan.r2 = extrapolate([v for _, v in nonzero], [x for x, _ in nonzero], model)
  except EstimationError as e:
    scan.note = str(e)
  return scan


def scan_constant(family: FamilySpec, target: ExtendedParam, sequence, u: GridSignal, model='power-law'):
  """ Constant recovery sequence u_k = u: evaluates R_{lambda_k}(u) and
      extrapolates the values towards the target parameter.
      Parameters:
        family (FamilySpec)
        target (ExtendedParam): the limit parameter
        sequence (list): interior parameters converging to the target
        u (GridSignal)
        model (str): extrapolation model
      Returns:
        SequenceScan
  """
  family.validate_param(target)
  seq = [float(t) for t in sequence]
  values = [Regularizers.eval_family(family, ExtendedParam.interior(t), u) for t in seq]
  expected = Regularizers.eval_family(family, target, u)
  scan = SequenceScan(family, target, seq, values, 'constant', expected)
  if family.variant in ('BrezisNguyen', 'AubertKornprobst') and target.is_lower:
    h = min(u.grid.spacing)
    if min(seq) < MIN_SPACINGS * h:
      logger.warning('delta below %d grid spacings; the discrete limit degenerates', MIN_SPACINGS)
    scan.note = 'scan stops at delta >= %d h' % MIN_SPACINGS
    if family.variant == 'BrezisNguyen':
      scan.note = 'heuristic (constant sequence, limit is an upper bound); ' + scan.note
  xs = [_distance_to_target(target, family, t) for t in seq]
  if model == 'linear-in-1/k':
    xs = list(range(1, len(seq) + 1))
  return _fill_limit(scan, xs, model)


def scan_scaled_bn(delta_target: float, deltas, phi, u: GridSignal):
  """ Scaled recovery sequence u_k = (delta_k / delta) u of the Brezis-Nguyen
      family; R_{delta_k}(u_k) = (delta_k / delta) R_delta(u) exactly.
      The identity residual is kept in the note.
  """
  if not delta_target > 0 or math.isinf(delta_target):
    raise ParameterError('the scaled recovery needs an interior delta')
  family = FamilySpec.brezis_nguyen(phi)
  seq = [float(d) for d in deltas]
  values = [Regularizers.eval_bn(ExtendedParam.interior(d), phi, u * (d / delta_target)) for d in seq]
  expected = Regularizers.eval_bn(ExtendedParam.interior(delta_target), phi, u)
  identity = max((abs(v - d / delta_target * expected) for v, d in zip(values, seq)), default=0.0)
  scan = SequenceScan(family, ExtendedParam.interior(delta_target), seq, values, 'scaled', expected)
  scan.identity_residual = identity / max(abs(expected), 1e-300)
  scan.note = 'identity residual %.3g' % scan.identity_residual
  return _fill_limit(scan, [abs(d - delta_target) for d in seq])


def scan_bn_vanishing(deltas, phi, u: GridSignal):
  """ Brezis-Nguyen values for delta_k -> inf against the certified bound
      a Lip(u)^2 / delta_k times the double integral of |x-y|^(1-n).
  """
  family = FamilySpec.brezis_nguyen(phi)
  seq = [float(d) for d in deltas]
  n = u.grid.dim
  lip = GridCore.lipschitz_constant(u)
  mass = GridCore.double_integral(lambda x, y, xi, zeta: GridCore.distance(x, y) ** (1 - n), u, symmetric=True)
  values = [Regularizers.eval_bn(ExtendedParam.interior(d), phi, u) for d in seq]
  bounds = [phi.a * lip * lip / d * mass for d in seq]
  scan = SequenceScan(family, ExtendedParam.upper(), seq, values, 'constant', 0.0, bounds=bounds)
  if not scan.within_bounds():
    logger.warning('Brezis-Nguyen values exceed their large-delta bound')
  return _fill_limit(scan, [1.0 / d for d in seq])


def _power_design(x, rate):
  return np.column_stack([np.ones_like(x), x ** rate])


def extrapolate(values, params, model='power-law'):
  """ Limit of a sequence from a least-squares fit.

      'power-law': value_k = limit + C param_k^rate, the rate by a bounded
      scalar search over the linear fits, then polished by curve_fit.
      'linear-in-1/k': value_k = limit + C / param_k, rate reported as -1.

      Parameters:
        values (list): at least 4 values
        params (list): positive abscissae
        model (str)
      Returns:
        (limit, rate, r2)
  """
  if model not in MODELS:
    raise ParameterError('unknown extrapolation model %r' % model)
  v = np.asarray(values, dtype=float)
  x = np.asarray(params, dtype=float)
  if v.size < 4 or v.size != x.size:
    raise EstimationError('extrapolation needs at least four (param, value) pairs')
  if np.any(x <= 0) or not np.all(np.isfinite(v)):
    raise EstimationError('extrapolation needs positive params and finite values')
  sst = float(np.sum((v - v.mean()) ** 2))
  scale = max(float(np.max(np.abs(v))), 1e-300)
  if sst <= (1e-14 * scale) ** 2 * v.size:
    return float(v.mean()), 0.0, 1.0

  if model == 'linear-in-1/k':
    design = _power_design(x, -1.0)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    ssr = float(np.sum((design @ coef - v) ** 2))
    return float(coef[0]), -1.0, 1.0 - ssr / sst

  def ssr(rate):
    design = _power_design(x, rate)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return float(np.sum((design @ coef - v) ** 2))

  # rates of one sign only: the abscissae go to zero or to infinity
  bounds = (1e-3, 6.0) if x[-1] < x[0] else (-6.0, -1e-3)
  found = optimize.minimize_scalar(ssr, bounds=bounds, method='bounded', options={'xatol': 1e-12})
  rate = float(found.x)
  coef, *_ = np.linalg.lstsq(_power_design(x, rate), v, rcond=None)
  p0 = [float(coef[0]), float(coef[1]), rate]

  def model_fn(xx, limit, c, r):
    return limit + c * xx ** r

  try:
    with warnings.catch_warnings():
      warnings.simplefilter('ignore', optimize.OptimizeWarning)
      popt, _ = optimize.curve_fit(model_fn, x, v, p0=p0, ftol=1e-15, xtol=1e-15, gtol=1e-15, maxfev=20000)
    limit, rate = float(popt[0]), float(popt[2])
    resid = float(np.sum((model_fn(x, *popt) - v) ** 2))
  except (RuntimeError, ValueError) as e:
    logger.debug('curve_fit polish failed (%s); keeping the scalar search fit', e)
    limit, resid = p0[0], ssr(rate)
  if resid > ssr(p0[2]):
    limit, rate, resid = p0[0], p0[2], ssr(p0[2])
  logger.debug('extrapolated limit %.12g, rate %.6g', limit, rate)
  return limit, rate, 1.0 - resid / sst


def certify_monotonicity(family: FamilySpec, pairs, signals, slack=1e-10):
  """ Monotonicity between two parameters of the same family.

      Exponent (q <= p): R_q(u) <= R_p(u), Hoelder for normalized means.
      Aubert-Kornprobst (delta <= delta_bar): R_delta(u) <= (delta_bar / delta)^n R_delta_bar(u).

      Parameters:
        family (FamilySpec)
        pairs (list): (small, large) parameter pairs
        signals (list): GridSignal samples
      Returns:
        list of dicts with lhs, rhs and holds per (pair, signal)
  """
  if family.variant not in ('Exponent', 'AubertKornprobst'):
    raise ParameterError('monotonicity bounds exist for the exponent and AK families')
  out = []
  for small, large in pairs:
    if small > large:
      raise ParameterError('pairs must be ordered (small, large)')
    for k, u in enumerate(signals):
      lo = Regularizers.eval_family(family, ExtendedParam.interior(small), u)
      hi = Regularizers.eval_family(family, ExtendedParam.interior(large), u)
      if family.variant == 'AubertKornprobst':
        hi *= (large / small) ** u.grid.dim
      holds = lo <= hi + slack * max(1.0, abs(hi))
      out.append({'pair': (small, large), 'signal': k, 'lhs': lo, 'rhs': hi, 'holds': holds})
  failed = sum(1 for r in out if not r['holds'])
  if failed:
    logger.warning('%d monotonicity checks failed', failed)
  return out


def sawtooth(x):
  """ Piecewise linear sawtooth on [0, 1]: slope 1, then -1, then 1, zero at both ends. """
  x = np.asarray(x, dtype=float)
  return np.where(x <= 0.25, x, np.where(x <= 0.75, 0.5 - x, x - 1.0))


def _unit(grid: Grid, axis):
  a, b = grid.domain.bounds[axis]
  return (grid.nodes[:, axis] - a) / (b - a)


def probe_battery(grid: Grid, seed=0):
  """ Fixed probe signals: ramp, sawtooth, single sine mode, step and a
      random Lipschitz signal, in unit coordinates of the domain.
  """
  rng = np.random.default_rng(seed)
  x = _unit(grid, 0)
  y = _unit(grid, 1) if grid.dim == 2 else np.zeros_like(x)
  probes = {'ramp': x + y,
            'sawtooth': sawtooth(x) + (sawtooth(y) if grid.dim == 2 else 0.0),
            'sine': np.sin(np.pi * x) * (np.sin(np.pi * y) if grid.dim == 2 else 1.0),
            'step': np.where(x < 0.5, 0.0, 1.0)}
  if grid.dim == 1:
    steps = rng.uniform(-1.0, 1.0, grid.size - 1) * grid.spacing[0]
    probes['random'] = np.concatenate([[0.0], np.cumsum(steps)])
  else:
    k = rng.integers(1, 4, size=(3, 2))
    phase = rng.uniform(0.0, 2.0 * np.pi, 3)
    probes['random'] = sum(np.sin(np.pi * (k[i, 0] * x + k[i, 1] * y) + phase[i]) / 3.0 for i in range(3))
  return {name: GridSignal(grid, vals) for name, vals in probes.items()}


def random_signals(grid: Grid, count, seed=0):
  rng = np.random.default_rng(seed)
  return [GridSignal(grid, rng.normal(size=grid.size)) for _ in range(count)]


class OscillationReport:
  """ u_k = sin(k x) on a 1D domain: the squared norms stay at |Omega| / 2
      while the inner products with a fixed signal tend to zero, so the
      sequence converges weakly but not strongly to zero.
  """
  def __init__(self, ks, norms_sq, inners, half_measure):
    self.ks = list(ks)
    self.norms_sq = list(norms_sq)
    self.inners = list(inners)
    self.half_measure = half_measure

  def rows(self):
    return [{'param': k, 'value': n, 'bound': i, 'expected': self.half_measure}
            for k, n, i in zip(self.ks, self.norms_sq, self.inners)]

  def to_json(self):
    return {'ks': self.ks, 'norms_sq': self.norms_sq, 'inners': self.inners, 'half_measure': self.half_measure}

  def show(self):
    print('OSCILLATING SEQUENCE sin(kx)')
    print('{:<{width}s}{:>20s}{:>20s}'.format('k', '||u_k||^2', '<u_k, g>', width=8))
    for k, n, i in zip(self.ks, self.norms_sq, self.inners):
      print('{:<{width}s}{:>20s}{:>20s}'.format(str(k), '%.10g' % n, '%.3e' % i, width=8))
    print('|Omega| / 2 = %.10g' % self.half_measure)


def oscillation_demo(grid: Grid, ks=(1, 2, 4, 8, 16, 32, 64), test_signal: Optional[GridSignal] = None):
  if grid.dim != 1:
    raise ParameterError('the oscillation demo runs on 1D grids')
  if test_signal is None:
    test_signal = GridSignal(grid, np.exp(-grid.nodes[:, 0] ** 2))
  if not test_signal.grid.same_as(grid):
    raise GridMismatchError("the test signal lives on another grid")
  norms, inners = [], []
  for k in ks:
    u_k = GridSignal(grid, np.sin(k * grid.nodes[:, 0]))
    norms.append(GridCore.l2_norm_sq(u_k))
    inners.append(GridCore.l2_inner(u_k, test_signal))
  return OscillationReport(ks, norms, inners, grid.domain.measure / 2.0)
