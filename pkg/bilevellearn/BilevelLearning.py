"""
Bi-level parameter learning over the closed parameter interval.

The upper level picks the family parameter that makes the lower level
reconstructions closest to the clean training data. Parameters at the edges
of the interval are evaluated through their Mosco-limit models, so the
learned optimum is allowed to sit on the boundary and is then classified as
such.
"""
import concurrent.futures
import dataclasses
import logging
import math
from typing import List

import numpy as np

from . import GridCore
from . import LowerSolvers
from . import Regularizers
from . import SolverUtilities
from . import SpectralFractional
from .Errors import ParameterError, SolverError
from .GridCore import GridSignal, TrainingSet
from .Regularizers import ExtendedParam, FamilySpec

logger = logging.getLogger(__name__)

TRANSFORMS = ('linear', 'log', 's-linear', 'inv-linear')
RELAXATION_NEIGHBOURS = 5


@dataclasses.dataclass(frozen=True)
class ParamGrid:
  """ Sampling grid of interior parameters, optionally with both edges.

      Attributes:
        transform (str): 'linear', 'log', 's-linear' (order s in (0, 1))
          or 'inv-linear' (uniform in 1/p)
        lo, hi (float): interior range, lo < hi
        count (int): number of interior samples, >= 3
        include_edges (bool)
  """
  transform: str
  lo: float
  hi: float
  count: int
  include_edges: bool = True

  def __post_init__(self):
    if self.transform not in TRANSFORMS:
      raise ParameterError('unknown grid transform %r' % self.transform)
    if self.count < 3:
      raise ParameterError('a parameter grid needs at least 3 points')
    if not self.lo < self.hi:
      raise ParameterError('parameter grid needs lo < hi')
    if self.transform == 'log' and self.lo <= 0:
      raise ParameterError('log grids need lo > 0')
    if self.transform == 's-linear' and not (0 < self.lo and self.hi < 1):
      raise ParameterError('order grids must lie inside (0, 1)')

  @classmethod
  def parse(cls, text, include_edges=True):
    """ 'lo:hi:count:transform', the CLI spelling. """
    parts = text.split(':')
    if len(parts) != 4:
      raise ParameterError('expected lo:hi:count:transform, got %r' % text)
    return cls(parts[3], float(parts[0]), float(parts[1]), int(parts[2]), include_edges)

  def forward(self, t):
    if self.transform == 'log':
      return math.log(t)
    if self.transform == 'inv-linear':
      return 1.0 / t
    return t

  def backward(self, z):
    if self.transform == 'log':
      return math.exp(z)
    if self.transform == 'inv-linear':
      return 1.0 / z
    return z

  def values(self):
    z = np.linspace(self.forward(self.lo), self.forward(self.hi), self.count)
    vals = [self.backward(float(v)) for v in z]
    vals[0], vals[-1] = self.lo, self.hi
    return sorted(vals)

  def approach(self, family: FamilySpec, edge: ExtendedParam):
    """ RELAXATION_NEIGHBOURS interior parameters beyond the grid that
        close in on an edge geometrically, nearest last.
    """
    lo_edge, hi_edge = family.edge_values
    ks = range(1, RELAXATION_NEIGHBOURS + 1)
    if edge.is_lower:
      ts = [lo_edge + (self.lo - lo_edge) * 10.0 ** -k for k in ks]
    elif math.isinf(hi_edge):
      ts = [self.hi * 10.0 ** k for k in ks]
    else:
      ts = [hi_edge - (hi_edge - self.hi) * 10.0 ** -k for k in ks]
    return [ExtendedParam.interior(t) for t in ts]

  def params(self, family: FamilySpec):
    out = [ExtendedParam.interior(t) for t in self.values()]
    if self.include_edges:
      if family.variant != 'Exponent':
        out.insert(0, ExtendedParam.lower())
      out.append(ExtendedParam.upper())
    for p in out:
      family.validate_param(p)
    return out

  def to_json(self):
    return dataclasses.asdict(self)


@dataclasses.dataclass
class Sample:
  param: ExtendedParam
  I_bar: float
  distances: List[float]
  converged: bool = True
  methods: List[str] = dataclasses.field(default_factory=list)
  refined: bool = False
  non_unique: bool = False
  error: str = ''

  def to_json(self):
    d = {'param': self.param.to_json(), 'I_bar': self.I_bar, 'distances': self.distances,
         'converged': self.converged, 'methods': self.methods, 'refined': self.refined,
         'non_unique': self.non_unique}
    if self.error:
      d['error'] = self.error
    return d


def _thread_count(threads):
  return max(1, int(threads or 1))


def extended_upper(family: FamilySpec, param: ExtendedParam, training: TrainingSet, cfg=None, threads=1):
  """ The extended upper level functional at one point of the closed interval.

      Parameters:
        family (FamilySpec)
        param (ExtendedParam)
        training (TrainingSet)
        cfg (SolverConfig)
        threads (int): training pairs solved concurrently
      Returns:
        (I_bar, reconstructions): the summed squared distances and one
        SolveResult per training pair
  """
  cfg = cfg or LowerSolvers.SolverConfig()
  family.validate_param(param)

  def solve(pair):
    clean, noisy = pair
    return LowerSolvers.solve_family(family, param, noisy, cfg)

  if _thread_count(threads) > 1 and training.N > 1:
    with concurrent.futures.ThreadPoolExecutor(_thread_count(threads)) as pool:
      results = list(pool.map(solve, training.pairs))
  else:
    results = [solve(pair) for pair in training.pairs]
  return math.fsum(_distances(results, training)), results


def _distances(results, training):
  return [GridCore.l2_distance_sq(r.minimizer, c) for r, c in zip(results, training.clean)]


def _evaluate(family, param, training, cfg):
  try:
    value, results = extended_upper(family, param, training, cfg)
  except SolverError as e:
    logger.warning('lower level solve failed at %s: %s', param.label(), e)
    return Sample(param, math.nan, [], False, [], error=str(e))
  return Sample(param, value, _distances(results, training), all(r.converged for r in results),
                [r.method for r in results], non_unique=any(r.non_unique for r in results))


class LearnReport:
  """ Samples of the extended upper level functional, the sampled
      minimizer and the data condition checks of the family.
  """
  def __init__(self):
    self.family = None
    self.grid = None
    self.samples = []
    self.argmin = None
    self.I_min = math.nan
    self.interior = False
    self.conditions = {}
    self.approach = {}
    self.stats = {}
    self.ErrorMessage = ''

  def interior_samples(self):
    return [s for s in self.samples if s.param.is_interior and not math.isnan(s.I_bar)]

  def relaxation_check(self, slack=1e-6):
    """ Necessary form of the lower bound property: an edge value lies
        below the lim inf of I towards that edge, hence below the largest
        of the interior samples nearest to it. The approach samples are
        used when learn computed them, the grid samples otherwise.
    """
    inner = sorted(self.interior_samples(), key=lambda s: s.param.t)
    out = {}
    for s in self.samples:
      if s.param.is_interior or math.isnan(s.I_bar):
        continue
      near = [a for a in self.approach.get(s.param.variant, []) if not math.isnan(a.I_bar)]
      if not near:
        near = inner[:RELAXATION_NEIGHBOURS] if s.param.is_lower else inner[-RELAXATION_NEIGHBOURS:]
      if not near:
        continue
      bound = max(n.I_bar for n in near)
      out[s.param.variant] = {'value': s.I_bar, 'bound': bound, 'holds': s.I_bar <= bound + slack}
    return out

  def verdict(self):
    return structure_report(self)[0]

  def to_json(self):
    return {'family': self.family.describe(),
            'grid': self.grid.to_json() if self.grid is not None else None,
            'samples': [s.to_json() for s in self.samples],
            'argmin': self.argmin.to_json() if self.argmin is not None else None,
            'I_min': self.I_min,
            'interior': self.interior,
            'conditions': self.conditions,
            'relaxation': self.relaxation_check(),
            'approach': {k: [s.to_json() for s in v] for k, v in sorted(self.approach.items())},
            'stats': self.stats,
            'verdict': self.verdict()}

  def show(self):
    if not self.samples:
      print('Nothing to show')
      return
    print('BI-LEVEL LEARNING RESULTS (%s family)' % self.family.variant)
    print('{:<{width}s}{:>24s}{:>12s}'.format('Parameter', 'I_bar', 'Converged', width=26))
    for s in self.samples:
      mark = ' *' if s.refined else ''
      print('{:<{width}s}{:>24s}{:>12s}'.format(s.param.label() + mark, '%.12g' % s.I_bar,
                                                  str(s.converged), width=26))
    print()
    print('{:<{width}s}{:>24s}'.format('Argmin', self.argmin.label(), width=26))
    print('{:<{width}s}{:>24s}'.format('Minimal I_bar', '%.12g' % self.I_min, width=26))
    print('{:<{width}s}{:>24s}'.format('Interior', str(self.interior), width=26))
    if self.conditions:
      print()
      print('{:<{width}s}{:>24s}{:>8s}'.format('Condition', 'Value', 'Holds', width=26))
      for name in sorted(self.conditions):
        c = self.conditions[name]
        if not isinstance(c, dict):
          continue
        value = c.get('value')
        text = '%.6g' % value if isinstance(value, (int, float)) else str(value)
        print('{:<{width}s}{:>24s}{:>8s}'.format(name, text, str(c.get('holds')), width=26))
    print()
    print(self.verdict())


def _refine(family, training, grid, samples, refine_iters, cfg):
  inner = [s for s in samples if s.param.is_interior and not math.isnan(s.I_bar)]
  if refine_iters <= 0 or len(inner) < 3:
    return []
  inner.sort(key=lambda s: s.param.t)
  k = min(range(len(inner)), key=lambda i: (inner[i].I_bar, inner[i].param.t))
  a = grid.forward(inner[max(k - 1, 0)].param.t)
  b = grid.forward(inner[min(k + 1, len(inner) - 1)].param.t)
  seen = {}

  def value(z):
    t = grid.backward(z)
    s = _evaluate(family, ExtendedParam.interior(t), training, cfg)
    s.refined = True
    seen[t] = s
    return s.I_bar if not math.isnan(s.I_bar) else math.inf

  SolverUtilities.golden_section(value, a, b, tol=1e-12 * max(1.0, abs(b - a)), max_iters=refine_iters)
  logger.info('refined %d points around %s', len(seen), inner[k].param.label())
  return list(seen.values())


def condition_checks(family: FamilySpec, training: TrainingSet):
  """ The data condition map that fits the family, {} when none applies. """
  try:
    if family.variant == 'Weight':
      return check_weight_conditions(training, family.base)
    if family.variant == 'Exponent':
      return check_exponent_conditions(training, family.f)
    if family.variant in ('BrezisNguyen', 'AubertKornprobst'):
      return check_delta_conditions(training, family)
    basis = SpectralFractional.build_basis(training.grid.domain, family.M_max)
    return SpectralFractional.check_conditions(training, family.mu, basis).to_json()
  except ParameterError as e:
    logger.info('no condition checks for this family: %s', e)
    return {}


def learn(family: FamilySpec, training: TrainingSet, grid: ParamGrid, refine_iters: int = 0,
          cfg=None, threads=1, conditions=True, approach=True) -> LearnReport:
  """ Samples the extended upper level functional on the grid (edges
      included), refines around the best interior sample by golden section
      and classifies the sampled argmin.

      Parameters:
        family (FamilySpec)
        training (TrainingSet)
        grid (ParamGrid)
        refine_iters (int): golden section steps, 0 for none
        cfg (SolverConfig)
        threads (int): grid points evaluated concurrently
        conditions (bool): attach the data condition checks
        approach (bool): sample I on sequences closing in on each edge
          for the relaxation check
      Returns:
        LearnReport
  """
  cfg = cfg or LowerSolvers.SolverConfig()
  params = grid.params(family)
  tails = []
  if approach:
    floor = Regularizers.MIN_DELTA_SPACINGS * min(training.grid.spacing)
    for edge in params:
      if edge.is_interior:
        continue
      near = grid.approach(family, edge)
      if edge.is_lower and family.variant in ('BrezisNguyen', 'AubertKornprobst'):
        near = [p for p in near if p.t >= floor]
      tails += [(edge.variant, p) for p in near]
  logger.info('learning %s over %d parameters (%d approach points)', family.variant, len(params), len(tails))
  todo = params + [p for _, p in tails]
  if _thread_count(threads) > 1:
    with concurrent.futures.ThreadPoolExecutor(_thread_count(threads)) as pool:
      evaluated = list(pool.map(lambda p: _evaluate(family, p, training, cfg), todo))
  else:
    evaluated = [_evaluate(family, p, training, cfg) for p in todo]
  samples = evaluated[:len(params)]
  approach_samples = {}
  for (variant, _), s in zip(tails, evaluated[len(params):]):
    approach_samples.setdefault(variant, []).append(s)
  samples += _refine(family, training, grid, samples, refine_iters, cfg)
  samples.sort(key=lambda s: s.param.sort_key())

  report = LearnReport()
  report.family = family
  report.grid = grid
  report.samples = samples
  report.approach = approach_samples
  valid = [s for s in samples if not math.isnan(s.I_bar)]
  if not valid:
    report.ErrorMessage = 'every lower level solve failed'
    raise SolverError(report.ErrorMessage, report)
  best = min(valid, key=lambda s: (s.I_bar, s.param.sort_key()))
  report.argmin = best.param
  report.I_min = best.I_bar
  report.interior = best.param.is_interior
  if conditions:
    report.conditions = condition_checks(family, training)
  report.stats = {'samples': len(samples),
                  'failed': sum(1 for s in samples if math.isnan(s.I_bar)),
                  'not_converged': sum(1 for s in samples if not s.converged),
                  'refined': sum(1 for s in samples if s.refined),
                  'non_unique': any(s.non_unique for s in samples),
                  'solver': cfg.to_json()}
  logger.info('argmin %s, I_bar %.12g, interior %s', best.param.label(), best.I_bar, report.interior)
  return report


def _cond(value, holds):
  return {'value': value, 'holds': bool(holds)}


def check_weight_conditions(training: TrainingSet, base, seed=0):
  """ Data conditions for the weight family.

      H1: R vanishes on constants, is positive on the non-constant training
          signals and passes midpoint convexity spot checks (QuadraticL2 fails).
      H2: continuity, structural for the builtin bases.
      H3: sum R(u_c) < sum R(u_eta).
      H4: sum ||u_eta - u_c||^2 < sum ||mean(u_eta) - u_c||^2.
      H4_suff: ||mean(u_c) - u_c|| > d (1 + |Omega|^(-1/2)) for every pair,
          with d the largest noise level ||u_eta - u_c||.
  """
  grid = training.grid
  rng = np.random.default_rng(seed)
  signals = training.clean + training.noisy
  at_const = base(GridSignal.constant(grid, 1.0))
  positive = all(base(u) > 0 for u in signals if not GridCore.is_constant(u))
  convex_gap = 0.0
  for _ in range(5):
    i, j = rng.integers(len(signals), size=2)
    u = signals[i] + GridSignal(grid, rng.normal(0.0, 0.1, grid.size))
    v = signals[j]
    mid = base((u + v) * 0.5)
    convex_gap = max(convex_gap, mid - 0.5 * (base(u) + base(v)))
  scale = max(1.0, max(abs(base(u)) for u in signals))
  h1 = abs(at_const) <= 1e-12 and positive and convex_gap <= 1e-10 * scale
  out = {'H1': _cond(at_const, h1),
         'H2': _cond(None, base.variant != 'Custom')}
  rc = math.fsum(base(u) for u in training.clean)
  rn = math.fsum(base(u) for u in training.noisy)
  out['H3'] = _cond(rn - rc, rc < rn)
  noise = math.fsum(GridCore.l2_distance_sq(n, c) for c, n in training.pairs)
  mean_err = math.fsum(GridCore.l2_distance_sq(GridSignal.constant(grid, GridCore.mean_value(n)), c)
                       for c, n in training.pairs)
  out['H4'] = _cond(mean_err - noise, noise < mean_err)
  d = max(math.sqrt(GridCore.l2_distance_sq(n, c)) for c, n in training.pairs)
  spread = min(math.sqrt(GridCore.l2_distance_sq(GridSignal.constant(grid, GridCore.mean_value(c)), c))
               for c in training.clean)
  needed = d * (1.0 + grid.domain.measure ** -0.5)
  out['H4_suff'] = {'value': spread - needed, 'holds': spread > needed, 'delta': d}
  return out


def check_exponent_conditions(training: TrainingSet, f, q: float = 2.0, alpha: float = 1.0, seed=0):
  """ Data conditions for the exponent family at weight alpha.

      H4_p: sum R_q(u_c) < sum R_q(u_eta) for the given q.
      H5_p: sum R_inf(2 u_eta - u_c) < sum R_inf(u_eta).
      H1_p: growth bounds of f spot-checked on the training values.
      H2_p: separate convexity of f in each value argument, sampled.
  """
  if q < 1:
    raise ParameterError('q must be >= 1')
  pq = ExtendedParam.interior(q)
  top = ExtendedParam.upper()
  rc = math.fsum(alpha * Regularizers.eval_exponent(pq, f, c) for c in training.clean)
  rn = math.fsum(alpha * Regularizers.eval_exponent(pq, f, n) for n in training.noisy)
  out = {'H4_p': _cond(rn - rc, rc < rn)}
  left = math.fsum(alpha * Regularizers.eval_exponent(top, f, 2.0 * n - c) for c, n in training.pairs)
  right = math.fsum(alpha * Regularizers.eval_exponent(top, f, n) for n in training.noisy)
  out['H5_p'] = _cond(right - left, left < right)

  grid = training.grid
  rng = np.random.default_rng(seed)
  I, J, D = GridCore.node_pairs(grid)
  pick = rng.integers(I.size, size=min(I.size, 4096))
  x, y, d = grid.nodes[I[pick]], grid.nodes[J[pick]], D[pick]
  worst = -math.inf
  for u in training.clean + training.noisy:
    xi, zeta = u.values[I[pick]], u.values[J[pick]]
    fv = np.asarray(f(x, y, xi, zeta), dtype=float)
    jump = np.abs(xi - zeta) / d ** f.beta
    upper = f.M * (jump + np.abs(xi) + np.abs(zeta) + 1.0) - fv
    near = d < f.delta_growth
    lower = fv[near] - (jump[near] / f.M - f.M)
    worst = max(worst, -float(np.min(upper)), -float(np.min(lower)) if lower.size else -math.inf)
  out['H1_p'] = _cond(worst, worst <= 1e-12)
  xi1, xi2, zeta = rng.normal(size=(3, pick.size))
  mid_xi = np.asarray(f(x, y, 0.5 * (xi1 + xi2), zeta)) - 0.5 * (np.asarray(f(x, y, xi1, zeta))
                                                                 + np.asarray(f(x, y, xi2, zeta)))
  mid_zeta = np.asarray(f(x, y, zeta, 0.5 * (xi1 + xi2))) - 0.5 * (np.asarray(f(x, y, zeta, xi1))
                                                                   + np.asarray(f(x, y, zeta, xi2)))
  gap = float(max(np.max(mid_xi), np.max(mid_zeta)))
  out['H2_p'] = _cond(gap, gap <= 1e-12)
  return out


def check_delta_conditions(training: TrainingSet, family: FamilySpec, tv_solver=None):
  """ Data conditions for the Brezis-Nguyen and Aubert-Kornprobst families.

      H7: sum ||u_eta - u_c||^2 < sum ||w0 - u_c||^2, with w0 the
          reconstruction of the delta = 0 total variation model.
      H8: sum R~(u_c) < sum R~(u_eta), R~ the large-delta profile.
      The hook tv_solver(weight, u_eta) -> SolveResult replaces solve_tv.
  """
  tv_solver = tv_solver or LowerSolvers.solve_tv
  dim = training.grid.dim
  if family.variant == 'AubertKornprobst':
    if not family.rho.equals_one_near_zero:
      raise ParameterError('H8 needs a kernel rho equal to one near zero')
    weight = Regularizers.kappa_n(dim)
    r_tilde = Regularizers.r_tilde_ak
  elif family.variant == 'BrezisNguyen':
    if family.phi.power_near_zero is None:
      raise ParameterError('H8 needs phi = c t^r near zero')
    if family.K_phi is None:
      raise ParameterError('H7 needs K(phi)')
    weight = family.K_phi
    phi = family.phi

    def r_tilde(u):
      return Regularizers.r_tilde_bn(u, phi)
  else:
    raise ParameterError('delta conditions apply to the BN and AK families only')
  noise = math.fsum(GridCore.l2_distance_sq(n, c) for c, n in training.pairs)
  w0_err = math.fsum(GridCore.l2_distance_sq(tv_solver(weight, n).minimizer, c) for c, n in training.pairs)
  rc = math.fsum(r_tilde(c) for c in training.clean)
  rn = math.fsum(r_tilde(n) for n in training.noisy)
  return {'H7': _cond(w0_err - noise, noise < w0_err),
          'H8': _cond(rn - rc, rc < rn)}


def structure_report(report: LearnReport):
  """ Plain-language classification of a LearnReport.
      Returns:
        (str, dict): verdict text and its JSON form
  """
  conds = {k: v for k, v in report.conditions.items() if isinstance(v, dict) and 'holds' in v}
  failed = sorted(k for k, v in conds.items() if not v['holds'])
  held = sorted(k for k, v in conds.items() if v['holds'])
  where = report.argmin.label() if report.argmin is not None else 'none'
  if not conds:
    text = 'unclassified'
  elif report.interior and not failed:
    text = 'structure preserved'
  elif report.interior:
    text = 'structure preserved at %s; conditions not verified: %s' % (where, ', '.join(failed))
  elif failed:
    text = 'boundary %s, %s violated' % (where, ', '.join(failed))
  else:
    text = 'boundary %s although %s hold' % (where, ', '.join(held))
  return text, {'verdict': text, 'argmin': where, 'interior': report.interior,
                'held': held, 'failed': failed}
