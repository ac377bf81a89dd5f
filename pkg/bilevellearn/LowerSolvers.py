import dataclasses
import logging
import math

import numpy as np

from . import GridCore
from . import Regularizers
from . import SolverUtilities
from .Errors import DomainError, ParameterError, SolverError
from .GridCore import GridSignal
from .Regularizers import ExtendedParam

""" Lower level solvers: for a family R_lambda and a noisy datum u_eta they
    return the minimizer of ||u - u_eta||^2 + R_lambda(u) over grid signals.
"""

logger = logging.getLogger(__name__)

STEP_RULES = ('polyak', 'armijo')
FD_STEP = 1e-6


@dataclasses.dataclass(frozen=True)
class SolverConfig:
  """ Iteration controls shared by the iterative solvers.
  """
  max_iters: int = 2000
  tol: float = 1e-8
  step_rule: str = 'polyak'
  restarts: int = 1
  seed: int = 0

  def __post_init__(self):
    if not self.tol > 0:
      raise ParameterError('solver tol must be positive')
    if self.restarts < 1:
      raise ParameterError('solver restarts must be >= 1')
    if self.max_iters < 1:
      raise ParameterError('solver max_iters must be >= 1')
    if self.step_rule not in STEP_RULES:
      raise ParameterError('unknown step rule %r' % self.step_rule)

  def to_json(self):
    return dataclasses.asdict(self)

  @classmethod
  def from_json(cls, d):
    unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
      raise ParameterError('unknown solver keys: %s' % ', '.join(sorted(unknown)))
    return cls(**d)


class SolveResult:
  """ Outcome of one lower level solve. objective is always recomputed
      from the minimizer with the regularizer evaluators.
  """
  def __init__(self):
    self.minimizer = None
    self.objective = math.nan
    self.method = ''
    self.iterations = 0
    self.residual = math.nan
    self.converged = False
    self.non_unique = False
    self.ErrorMessage = ''

  def show(self):
    if self.minimizer is None:
      print('Nothing to show')
      return
    print('LOWER LEVEL SOLVE')
    print('{:<{width}s}{:>16s}'.format('Method', self.method, width=16))
    print('{:<{width}s}{:>16s}'.format('Objective', str(round(self.objective, 10)), width=16))
    print('{:<{width}s}{:>16s}'.format('Iterations', str(self.iterations), width=16))
    print('{:<{width}s}{:>16s}'.format('Residual', '%.3g' % self.residual, width=16))
    print('{:<{width}s}{:>16s}'.format('Converged', str(self.converged), width=16))
    if self.non_unique:
      print('Minimizer may not be unique; best found is reported')
    if self.ErrorMessage:
      print(self.ErrorMessage)

  def to_json(self, with_minimizer=False):
    d = {'method': self.method, 'objective': self.objective, 'iterations': self.iterations,
         'residual': self.residual, 'converged': self.converged, 'non_unique': self.non_unique}
    if self.ErrorMessage:
      d['error'] = self.ErrorMessage
    if with_minimizer:
      d['minimizer'] = [float(v) for v in self.minimizer.values]
    return d


def build_result(minimizer, u_eta, reg_value, method, iterations=0, residual=0.0, converged=True):
  res = SolveResult()
  res.minimizer = minimizer
  res.objective = GridCore.l2_distance_sq(minimizer, u_eta) + reg_value
  res.method = method
  res.iterations = iterations
  res.residual = residual
  res.converged = converged
  return res


def solve_quadratic_weight(alpha, u_eta):
  """ Closed form minimizer u_eta / (1 + alpha) of the quadratic weight model.
      Parameters:
        alpha (float): weight, alpha >= 0
        u_eta (GridSignal)
      Returns:
        SolveResult
  """
  if alpha < 0:
    raise ParameterError('alpha must be >= 0')
  w = u_eta / (1.0 + alpha)
  res = build_result(w, u_eta, alpha * GridCore.l2_norm_sq(w), 'closed-form')
  closed = alpha / (1.0 + alpha) * GridCore.l2_norm_sq(u_eta)
  res.residual = abs(res.objective - closed)
  return res


def solve_tv(weight, u_eta, cfg=None):
  """ Minimizer of ||u - u_eta||^2 + weight * TV(u).

      1D grids use the taut string (exact, certified by the duality gap).
      2D grids run the dual projected gradient method on the grid
      neighbour graph with the anisotropic total variation weights.
  """
  cfg = cfg or SolverConfig()
  if weight < 0:
    raise ParameterError('the TV weight must be >= 0')
  grid = u_eta.grid
  cell = grid.cell_volume
  f = u_eta.values
  if weight == 0 or GridCore.is_constant(u_eta, 0.0):
    return build_result(u_eta, u_eta, 0.0, 'identity')
  if grid.dim == 1:
    lam = weight / (2.0 * cell)
    x = SolverUtilities.taut_string(f, lam)
    w = GridSignal(grid, x)
    gap = 2.0 * cell * SolverUtilities.tv_duality_gap(f, x, lam)
    res = build_result(w, u_eta, weight * GridCore.tv_discrete(w), 'taut-string', 1, gap)
    if gap > max(cfg.tol, 1e-9) * max(1.0, res.objective):
      res.converged = False
      res.ErrorMessage = 'taut string duality gap %.3g above tolerance' % gap
      raise SolverError(res.ErrorMessage, res)
    return res
  graph = SolverUtilities.neighbour_graph(grid)
  tau = weight * graph.weights / (2.0 * cell)
  dual = SolverUtilities.dual_box_fista(f, graph, tau, cfg.max_iters, cfg.tol)
  w = GridSignal(grid, dual.x)
  res = build_result(w, u_eta, weight * GridCore.tv_discrete(w), 'dual-fista', dual.iterations,
                     2.0 * cell * dual.gap, dual.converged)
  if not dual.converged:
    res.ErrorMessage = 'dual projected gradient stopped at gap %.3g' % res.residual
    logger.warning(res.ErrorMessage)
  return res


def solve_lipschitz(alpha, u_eta, cfg=None):
  """ Minimizer of ||u - u_eta||^2 + alpha * Lip(u) on a 1D grid.

      The outer golden section search runs over the Lipschitz bound L in
      [0, Lip(u_eta)] on the convex function dist^2(u_eta, {Lip <= L}) + alpha L;
      the inner step is the exact projection onto the Lipschitz ball.
  """
  cfg = cfg or SolverConfig()
  if alpha < 0:
    raise ParameterError('alpha must be >= 0')
  grid = u_eta.grid
  if grid.dim != 1:
    raise DomainError('solve_lipschitz needs a 1D grid')
  top = GridCore.lipschitz_constant(u_eta)
  if alpha == 0 or top == 0.0:
    return build_result(u_eta, u_eta, alpha * top, 'identity')
  h = grid.h
  f = u_eta.values
  cell = grid.cell_volume
  projections = {}

  def project(L):
    if L not in projections:
      pr = SolverUtilities.project_lipschitz(f, L * h, cfg.max_iters, cfg.tol)
      if not pr.converged:
        partial = build_result(GridSignal(grid, pr.x), u_eta, alpha * L, 'lipschitz-projection',
                               pr.iterations, pr.violation, False)
        partial.ErrorMessage = 'Lipschitz projection did not converge at L=%g' % L
        raise SolverError(partial.ErrorMessage, partial)
      projections[L] = pr
    return projections[L]

  def phi(L):
    x = project(L).x
    return cell * math.fsum((x - f) ** 2) + alpha * L

  L_best, v_best, evals = SolverUtilities.golden_section(phi, 0.0, top, cfg.tol * max(1.0, top))
  for L in (0.0, top):
    v = phi(L)
    if v < v_best:
      L_best, v_best = L, v
  pr = project(L_best)
  w = GridSignal(grid, pr.x)
  res = build_result(w, u_eta, alpha * GridCore.lipschitz_constant(w), 'golden-lipschitz',
                     len(evals) + 2, pr.violation, True)
  logger.debug('solve_lipschitz: L=%.12g after %d evaluations', L_best, len(evals))
  return res


def _ak_graph(delta, rho, grid):
  reach = None if rho.support is None else rho.support * delta
  graph = SolverUtilities.pair_graph(grid, lambda x, y, d: rho(d / delta) / d, reach)
  return graph, delta ** (-grid.dim) * grid.cell_volume * graph.weights


def solve_ak(delta, rho, u_eta, cfg=None):
  """ Minimizer of the Aubert-Kornprobst model at an interior delta, by the
      dual projected gradient method on the pairs within the kernel support.
      The gap-based residual is reported; a non-converged result is still returned.
  """
  cfg = cfg or SolverConfig()
  if not delta > 0:
    raise ParameterError('delta must be positive')
  grid = u_eta.grid
  if GridCore.is_constant(u_eta, 0.0):
    return build_result(u_eta, u_eta, 0.0, 'identity')
  graph, tau = _ak_graph(delta, rho, grid)
  dual = SolverUtilities.dual_box_fista(u_eta.values, graph, tau, cfg.max_iters, cfg.tol)
  w = GridSignal(grid, dual.x)
  value = Regularizers.eval_ak(ExtendedParam.interior(delta), rho, w)
  res = build_result(w, u_eta, value, 'dual-fista', dual.iterations, 2.0 * grid.cell_volume * dual.gap,
                     dual.converged)
  if not dual.converged:
    res.ErrorMessage = 'AK solve stopped at duality gap %.3g' % res.residual
    logger.warning(res.ErrorMessage)
  return res


class _PairPower:
  """ R(u) = (A * sum over ordered pairs of f^p)^(1/p), or the pair maximum
      of f when p is None, with its (sub)gradient in u.
  """
  def __init__(self, f, grid, p):
    I, J, _ = GridCore.node_pairs(grid)
    self.a = np.concatenate([I, J])
    self.b = np.concatenate([J, I])
    nodes = grid.nodes
    self.x = nodes[self.a]
    self.y = nodes[self.b]
    self.f = f
    self.p = p
    self.size = grid.size
    self.scale = grid.cell_volume ** 2 / grid.domain.measure ** 2
    self.weights = f.pair_weights(self.x, self.y) if f.is_builtin else None

  def _values(self, u):
    if self.weights is not None:
      return self.weights * np.abs(u[self.a] - u[self.b])
    return np.asarray(self.f(self.x, self.y, u[self.a], u[self.b]), dtype=float)

  def _partials(self, u):
    """ d f / d xi and d f / d zeta per ordered pair. """
    xi, zeta = u[self.a], u[self.b]
    if self.weights is not None:
      s = self.weights * np.sign(xi - zeta)
      return s, -s
    d_xi = (self.f(self.x, self.y, xi + FD_STEP, zeta) - self.f(self.x, self.y, xi - FD_STEP, zeta)) / (2 * FD_STEP)
    d_zeta = (self.f(self.x, self.y, xi, zeta + FD_STEP) - self.f(self.x, self.y, xi, zeta - FD_STEP)) / (2 * FD_STEP)
    return np.asarray(d_xi, dtype=float), np.asarray(d_zeta, dtype=float)

  def value(self, u):
    v = self._values(u)
    top = float(np.max(v)) if v.size else 0.0
    if self.p is None or top <= 0.0:
      return max(top, 0.0)
    return top * (self.scale * math.fsum((v / top) ** self.p)) ** (1.0 / self.p)

  def gradient(self, u):
    v = self._values(u)
    top = float(np.max(v)) if v.size else 0.0
    g = np.zeros(self.size)
    if top <= 0.0:
      return g
    d_xi, d_zeta = self._partials(u)
    if self.p is None:
      k = int(np.argmax(v))
      g[self.a[k]] += d_xi[k]
      g[self.b[k]] += d_zeta[k]
      return g
    t = v / top
    S = self.scale * math.fsum(t ** self.p)
    coef = S ** (1.0 / self.p - 1.0) * self.scale * t ** (self.p - 1.0)
    g += np.bincount(self.a, weights=coef * d_xi, minlength=self.size)
    g += np.bincount(self.b, weights=coef * d_zeta, minlength=self.size)
    return g


def _descend(objective, gradient, x0, cfg, smooth, step0):
  if smooth or cfg.step_rule == 'armijo':
    return SolverUtilities.armijo_descent(objective, gradient, x0, cfg.max_iters, cfg.tol, step0)
  return SolverUtilities.polyak_descent(objective, gradient, x0, cfg.max_iters, cfg.tol)


def solve_exponent(p, f, u_eta, cfg=None):
  """ Minimizer of the exponent model at p in [1, inf] (p as ExtendedParam).

      Builtin integrands at p = 1 use the dual projected gradient method;
      p > 1, the p = inf maximum and custom integrands use subgradient
      descent with Polyak steps. The difference quotient integrand at
      p = inf is b * Lip(u) and is handed to solve_lipschitz in 1D.
  """
  cfg = cfg or SolverConfig()
  if p.is_lower:
    raise ParameterError('the exponent family has no lower edge')
  grid = u_eta.grid
  cell = grid.cell_volume
  if GridCore.is_constant(u_eta, 0.0) and f.is_builtin:
    return build_result(u_eta, u_eta, 0.0, 'identity')
  if p.is_upper and f.variant == 'DiffQuotient' and grid.dim == 1:
    res = solve_lipschitz(f.b, u_eta, cfg)
    res.objective = GridCore.l2_distance_sq(res.minimizer, u_eta) + Regularizers.eval_exponent(p, f, res.minimizer)
    return res
  if p.is_interior and p.t == 1.0 and f.is_builtin:
    I, J, _ = GridCore.node_pairs(grid)
    nodes = grid.nodes
    w = np.asarray(f.pair_weights(nodes[I], nodes[J]), dtype=float)
    graph = SolverUtilities.PairGraph(grid.size, I, J, np.broadcast_to(w, I.shape).copy())
    tau = cell * graph.weights / grid.domain.measure ** 2
    dual = SolverUtilities.dual_box_fista(u_eta.values, graph, tau, cfg.max_iters, cfg.tol)
    m = GridSignal(grid, dual.x)
    res = build_result(m, u_eta, Regularizers.eval_exponent(p, f, m), 'dual-fista', dual.iterations,
                       2.0 * cell * dual.gap, dual.converged)
    return res
  pairs = _PairPower(f, grid, None if p.is_upper else p.t)
  fv = u_eta.values

  def objective(u):
    return cell * math.fsum((u - fv) ** 2) + pairs.value(u)

  def gradient(u):
    return 2.0 * cell * (u - fv) + pairs.gradient(u)

  run = SolverUtilities.polyak_descent(objective, gradient, fv, cfg.max_iters, cfg.tol)
  m = GridSignal(grid, run.x)
  res = build_result(m, u_eta, Regularizers.eval_exponent(p, f, m), 'polyak-subgradient', run.iterations,
                     run.residual, run.converged)
  if not f.is_builtin:
    res.non_unique = True
    res.ErrorMessage = 'custom integrand: best-effort solve, minimizer may not be unique'
  return res


def _bn_pairs(delta, grid):
  I, J, D = GridCore.node_pairs(grid)
  c = 2.0 * grid.cell_volume ** 2 * delta / D ** (grid.dim + 1)
  return SolverUtilities.PairGraph(grid.size, I, J, c)


def solve_bn_local(delta, phi, u_eta, cfg=None):
  """ Local minimizer of the nonconvex Brezis-Nguyen model.

      Gradient descent with backtracking from u_eta and from cfg.restarts - 1
      seeded perturbations of it; the best local minimizer is returned.
      converged means a small gradient, not global optimality.
  """
  cfg = cfg or SolverConfig()
  if not delta > 0:
    raise ParameterError('delta must be positive')
  grid = u_eta.grid
  if GridCore.is_constant(u_eta, 0.0):
    return build_result(u_eta, u_eta, 0.0, 'identity')
  cell = grid.cell_volume
  fv = u_eta.values
  graph = _bn_pairs(delta, grid)

  def objective(u):
    return cell * math.fsum((u - fv) ** 2) + math.fsum(graph.weights * phi(np.abs(graph.D(u)) / delta))

  def gradient(u):
    du = graph.D(u)
    q = graph.weights * phi.derivative(np.abs(du) / delta) / delta * np.sign(du)
    return 2.0 * cell * (u - fv) + graph.Dt(q)

  rng = np.random.default_rng(cfg.seed)
  spread = float(np.max(fv) - np.min(fv))
  local_cfg = dataclasses.replace(cfg, tol=cfg.tol * math.sqrt(cell))
  best = None
  for start in range(cfg.restarts):
    x0 = fv if start == 0 else fv + rng.normal(0.0, 0.1 * spread, fv.size)
    run = _descend(objective, gradient, x0, local_cfg, True, 1.0 / (2.0 * cell))
    logger.debug('BN restart %d: objective %.12g after %d iterations', start, run.value, run.iterations)
    if best is None or run.value < best.value:
      best = run
  m = GridSignal(grid, best.x)
  res = build_result(m, u_eta, Regularizers.eval_bn(ExtendedParam.interior(delta), phi, m), 'gradient-multistart',
                     best.iterations, best.residual / math.sqrt(cell), best.converged)
  return res


def _solve_weight(alpha, base, u_eta, cfg):
  grid = u_eta.grid
  cell = grid.cell_volume
  if base.variant == 'QuadraticL2':
    return solve_quadratic_weight(alpha, u_eta)
  if base.variant == 'TV':
    return solve_tv(alpha, u_eta, cfg)
  fv = u_eta.values
  param = ExtendedParam.interior(alpha)
  if base.variant == 'GagliardoP':
    I, J, D = GridCore.node_pairs(grid)
    w = 2.0 * cell ** 2 / D ** (base.beta * base.p)
    graph = SolverUtilities.PairGraph(grid.size, I, J, w)
    if base.p == 1.0:
      tau = alpha * w / (2.0 * cell)
      dual = SolverUtilities.dual_box_fista(fv, graph, tau, cfg.max_iters, cfg.tol)
      m = GridSignal(grid, dual.x)
      return build_result(m, u_eta, Regularizers.eval_weight(param, base, m), 'dual-fista', dual.iterations,
                          2.0 * cell * dual.gap, dual.converged)

    def objective(u):
      return cell * math.fsum((u - fv) ** 2) + alpha * math.fsum(w * np.abs(graph.D(u)) ** base.p)

    def gradient(u):
      du = graph.D(u)
      return 2.0 * cell * (u - fv) + alpha * graph.Dt(w * base.p * np.abs(du) ** (base.p - 1) * np.sign(du))

    run = SolverUtilities.armijo_descent(objective, gradient, fv, cfg.max_iters, cfg.tol * math.sqrt(cell),
                                         1.0 / (2.0 * cell))
    m = GridSignal(grid, run.x)
    return build_result(m, u_eta, Regularizers.eval_weight(param, base, m), 'gradient', run.iterations,
                        run.residual / math.sqrt(cell), run.converged)

  def objective(u):
    return cell * math.fsum((u - fv) ** 2) + alpha * base(GridSignal(grid, u))

  def gradient(u):
    g = 2.0 * cell * (u - fv)
    for i in range(u.size):
      e = np.zeros(u.size)
      e[i] = FD_STEP
      g[i] += alpha * (base(GridSignal(grid, u + e)) - base(GridSignal(grid, u - e))) / (2 * FD_STEP)
    return g

  run = _descend(objective, gradient, fv, cfg, False, 1.0 / (2.0 * cell))
  m = GridSignal(grid, run.x)
  res = build_result(m, u_eta, Regularizers.eval_weight(param, base, m), cfg.step_rule, run.iterations,
                     run.residual, run.converged)
  res.non_unique = True
  res.ErrorMessage = 'custom base regularizer: best-effort solve'
  return res


def boundary_solve(family, edge, u_eta, cfg=None):
  """ Minimizer of the Mosco-limit model at an edge of the parameter interval.
      Parameters:
        family (FamilySpec)
        edge (ExtendedParam): LowerEdge or UpperEdge
        u_eta (GridSignal)
        cfg (SolverConfig)
      Returns:
        SolveResult
  """
  cfg = cfg or SolverConfig()
  if edge.is_interior:
    raise ParameterError('boundary_solve needs LowerEdge or UpperEdge')
  v = family.variant
  if v == 'Weight':
    if edge.is_lower:
      return build_result(u_eta, u_eta, 0.0, 'edge-identity')
    if not family.base.vanishes_on_constants:
      return build_result(GridSignal.constant(u_eta.grid, 0.0), u_eta, 0.0, 'edge-zero')
    mean = GridSignal.constant(u_eta.grid, GridCore.mean_value(u_eta))
    return build_result(mean, u_eta, 0.0, 'edge-mean')
  if v in ('BrezisNguyen', 'AubertKornprobst'):
    if edge.is_upper:
      return build_result(u_eta, u_eta, 0.0, 'edge-identity')
    if v == 'BrezisNguyen':
      if family.K_phi is None:
        raise ParameterError('the delta = 0 Brezis-Nguyen model needs K(phi)')
      weight = family.K_phi
    else:
      weight = Regularizers.kappa_n(u_eta.grid.dim)
    res = solve_tv(weight, u_eta, cfg)
    res.method = 'edge-' + res.method
    return res
  if v == 'Exponent':
    return solve_exponent(edge, family.f, u_eta, cfg)
  from . import SpectralFractional
  return SpectralFractional.solve_fractional(family, edge, u_eta)


def solve_family(family, param, u_eta, cfg=None):
  """ Dispatches one lower level solve for any family and any point of the
      closed parameter interval.
  """
  cfg = cfg or SolverConfig()
  family.validate_param(param)
  if not param.is_interior:
    return boundary_solve(family, param, u_eta, cfg)
  v = family.variant
  if v == 'Weight':
    return _solve_weight(param.t, family.base, u_eta, cfg)
  if v == 'Exponent':
    return solve_exponent(param, family.f, u_eta, cfg)
  if v == 'BrezisNguyen':
    return solve_bn_local(param.t, family.phi, u_eta, cfg)
  if v == 'AubertKornprobst':
    return solve_ak(param.t, family.rho, u_eta, cfg)
  from . import SpectralFractional
  return SpectralFractional.solve_fractional(family, param, u_eta)
