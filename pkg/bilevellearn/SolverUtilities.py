import logging
import math

import numpy as np
from scipy.optimize import isotonic_regression

from .GridCore import node_pairs

""" This file defines the numerical kernels behind the
    lower level solvers: the 1D taut string, pair graphs
    with a dual projected gradient method, the Lipschitz
    ball projection, golden section search and the
    first order descent loops.
"""

logger = logging.getLogger(__name__)

INVPHI = (math.sqrt(5) - 1) / 2
INVPHI2 = (3 - math.sqrt(5)) / 2


def taut_string(y, lam):
  """ Exact minimizer of 0.5 * sum (x - y)^2 + lam * sum |x[i+1] - x[i]|
      by Condat's direct algorithm: the current segment value is kept
      between the bounds vmin and vmax, and the running dual values
      umin, umax decide where the next jump goes.
      Parameters:
        y (array): data
        lam (float): jump penalty, lam >= 0
      Returns:
        array
  """
  y = np.asarray(y, dtype=float)
  n = y.size
  x = np.empty(n)
  if n == 0:
    return x
  if lam <= 0:
    return y.copy()
  k = k0 = 0
  kplus = kminus = 0
  umin, umax = lam, -lam
  vmin, vmax = y[0] - lam, y[0] + lam
  while True:
    while k == n - 1:
      if umin < 0.0:
        # vmin too high, jump down after kminus
        end = max(k0, kminus) + 1
        x[k0:end] = vmin
        k0 = kminus = k = end
        vmin = y[k0]
        umin = lam
        umax = vmin + umin - vmax
      elif umax > 0.0:
        end = max(k0, kplus) + 1
        x[k0:end] = vmax
        k0 = kplus = k = end
        vmax = y[k0]
        umax = -lam
        umin = vmax + umax - vmin
      else:
        vmin += umin / (k - k0 + 1)
        x[k0:k + 1] = vmin
        return x
    umin += y[k + 1] - vmin
    if umin < -lam:
      end = max(k0, kminus) + 1
      x[k0:end] = vmin
      k0 = kplus = kminus = k = end
      vmin = y[k0]
      vmax = vmin + 2 * lam
      umin, umax = lam, -lam
      continue
    umax += y[k + 1] - vmax
    if umax > lam:
      end = max(k0, kplus) + 1
      x[k0:end] = vmax
      k0 = kplus = kminus = k = end
      vmax = y[k0]
      vmin = vmax - 2 * lam
      umin, umax = lam, -lam
      continue
    k += 1
    if umin >= lam:
      kminus = k
      vmin += (umin - lam) / (k - k0 + 1)
      umin = lam
    if umax <= -lam:
      kplus = k
      vmax += (umax + lam) / (k - k0 + 1)
      umax = -lam


def tv_duality_gap(y, x, lam):
  """ Primal minus dual value for the taut string problem, with the
      dual variable recovered from the cumulative residual.
  """
  y = np.asarray(y, dtype=float)
  x = np.asarray(x, dtype=float)
  if y.size < 2:
    return 0.5 * float(np.sum((x - y) ** 2))
  p = np.clip(-np.cumsum(y - x)[:-1], -lam, lam)
  dtp = np.concatenate(([0.0], p)) - np.concatenate((p, [0.0]))
  primal = 0.5 * math.fsum((x - y) ** 2) + lam * math.fsum(np.abs(np.diff(x)))
  dual = 0.5 * math.fsum(y * y) - 0.5 * math.fsum((y - dtp) ** 2)
  return max(primal - dual, 0.0)


class PairGraph:
  """ Unordered node pairs (I[e], J[e]) with one weight per edge.
      D maps a node vector u to the edge differences u[I] - u[J].
  """
  def __init__(self, size, I, J, weights):
    self.size = int(size)
    self.I = np.asarray(I, dtype=np.intp)
    self.J = np.asarray(J, dtype=np.intp)
    self.weights = np.asarray(weights, dtype=float)
    if not (self.I.shape == self.J.shape == self.weights.shape):
      raise ValueError('pair graph arrays must have equal length')

  @property
  def edges(self):
    return self.I.size

  def D(self, u):
    return u[self.I] - u[self.J]

  def Dt(self, q):
    return (np.bincount(self.I, weights=q, minlength=self.size)
            - np.bincount(self.J, weights=q, minlength=self.size))

  def max_degree(self):
    if self.edges == 0:
      return 0
    deg = np.bincount(self.I, minlength=self.size) + np.bincount(self.J, minlength=self.size)
    return int(deg.max())

  def weighted_abs_sum(self, u):
    return math.fsum(self.weights * np.abs(self.D(u)))

  def drop_zero_weights(self):
    keep = self.weights > 0
    return PairGraph(self.size, self.I[keep], self.J[keep], self.weights[keep])


def neighbour_graph(grid):
  """ Grid neighbours with the weights of the discrete total variation. """
  shape = grid.shape
  index = np.arange(grid.size).reshape(shape)
  if grid.dim == 1:
    return PairGraph(grid.size, index[:-1], index[1:], np.ones(grid.size - 1))
  h1, h2 = grid.spacing
  I = np.concatenate([index[:-1, :].ravel(), index[:, :-1].ravel()])
  J = np.concatenate([index[1:, :].ravel(), index[:, 1:].ravel()])
  w = np.concatenate([np.full((shape[0] - 1) * shape[1], h2), np.full(shape[0] * (shape[1] - 1), h1)])
  return PairGraph(grid.size, I, J, w)


def pair_graph(grid, weight_fn, max_distance=None):
  """ All unordered node pairs closer than max_distance, weighted by
      weight_fn(x, y, d) with coordinate arrays x, y and distances d.
  """
  I, J, D = node_pairs(grid, max_distance)
  nodes = grid.nodes
  w = np.asarray(weight_fn(nodes[I], nodes[J], D), dtype=float)
  w = np.broadcast_to(w, D.shape).copy()
  return PairGraph(grid.size, I, J, w).drop_zero_weights()


class DualResult:
  def __init__(self):
    self.x = None
    self.gap = math.inf
    self.iterations = 0
    self.converged = False


def dual_box_fista(f, graph, tau, max_iters=2000, tol=1e-8, check_every=10):
  """ Minimizes 0.5 * ||u - f||^2 + sum tau[e] |u[I] - u[J]| through
      accelerated projected gradient on the box-constrained dual
      min 0.5 * ||f - D^T q||^2, |q[e]| <= tau[e].
      Parameters:
        f (array): data
        graph (PairGraph)
        tau (array): edge penalties
        max_iters (int)
        tol (float): stop once the duality gap is below tol * max(1, primal)
      Returns:
        DualResult
  """
  f = np.asarray(f, dtype=float)
  tau = np.asarray(tau, dtype=float)
  res = DualResult()
  if graph.edges == 0 or not np.any(tau > 0):
    res.x = f.copy()
    res.gap = 0.0
    res.converged = True
    return res
  L = 2.0 * graph.max_degree()
  q = np.zeros(graph.edges)
  z = q.copy()
  t = 1.0
  half_f = 0.5 * math.fsum(f * f)
  for k in range(1, max_iters + 1):
    u = f - graph.Dt(z)
    q_new = np.clip(z + graph.D(u) / L, -tau, tau)
    t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
    z = q_new + ((t - 1.0) / t_new) * (q_new - q)
    q, t = q_new, t_new
    if k % check_every == 0 or k == max_iters:
      u = f - graph.Dt(q)
      primal = 0.5 * math.fsum((u - f) ** 2) + math.fsum(tau * np.abs(graph.D(u)))
      dual = half_f - 0.5 * math.fsum(u * u)
      gap = max(primal - dual, 0.0)
      res.iterations = k
      res.gap = gap
      res.x = u
      if gap <= tol * max(1.0, abs(primal)):
        res.converged = True
        break
  logger.debug('dual projected gradient: %d iterations, gap %.3g', res.iterations, res.gap)
  return res


class ProjectionResult:
  def __init__(self):
    self.x = None
    self.iterations = 0
    self.violation = math.inf
    self.converged = False


def project_lipschitz(y, bound, max_iters=2000, tol=1e-8):
  """ Euclidean projection of y onto {x : |x[i+1] - x[i]| <= bound}.
      Dykstra's method over the cones {x - bound * i non-increasing} and
      {x + bound * i non-decreasing}, each projected by isotonic regression.
  """
  y = np.asarray(y, dtype=float)
  res = ProjectionResult()
  n = y.size
  if n < 2 or bound == math.inf:
    res.x = y.copy()
    res.violation = 0.0
    res.converged = True
    return res
  ramp = bound * np.arange(n)
  scale = 1.0 + float(np.max(np.abs(y)))
  x = y.copy()
  p = np.zeros(n)
  q = np.zeros(n)
  for k in range(1, max_iters + 1):
    a = isotonic_regression(x + p - ramp, increasing=False).x + ramp
    p = x + p - a
    x_new = isotonic_regression(a + q + ramp, increasing=True).x - ramp
    q = a + q - x_new
    violation = max(float(np.max(np.abs(np.diff(x_new)))) - bound, 0.0)
    moved = float(np.max(np.abs(x_new - x)))
    x = x_new
    res.iterations = k
    res.violation = violation
    if violation <= 1e-10 * max(bound, scale) and moved <= tol * scale:
      res.converged = True
      break
  res.x = x
  return res


def golden_section(f, a, b, tol=1e-8, max_iters=200):
  """ Golden section search for the minimum of a unimodal f on [a, b],
      reusing one function evaluation per step.
      Returns:
        (x_best, f_best, evaluations): the best point seen, its value and
        the list of all (x, f(x)) evaluations
  """
  a, b = min(a, b), max(a, b)
  evaluations = []

  def probe(x):
    v = f(x)
    evaluations.append((x, v))
    return v

  h = b - a
  if h <= tol:
    x = 0.5 * (a + b)
    v = probe(x)
    return x, v, evaluations
  n = min(max_iters, int(math.ceil(math.log(tol / h) / math.log(INVPHI))))
  c = a + INVPHI2 * h
  d = a + INVPHI * h
  yc = probe(c)
  yd = probe(d)
  for k in range(n - 1):
    if yc < yd:
      b = d
      d = c
      yd = yc
      h = INVPHI * h
      c = a + INVPHI2 * h
      yc = probe(c)
    else:
      a = c
      c = d
      yc = yd
      h = INVPHI * h
      d = a + INVPHI * h
      yd = probe(d)
  logger.debug('golden section: %d evaluations, final bracket [%g, %g]', len(evaluations), a, b)
  best = min(evaluations, key=lambda e: (e[1], e[0]))
  return best[0], best[1], evaluations


class DescentResult:
  def __init__(self):
    self.x = None
    self.value = math.inf
    self.iterations = 0
    self.residual = math.inf
    self.converged = False


def polyak_descent(objective, subgradient, x0, max_iters=2000, tol=1e-8, window=50):
  """ Subgradient method with Polyak steps toward the best value seen,
      lowered by a vanishing margin. Keeps the best iterate.
      residual is the relative decrease of the best value over the last
      window iterations.
  """
  x = np.array(x0, dtype=float)
  res = DescentResult()
  fx = objective(x)
  res.x, res.value = x.copy(), fx
  margin0 = 0.1 * max(abs(fx), 1e-12)
  history = [fx]
  for k in range(1, max_iters + 1):
    g = subgradient(x)
    gn = float(np.dot(g, g))
    if gn == 0.0:
      res.residual = 0.0
      res.converged = True
      res.iterations = k
      break
    margin = margin0 / math.sqrt(k)
    step = (fx - res.value + margin) / gn
    x = x - step * g
    fx = objective(x)
    if fx < res.value:
      res.x, res.value = x.copy(), fx
    history.append(res.value)
    res.iterations = k
    if k >= window:
      old = history[-window - 1]
      res.residual = (old - res.value) / max(abs(old), 1e-300)
      if res.residual <= tol:
        res.converged = True
        break
  logger.debug('polyak descent: %d iterations, best %.12g', res.iterations, res.value)
  return res


def armijo_descent(objective, gradient, x0, max_iters=2000, tol=1e-8, step0=1.0):
  """ Gradient descent with backtracking line search.
      residual is the Euclidean norm of the last gradient.
  """
  x = np.array(x0, dtype=float)
  res = DescentResult()
  fx = objective(x)
  step = step0
  for k in range(1, max_iters + 1):
    g = gradient(x)
    gn = float(np.dot(g, g))
    res.residual = math.sqrt(gn)
    res.iterations = k
    if res.residual <= tol:
      res.converged = True
      break
    while True:
      x_new = x - step * g
      f_new = objective(x_new)
      if f_new <= fx - 0.5 * step * gn or step < 1e-16:
        break
      step *= 0.5
    if f_new > fx:
      break
    if fx - f_new <= 1e-16 * max(1.0, abs(fx)):
      x, fx = x_new, f_new
      res.converged = res.residual <= tol
      break
    x, fx = x_new, f_new
    step *= 2.0
  res.x, res.value = x, fx
  return res
