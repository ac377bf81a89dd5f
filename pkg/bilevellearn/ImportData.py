import csv
import dataclasses
import logging
import math
import os
from typing import List, Optional

import ijson
import numpy as np

from . import Regularizers
from .BilevelLearning import ParamGrid
from .Errors import BilevelError, ConfigError, SignalFormatError
from .GridCore import Domain, Grid, GridSignal, TrainingSet
from .LowerSolvers import SolverConfig
from .ResultsFormatting import atomic_write

logger = logging.getLogger(__name__)

CSV_DIGITS = 9
FAMILY_NAMES = ('weight', 'exponent', 'brezis-nguyen', 'aubert-kornprobst', 'fractional')
DEFAULT_PARAM_GRIDS = {'weight': ('log', 1e-4, 10.0, 16),
                       'exponent': ('inv-linear', 1.0, 64.0, 12),
                       'brezis-nguyen': ('log', 1e-2, 1.0, 12),
                       'aubert-kornprobst': ('log', 1e-2, 1.0, 12),
                       'fractional': ('s-linear', 0.02, 0.98, 25)}


def _signal_format(path):
  ext = os.path.splitext(path)[1].lower()
  if ext == '.csv':
    return 'csv'
  if ext == '.pgm':
    return 'pgm'
  raise SignalFormatError('unsupported signal file %s (expected .csv or .pgm)' % path)


def _default_grid(shape, fractional=False):
  b = math.pi if fractional else 1.0
  if len(shape) == 1:
    return Grid(Domain.interval(0.0, b), shape[0])
  return Grid(Domain.rect(0.0, b, 0.0, b), shape)


def _read_csv(path):
  rows = []
  with open(path, 'r', newline='') as f:
    for lineno, row in enumerate(csv.reader(f, skipinitialspace=True), 1):
      if not row or all(not c.strip() for c in row):
        continue
      try:
        rows.append([float(c) for c in row])
      except ValueError:
        raise SignalFormatError('%s line %d: non-numeric value' % (path, lineno))
  if not rows:
    raise SignalFormatError('%s holds no values' % path)
  if all(len(r) == 1 for r in rows):
    return np.array([r[0] for r in rows])
  if len(rows) == 1:
    return np.array(rows[0])
  if len({len(r) for r in rows}) != 1:
    raise SignalFormatError('%s: rows of unequal length' % path)
  return np.array(rows)


def _pgm_tokens(data, count):
  """ The first count header tokens of a PGM file and the offset after them. """
  tokens = []
  i = 0
  while len(tokens) < count:
    while i < len(data) and chr(data[i]).isspace():
      i += 1
    if i < len(data) and data[i:i + 1] == b'#':
      while i < len(data) and data[i:i + 1] not in (b'\n', b'\r'):
        i += 1
      continue
    start = i
    while i < len(data) and not chr(data[i]).isspace():
      i += 1
    if start == i:
      raise SignalFormatError('truncated PGM header')
    tokens.append(data[start:i].decode('ascii', errors='replace'))
  return tokens, i


def _read_pgm(path):
  with open(path, 'rb') as f:
    data = f.read()
  tokens, offset = _pgm_tokens(data, 4)
  magic = tokens[0]
  try:
    width, height, maxval = (int(t) for t in tokens[1:])
  except ValueError:
    raise SignalFormatError('%s: malformed PGM header %s' % (path, tokens))
  if magic not in ('P2', 'P5'):
    raise SignalFormatError('%s: unsupported PGM magic %r' % (path, magic))
  if width < 1 or height < 1 or not 0 < maxval <= 65535:
    raise SignalFormatError('%s: invalid PGM size or maxval' % path)
  count = width * height
  if magic == 'P2':
    body = data[offset:].split()
    if len(body) < count:
      raise SignalFormatError('%s: expected %d pixels, found %d' % (path, count, len(body)))
    pixels = np.array([int(v) for v in body[:count]], dtype=float)
  else:
    raster = data[offset + 1:]
    dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
    if len(raster) < count * dtype.itemsize:
      raise SignalFormatError('%s: raster shorter than %d pixels' % (path, count))
    pixels = np.frombuffer(raster[:count * dtype.itemsize], dtype=dtype).astype(float)
  if np.any(pixels > maxval):
    raise SignalFormatError('%s: pixel above maxval' % path)
  return (pixels / maxval).reshape(height, width)


def read_signal(path, grid: Optional[Grid] = None, fractional=False):
  """ Reads a grid signal from CSV or PGM.
      Parameters:
        path (str): .csv (one value per line, one row, or a 2D table)
          or .pgm (P2 / P5, values mapped to [0, 1])
        grid (Grid): configured grid; inferred from the file when None
        fractional (bool): inferred grids live on (0, pi) instead of (0, 1)
      Returns:
        GridSignal
  """
  arr = _read_csv(path) if _signal_format(path) == 'csv' else _read_pgm(path)
  if grid is None:
    grid = _default_grid(arr.shape, fractional)
  elif arr.size != grid.size or (arr.ndim == 2 and arr.shape != grid.shape):
    raise SignalFormatError('%s has shape %s, the configured grid has shape %s' % (path, arr.shape, grid.shape))
  logger.debug('read %s: %d values', path, arr.size)
  return GridSignal(grid, arr.ravel())


def write_signal(signal: GridSignal, path, maxval=255, binary=False):
  """ Writes a grid signal as CSV (9 significant digits) or PGM.
      PGM values are clipped to [0, 1] and scaled to maxval.
  """
  fmt = _signal_format(path)
  if fmt == 'csv':
    if signal.grid.dim == 1:
      text = ''.join('%.*g\n' % (CSV_DIGITS, v) for v in signal.values)
    else:
      text = ''.join(','.join('%.*g' % (CSV_DIGITS, v) for v in row) + '\n' for row in signal.as_array())
    atomic_write(path, text)
    return
  if signal.grid.dim != 2:
    raise SignalFormatError('PGM files hold 2D signals only')
  if not 0 < maxval <= 65535:
    raise SignalFormatError('maxval must lie in 1..65535')
  arr = np.rint(np.clip(signal.as_array(), 0.0, 1.0) * maxval).astype(int)
  height, width = arr.shape
  if binary:
    dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
    payload = ('P5\n%d %d\n%d\n' % (width, height, maxval)).encode('ascii') + arr.astype(dtype).tobytes()
    atomic_write(path, payload)
  else:
    lines = ['P2', '%d %d' % (width, height), str(maxval)]
    lines += [' '.join(str(v) for v in row) for row in arr]
    atomic_write(path, '\n'.join(lines) + '\n')


@dataclasses.dataclass
class RunConfig:
  """ A learning / solving run: family, grids, solver controls and data.

      Attributes:
        family (str): one of FAMILY_NAMES
        family_params (dict): e.g. {"base": "tv"}, {"f": "diff-quotient", "b": 1},
          {"phi": "quadcap", "K_phi": "estimate"}, {"radius": 0.5}, {"mu": 0.05}
        grid (dict): {"domain": [a, b] or [a1, b1, a2, b2], "points": n or [n1, n2]}
        param_grid (dict): {"lo", "hi", "count", "transform", "include_edges"}
        solver (dict): SolverConfig fields
        data_clean, data_noisy (list of str): signal files, paired by position
        out (str): output directory
        seed (int)
        threads (int)
        refine_iters (int)
  """
  family: str = 'weight'
  family_params: dict = dataclasses.field(default_factory=dict)
  grid: Optional[dict] = None
  param_grid: Optional[dict] = None
  solver: dict = dataclasses.field(default_factory=dict)
  data_clean: List[str] = dataclasses.field(default_factory=list)
  data_noisy: List[str] = dataclasses.field(default_factory=list)
  out: str = 'out'
  seed: int = 0
  threads: Optional[int] = None
  refine_iters: int = 0

  def __post_init__(self):
    self.family = self.family.lower().replace('_', '-')
    aliases = {'bn': 'brezis-nguyen', 'ak': 'aubert-kornprobst', 'spectral-fractional': 'fractional'}
    self.family = aliases.get(self.family, self.family)
    if self.family not in FAMILY_NAMES:
      raise ConfigError('unknown family %r; expected one of %s' % (self.family, ', '.join(FAMILY_NAMES)))
    if len(self.data_clean) != len(self.data_noisy):
      raise ConfigError('data_clean and data_noisy must list the same number of files')
    if self.threads is not None and int(self.threads) < 1:
      raise ConfigError('threads must be >= 1')
    if int(self.refine_iters) < 0:
      raise ConfigError('refine_iters must be >= 0')
    self.seed = int(self.seed)
    self.refine_iters = int(self.refine_iters)

  @classmethod
  def from_dict(cls, d):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
      raise ConfigError('unknown configuration keys: %s' % ', '.join(sorted(unknown)))
    try:
      return cls(**d)
    except TypeError as e:
      raise ConfigError(str(e))

  def to_json(self):
    return dataclasses.asdict(self)

  def with_overrides(self, **flags):
    """ Copy with every flag that is not None applied. """
    d = self.to_json()
    d.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.from_dict(d)

  def build_grid(self, sample_path=None):
    """ The configured grid, or the grid inferred from the first data file. """
    if self.grid is None:
      if sample_path is None:
        raise ConfigError('no grid configured and no data to infer it from')
      return read_signal(sample_path, fractional=self.family == 'fractional').grid
    unknown = set(self.grid) - {'domain', 'points'}
    if unknown:
      raise ConfigError('unknown grid keys: %s' % ', '.join(sorted(unknown)))
    bounds = [float(v) for v in self.grid.get('domain', [0.0, 1.0])]
    if len(bounds) not in (2, 4):
      raise ConfigError('grid domain needs 2 or 4 bounds')
    domain = Domain(tuple(zip(bounds[::2], bounds[1::2])))
    points = self.grid.get('points')
    if points is None:
      raise ConfigError('grid needs points')
    return Grid(domain, int(points) if not isinstance(points, list) else [int(p) for p in points])

  def build_family(self, grid: Optional[Grid] = None):
    p = dict(self.family_params)
    n = grid.dim if grid is not None else 1
    try:
      if self.family == 'weight':
        name = str(p.pop('base', 'tv')).lower()
        bases = {'tv': 'TV', 'quadratic': 'QuadraticL2', 'quadraticl2': 'QuadraticL2',
                 'gagliardo': 'GagliardoP', 'gagliardop': 'GagliardoP'}
        if name not in bases:
          raise ConfigError('unknown base regularizer %r' % name)
        shape = {k: float(p.pop(k)) for k in ('p', 'beta') if k in p}
        family = Regularizers.FamilySpec.weight(Regularizers.BaseRegularizer(bases[name], **shape))
      elif self.family == 'exponent':
        name = str(p.pop('f', 'diff-quotient')).lower()
        if name == 'diff-quotient':
          f = Regularizers.DoubleIntegrand.diff_quotient(float(p.pop('b', 1.0)))
        elif name == 'abs-diff':
          f = Regularizers.DoubleIntegrand.weighted_abs_diff()
        else:
          raise ConfigError('unknown double integrand %r' % name)
        family = Regularizers.FamilySpec.exponent(f)
      elif self.family == 'brezis-nguyen':
        names = {'quadcap': 'QuadCap', 'step': 'Step', 'one-minus-exp': 'OneMinusExp'}
        name = str(p.pop('phi', 'quadcap')).lower()
        if name not in names:
          raise ConfigError('unknown phi %r' % name)
        phi = Regularizers.PhiSpec(names[name], n)
        K = p.pop('K_phi', None)
        if K == 'estimate':
          K = Regularizers.estimate_K_phi(phi)
        family = Regularizers.FamilySpec.brezis_nguyen(phi, None if K is None else float(K))
      elif self.family == 'aubert-kornprobst':
        rho = Regularizers.RhoSpec('BallIndicator', n, p.pop('radius', None))
        family = Regularizers.FamilySpec.aubert_kornprobst(rho)
      else:
        family = Regularizers.FamilySpec.spectral_fractional(float(p.pop('mu')), int(p.pop('M_max', 64)))
    except KeyError as e:
      raise ConfigError('family %s needs %s' % (self.family, e))
    except TypeError as e:
      raise ConfigError('bad family parameters: %s' % e)
    if p:
      raise ConfigError('unknown family parameters: %s' % ', '.join(sorted(p)))
    return family

  def build_param_grid(self):
    transform, lo, hi, count = DEFAULT_PARAM_GRIDS[self.family]
    d = {'transform': transform, 'lo': lo, 'hi': hi, 'count': count, 'include_edges': True}
    given = self.param_grid or {}
    unknown = set(given) - set(d)
    if unknown:
      raise ConfigError('unknown param_grid keys: %s' % ', '.join(sorted(unknown)))
    d.update(given)
    return ParamGrid(str(d['transform']), float(d['lo']), float(d['hi']), int(d['count']),
                     bool(d['include_edges']))

  def solver_config(self):
    d = {'seed': self.seed}
    d.update(self.solver)
    try:
      return SolverConfig.from_json(d)
    except BilevelError as e:
      raise ConfigError(str(e))

  def load_training(self, grid: Optional[Grid] = None):
    if not self.data_clean:
      raise ConfigError('no training data configured')
    grid = grid or self.build_grid(self.data_clean[0])
    pairs = [(read_signal(c, grid), read_signal(n, grid)) for c, n in zip(self.data_clean, self.data_noisy)]
    return TrainingSet(grid, pairs)


def read_run_config(path):
  """ Reads a JSON run configuration.
      Parameters:
        path (str): the path and JSON file name
      Returns:
        RunConfig
  """
  d = {}
  try:
    with open(path, 'rb') as fin:
      for key, value in ijson.kvitems(fin, '', use_float=True):
        d[key] = value
  except ijson.JSONError as e:
    raise ConfigError('%s is not valid JSON: %s' % (path, e))
  except OSError as e:
    raise ConfigError('cannot read %s: %s' % (path, e))
  logger.info('read run configuration %s (%d keys)', path, len(d))
  return RunConfig.from_dict(d)
