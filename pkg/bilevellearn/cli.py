""" Command line interface: learn, solve, eval, conditions, mosco and demo. """
import argparse
import logging
import os
import sys
from typing import List, Optional

from . import BilevelLearning
from . import Demos
from . import GridCore
from . import LowerSolvers
from . import MoscoLab
from . import Regularizers
from . import ResultsFormatting
from .Errors import (BracketError, ConfigError, DomainError, EstimationError, GridMismatchError,
                     ParameterError, QuadratureError, SignalFormatError, SolverError)
from .ImportData import RunConfig, read_run_config, write_signal
from .Regularizers import ExtendedParam

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECKS = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3
INVALID_ERRORS = (ConfigError, SignalFormatError, ParameterError, GridMismatchError, DomainError)
SOLVER_ERRORS = (SolverError, EstimationError, BracketError, QuadratureError)
THREADS_ENV = 'BILEVEL_THREADS'


def parse_param(text):
  """ 'lower', 'upper' / 'inf' or a number. """
  t = text.strip().lower()
  if t in ('lower', 'loweredge'):
    return ExtendedParam.lower()
  if t in ('upper', 'upperedge', 'inf', 'infinity'):
    return ExtendedParam.upper()
  try:
    return ExtendedParam.interior(float(t))
  except ValueError:
    raise ParameterError('cannot read parameter %r' % text)


def _float_list(text):
  try:
    return [float(v) for v in text.split(',') if v.strip()]
  except ValueError:
    raise ParameterError('expected a comma separated list of numbers, got %r' % text)


def _common(p):
  p.add_argument('--config', help='JSON run configuration')
  p.add_argument('--family', help='weight, exponent, brezis-nguyen, aubert-kornprobst or fractional')
  p.add_argument('--mu', type=float, help='weight of the fractional family')
  p.add_argument('--data-clean', nargs='+', dest='data_clean', help='clean signal files (.csv / .pgm)')
  p.add_argument('--data-noisy', nargs='+', dest='data_noisy', help='noisy signal files, same order')
  p.add_argument('--out', help='output directory')
  p.add_argument('--seed', type=int, help='random seed')
  p.add_argument('--threads', type=int, help='worker threads (default: $%s or 1)' % THREADS_ENV)


def build_parser():
  parser = argparse.ArgumentParser(prog='bilevellearn',
                                   description='Bi-level learning of regularization parameters.')
  parser.add_argument('--log-level', default='WARNING', dest='log_level',
                      choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='logging level (default: WARNING)')
  sub = parser.add_subparsers(dest='command', required=True)

  p = sub.add_parser('learn', help='learn the optimal parameter on the closed interval')
  _common(p)
  p.add_argument('--param-grid', dest='param_grid', help='lo:hi:count:transform')
  p.add_argument('--edges', dest='edges', action='store_true', default=None, help='include both edges')
  p.add_argument('--no-edges', dest='edges', action='store_false', help='interior samples only')
  p.add_argument('--refine-iters', type=int, dest='refine_iters', help='golden section refinement steps')
  p.add_argument('--html', action='store_true', help='also write report.html')

  for name, text in (('solve', 'solve the lower level problem for every noisy signal'),
                     ('eval', 'evaluate the extended upper level functional at one parameter')):
    p = sub.add_parser(name, help=text)
    _common(p)
    p.add_argument('--param', required=True, help="parameter value, 'lower' or 'upper'")

  p = sub.add_parser('conditions', help='check the data conditions of the family')
  _common(p)

  p = sub.add_parser('mosco', help='scan regularizer values along a parameter sequence')
  _common(p)
  p.add_argument('--scan', choices=['constant', 'scaled-bn', 'bn-vanishing', 'oscillation'], default='constant')
  p.add_argument('--target', default='lower', help="limit parameter, 'lower', 'upper' or a value")
  p.add_argument('--sequence', help='comma separated parameters')
  p.add_argument('--probe', default='ramp', help='ramp, sawtooth, sine, step or random')
  p.add_argument('--points', type=int, default=256, help='grid points when no grid is configured')
  p.add_argument('--html', action='store_true', help='also write scan.html')

  p = sub.add_parser('demo', help='run a self-checking demo')
  p.add_argument('name', choices=sorted(Demos.DEMOS) + sorted(Demos.DEMO_ALIASES) + ['all'])
  p.add_argument('--out', help='output directory')
  return parser


def _run_config(args):
  cfg = read_run_config(args.config) if getattr(args, 'config', None) else RunConfig()
  flags = {'family': args.family, 'data_clean': args.data_clean, 'data_noisy': args.data_noisy,
           'out': args.out, 'seed': args.seed, 'threads': args.threads}
  if getattr(args, 'refine_iters', None) is not None:
    flags['refine_iters'] = args.refine_iters
  if args.mu is not None:
    flags['family_params'] = dict(cfg.family_params, mu=args.mu)
  cfg = cfg.with_overrides(**flags)
  if getattr(args, 'param_grid', None) or getattr(args, 'edges', None) is not None:
    grid = dict(cfg.param_grid or {})
    if args.param_grid:
      parsed = BilevelLearning.ParamGrid.parse(args.param_grid)
      grid.update(lo=parsed.lo, hi=parsed.hi, count=parsed.count, transform=parsed.transform)
    if args.edges is not None:
      grid['include_edges'] = args.edges
    cfg = cfg.with_overrides(param_grid=grid)
  return cfg


def _threads(cfg):
  if cfg.threads is not None:
    return int(cfg.threads)
  env = os.environ.get(THREADS_ENV)
  if env:
    try:
      return max(1, int(env))
    except ValueError:
      raise ConfigError('%s must be an integer, got %r' % (THREADS_ENV, env))
  return 1


def _setup(args):
  cfg = _run_config(args)
  training = cfg.load_training()
  family = cfg.build_family(training.grid)
  return cfg, training, family


def _write_outputs(cfg, files):
  """ Writes every output file and the manifest that records them. """
  for name, body in files.items():
    ResultsFormatting.atomic_write(os.path.join(cfg.out, name), body)
  manifest = ResultsFormatting.manifest(cfg.to_json(), cfg.seed, files)
  ResultsFormatting.write_json(manifest, os.path.join(cfg.out, 'manifest.json'))
  logger.info('wrote %d files to %s', len(files) + 1, cfg.out)


def cmd_learn(args):
  cfg, training, family = _setup(args)
  report = BilevelLearning.learn(family, training, cfg.build_param_grid(), cfg.refine_iters,
                                 cfg.solver_config(), _threads(cfg))
  files = {'report.json': ResultsFormatting.stable_json_dumps(report.to_json()),
           'samples.csv': ResultsFormatting.csv_text(ResultsFormatting.sample_rows(report),
                                                     ['param', 'I_bar', 'converged', 'refined']),
           'summary.txt': ResultsFormatting.learn_summary(report)}
  if args.html:
    files['report.html'] = ResultsFormatting.learn_report_html(report)
  _write_outputs(cfg, files)
  report.show()
  return EXIT_OK


def cmd_solve(args):
  cfg, training, family = _setup(args)
  param = family.validate_param(parse_param(args.param))
  solver = cfg.solver_config()
  results = []
  os.makedirs(cfg.out, exist_ok=True)
  for k, noisy in enumerate(training.noisy):
    res = LowerSolvers.solve_family(family, param, noisy, solver)
    write_signal(res.minimizer, os.path.join(cfg.out, 'minimizer_%d.csv' % k))
    results.append(res.to_json())
    res.show()
  _write_outputs(cfg, {'solve.json': ResultsFormatting.stable_json_dumps(
      {'family': family.describe(), 'param': param.to_json(), 'results': results})})
  return EXIT_OK


def cmd_eval(args):
  cfg, training, family = _setup(args)
  param = parse_param(args.param)
  value, results = BilevelLearning.extended_upper(family, param, training, cfg.solver_config(), _threads(cfg))
  reg = [Regularizers.eval_family(family, param, n) for n in training.noisy]
  out = {'family': family.describe(), 'param': param.to_json(), 'I_bar': value,
         'R_noisy': reg, 'results': [r.to_json() for r in results]}
  _write_outputs(cfg, {'eval.json': ResultsFormatting.stable_json_dumps(out)})
  print('{:<{width}s}{:>24s}'.format('I_bar(%s)' % param.label(), '%.12g' % value, width=28))
  return EXIT_OK


def cmd_conditions(args):
  cfg, training, family = _setup(args)
  conds = BilevelLearning.condition_checks(family, training)
  body = {'family': family.describe(), 'conditions': conds}
  if family.phi is not None:
    body['phi'] = Regularizers.check_bn_phi(family.phi)
  _write_outputs(cfg, {'conditions.json': ResultsFormatting.stable_json_dumps(body)})
  for name in sorted(conds):
    c = conds[name]
    if isinstance(c, dict):
      print('{:<{width}s}{:>24s}{:>8s}'.format(name, str(c.get('value')), str(c.get('holds')), width=12))
  return EXIT_OK


def cmd_mosco(args):
  cfg = _run_config(args)
  if cfg.grid is not None:
    grid = cfg.build_grid()
  else:
    grid = GridCore.Grid(GridCore.Domain.interval(0.0, 1.0), args.points)
  if args.scan == 'oscillation':
    scan = MoscoLab.oscillation_demo(grid)
  else:
    probes = MoscoLab.probe_battery(grid, cfg.seed)
    if args.probe not in probes:
      raise ParameterError('unknown probe %r' % args.probe)
    u = probes[args.probe]
    if not args.sequence:
      raise ConfigError('--sequence is required for this scan')
    seq = _float_list(args.sequence)
    if args.scan == 'constant':
      scan = MoscoLab.scan_constant(cfg.build_family(grid), parse_param(args.target), seq, u)
    else:
      phi = cfg.build_family(grid).phi
      if phi is None:
        raise ConfigError('Brezis-Nguyen scans need the brezis-nguyen family')
      if args.scan == 'scaled-bn':
        target = parse_param(args.target)
        if not target.is_interior:
          raise ParameterError('the scaled Brezis-Nguyen scan needs a numeric --target')
        scan = MoscoLab.scan_scaled_bn(target.t, seq, phi, u)
      else:
        scan = MoscoLab.scan_bn_vanishing(seq, phi, u)
  files = {'scan.json': ResultsFormatting.stable_json_dumps(scan.to_json()),
           'scan.csv': ResultsFormatting.csv_text(scan.rows(), ['param', 'value', 'bound', 'expected'])}
  if args.html and isinstance(scan, MoscoLab.SequenceScan):
    files['scan.html'] = ResultsFormatting.scan_html(scan)
  _write_outputs(cfg, files)
  scan.show()
  return EXIT_OK


def cmd_demo(args):
  names = sorted(Demos.DEMOS) if args.name == 'all' else [args.name]
  reports = [Demos.run_demo(name) for name in names]
  for r in reports:
    r.show()
    print()
  if args.out:
    ResultsFormatting.write_json([r.to_json() for r in reports], os.path.join(args.out, 'demo.json'))
  return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED_CHECKS


COMMANDS = {'learn': cmd_learn, 'solve': cmd_solve, 'eval': cmd_eval, 'conditions': cmd_conditions,
            'mosco': cmd_mosco, 'demo': cmd_demo}


def main(argv: Optional[List[str]] = None) -> int:
  args = build_parser().parse_args(argv)
  logging.basicConfig(level=getattr(logging, args.log_level), format='%(levelname)s %(name)s: %(message)s')
  try:
    return COMMANDS[args.command](args)
  except INVALID_ERRORS as e:
    print('error: %s' % e, file=sys.stderr)
    return EXIT_INVALID
  except SOLVER_ERRORS as e:
    print('solver failure: %s' % e, file=sys.stderr)
    return EXIT_SOLVER
