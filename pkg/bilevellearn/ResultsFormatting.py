import csv
import io
import json
import math
import os
import platform
import tempfile

import numpy as np
from Crypto.Hash import SHA256

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), 'schemas', 'learn_report.schema.json')


class ResultsFormatting:
  def __init__(self):
    self.cssForTable = '''<style type="text/css">
    th
    {
    border-style:none;
    border-width:0px;
    padding-left:5px;
    padding-right:5px;
    padding-bottom:0px;
    background-color:#318CE7;
    color:#FFFFFF;
    text-align: center;
    }
    td
    {
    border-style:none;
    border-width:0px;
    padding-left:5px;
    padding-right:5px;
    padding-top:0px;
    padding-bottom:0px;
    background-color:#FFFFFF;
    text-align: center;
    }
</style>'''

  def learnReport(self, report):
    """ HTML tables for a LearnReport: samples, argmin and conditions. """
    html = self.cssForTable + '\n<table>'
    html += '\n<tr><td colspan=4><b>Bi-level learning: ' + report.family.variant + ' family</b></td></tr>'
    html += '\n</table>'
    html += '\n<table>'
    html += '\n<tr><th>Parameter</th><th>I_bar</th><th>Converged</th><th>Refined</th></tr>'
    for s in report.samples:
      html += '\n<tr><th>' + s.param.label() + '</th>'
      html += '<td>' + '{:.10g}'.format(s.I_bar) + '</td>'
      html += '<td>' + str(s.converged) + '</td>'
      html += '<td>' + ('*' if s.refined else '') + '</td></tr>'
    html += '\n</table>'
    html += '\n<table>'
    html += '\n<tr><td><b>Argmin</b></td><td>' + report.argmin.label() + '</td></tr>'
    html += '\n<tr><td><b>Minimal I_bar</b></td><td>' + '{:.10g}'.format(report.I_min) + '</td></tr>'
    html += '\n<tr><td><b>Verdict</b></td><td>' + report.verdict() + '</td></tr>'
    html += '\n</table>'
    if report.conditions:
      html += self.conditions(report.conditions)
    return html

  def conditions(self, conds):
    html = '\n<table>'
    html += '\n<tr><th>Condition</th><th>Value</th><th>Holds</th></tr>'
    for name in sorted(conds):
      c = conds[name]
      if not isinstance(c, dict):
        continue
      value = c.get('value')
      html += '\n<tr><th>' + name + '</th>'
      html += '<td>' + ('{:.6g}'.format(value) if isinstance(value, (int, float)) else str(value)) + '</td>'
      html += '<td>' + str(c.get('holds')) + '</td></tr>'
    html += '\n</table>'
    return html

  def sequenceScan(self, scan):
    html = self.cssForTable + '\n<table>'
    html += '\n<tr><th>Parameter</th><th>Value</th><th>Bound</th></tr>'
    for row in scan.rows():
      html += '\n<tr><th>' + '{:.8g}'.format(row['param']) + '</th>'
      html += '<td>' + '{:.10g}'.format(row['value']) + '</td>'
      html += '<td>' + ('' if math.isnan(row['bound']) else '{:.6g}'.format(row['bound'])) + '</td></tr>'
    html += '\n<tr><td><b>Expected</b></td><td>' + '{:.10g}'.format(scan.expected) + '</td><td></td></tr>'
    html += '\n<tr><td><b>Extrapolated</b></td><td>' + '{:.10g}'.format(scan.extrapolated) + '</td><td></td></tr>'
    html += '\n</table>'
    return html


def learn_report_html(report):
  return ResultsFormatting().learnReport(report)


def scan_html(scan):
  return ResultsFormatting().sequenceScan(scan)


def plain(obj):
  """ JSON-ready copy: numpy scalars and arrays unwrapped, tuples as lists,
      non-finite floats as the strings 'inf', '-inf' and 'nan'.
  """
  if isinstance(obj, dict):
    return {str(k): plain(v) for k, v in obj.items()}
  if isinstance(obj, (list, tuple)):
    return [plain(v) for v in obj]
  if isinstance(obj, np.ndarray):
    return [plain(v) for v in obj.tolist()]
  if isinstance(obj, (bool, np.bool_)):
    return bool(obj)
  if isinstance(obj, (int, np.integer)):
    return int(obj)
  if isinstance(obj, (float, np.floating)):
    v = float(obj)
    return v if math.isfinite(v) else str(v)
  if obj is None or isinstance(obj, str):
    return obj
  return str(obj)


def stable_json_dumps(obj, indent=2):
  """ Deterministic JSON: sorted keys, repr floats, trailing newline. """
  return json.dumps(plain(obj), sort_keys=True, indent=indent, allow_nan=False) + '\n'


def sha256_hex(data):
  if isinstance(data, str):
    data = data.encode('utf-8')
  return SHA256.new(data).hexdigest()


def atomic_write(path, data):
  """ Writes text or bytes to path through a temporary file in the same
      directory and os.replace, so readers never see a partial file.
  """
  directory = os.path.dirname(os.path.abspath(path))
  os.makedirs(directory, exist_ok=True)
  mode = 'wb' if isinstance(data, (bytes, bytearray)) else 'w'
  fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
  try:
    with os.fdopen(fd, mode, **({} if mode == 'wb' else {'encoding': 'utf-8', 'newline': ''})) as f:
      f.write(data)
    os.replace(tmp, path)
  except BaseException:
    if os.path.exists(tmp):
      os.remove(tmp)
    raise


def write_json(obj, path):
  atomic_write(path, stable_json_dumps(obj))


def csv_text(rows, fieldnames):
  """ RFC 4180 CSV: header line, CRLF line ends, floats in repr form. """
  buf = io.StringIO()
  writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator='\r\n', extrasaction='ignore')
  writer.writeheader()
  for row in rows:
    writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
  return buf.getvalue()


def sample_rows(report):
  """ (param, I_bar) rows of a LearnReport for plotting; edges as their tags. """
  return [{'param': s.param.label(), 'I_bar': s.I_bar, 'converged': s.converged, 'refined': s.refined}
          for s in report.samples]


def versions():
  import scipy
  from . import __version__
  return {'bilevellearn': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__,
          'python': platform.python_version()}


def manifest(config, seed, outputs=None):
  """ What a rerun needs: the configuration hash, the seed, library versions
      and the hash of every output file written.
      Parameters:
        config (dict): the run configuration
        seed (int)
        outputs (dict): file name -> file contents
      Returns:
        dict
  """
  text = stable_json_dumps(config)
  return {'config': plain(config),
          'config_sha256': sha256_hex(text),
          'seed': seed,
          'versions': versions(),
          'outputs': {name: sha256_hex(body) for name, body in sorted((outputs or {}).items())}}


def load_report_schema():
  with open(SCHEMA_PATH, 'r') as fin:
    return json.load(fin)


def learn_summary(report):
  """ Plain text summary of a LearnReport, one fact per line. """
  from .BilevelLearning import structure_report
  text, info = structure_report(report)
  lines = ['family: %s' % report.family.variant,
           'argmin: %s' % info['argmin'],
           'I_bar: %.12g' % report.I_min,
           'interior: %s' % report.interior]
  if info['held']:
    lines.append('conditions held: %s' % ', '.join(info['held']))
  if info['failed']:
    lines.append('conditions failed: %s' % ', '.join(info['failed']))
  lines.append('verdict: %s' % text)
  return '\n'.join(lines) + '\n'
