"""
on-disk formats

JSON documents
    dumps() turns domain objects (polynomials, solve reports, metrics, numpy
    values) into JSON text through a table of per-type dumpers. output has
    sorted keys and fixed separators, so dumping the same object twice gives
    the same bytes. non-finite floats are written as the strings "inf",
    "-inf" and "nan", which plain JSON has no spelling for.

    loads() parses JSON text and, given a `kind`, validates the document
    against that kind's schema and rebuilds the object.

CSV grids
    1d: one integer per line. 2d: comma-separated integers, one row per line.
    no header; descriptions live in the JSON sidecar `<file>.meta.json`.

PGM
    plain "P2" grayscale for quick looks at 2d data; negative values are
    clamped to 0 and the number of clamped pixels is returned.
"""

import dataclasses
import enum
import json
import math
import os

import numpy as np

from . import metrics, polynomial, solver
from .errors import InputError


__all__ = ["dumps", "loads", "dump_csv", "load_csv", "dump_trace_csv",
        "dump_pgm", "dump_meta", "load_meta", "meta_path", "write_text"]


MAX_DEPTH = 64


def _dump_none(x, depth=0, default=None):
    return None

def _dump_bool(x, depth=0, default=None):
    return bool(x)

def _dump_int(x, depth=0, default=None):
    return int(x)

def _dump_float(x, depth=0, default=None):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x

def _dump_str(x, depth=0, default=None):
    return x

def _dump_list(x, depth=0, default=None):
    return [_prepare(item, default, depth + 1) for item in x]

def _dump_dict(x, depth=0, default=None):
    return dict((str(k), _prepare(v, default, depth + 1))
            for k, v in x.items())

def _dump_array(x, depth=0, default=None):
    return _dump_list(x.tolist(), depth, default)

def _dump_polynomial(x, depth=0, default=None):
    return _prepare(polynomial.to_document(x), default, depth + 1)

def _dump_solve_report(x, depth=0, default=None):
    return _prepare(solver.report_to_document(x), default, depth + 1)

def _dump_metrics(x, depth=0, default=None):
    return _prepare(x.to_document(), default, depth + 1)

def _dump_dataclass(x, depth=0, default=None):
    return _prepare(dataclasses.asdict(x), default, depth + 1)

def _dump_enum(x, depth=0, default=None):
    return _prepare(x.value, default, depth + 1)


_dumpers = {
    type(None): _dump_none,
    bool: _dump_bool,
    int: _dump_int,
    float: _dump_float,
    str: _dump_str,
    list: _dump_list,
    tuple: _dump_list,
    dict: _dump_dict,
    np.ndarray: _dump_array,
    polynomial.SumConstrainedPolynomial: _dump_polynomial,
    solver.SolveReport: _dump_solve_report,
    metrics.RecoveryMetrics: _dump_metrics,
}

# checked in order for types without an exact entry above
_fallbacks = (
    (np.bool_, _dump_bool),
    (np.integer, _dump_int),
    (np.floating, _dump_float),
    (enum.Enum, _dump_enum),
)


def _find_dumper(x):
    dumper = _dumpers.get(type(x))
    if dumper is not None:
        return dumper
    for cls, dumper in _fallbacks:
        if isinstance(x, cls):
            return dumper
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return _dump_dataclass
    return None


def _prepare(item, default=None, depth=0):
    if depth >= MAX_DEPTH:
        raise ValueError("max depth exceeded")
    dumper = _find_dumper(item)
    if dumper is None:
        if default is None:
            raise TypeError("unserializable type %s" % type(item).__name__)
        item = default(item)
        dumper = _find_dumper(item)
        if dumper is None:
            raise TypeError("default returned unserializable type %s" %
                    type(item).__name__)
    return dumper(item, depth, default)


def dumps(item, default=None):
    """serialize a python or noisereversal object into JSON text

    :param object: the object to serialize
    :param function default:
        If the 'object' parameter is not serializable and this parameter is
        provided, this function will be used to generate a fallback value to
        serialize. It should take one argument (the original object), and
        return something serializable.

    :returns: the JSON text, newline-terminated
    """
    if default and not callable(default):
        raise TypeError("default must be callable or None")
    return json.dumps(_prepare(item, default), sort_keys=True, indent=1,
            separators=(",", ": "), allow_nan=False) + "\n"


##
## LOADERS
##

_loaders = {
    'polynomial': polynomial.from_document,
    'solve_report': solver.report_from_document,
    'metrics': metrics.metrics_from_document,
    'report': lambda doc: metrics.ReportMessage(doc).validate() or doc,
}

def loads(text, kind=None):
    """parse JSON text, rebuilding a `kind` of object when asked

    :param str text: JSON text
    :param str kind: None for the plain document, or one of 'polynomial',
        'solve_report', 'metrics', 'report'

    :raises InvalidDocument: the document doesn't match the kind's schema
    """
    if not text:
        raise ValueError("no data from which to load")
    doc = json.loads(text)
    if kind is None:
        return doc
    if kind not in _loaders:
        raise ValueError("unknown document kind %r" % (kind,))
    return _loaders[kind](doc)


##
## files
##

def write_text(path, text):
    "write `text` to `path`, creating parent directories"
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fp:
        fp.write(text)


def meta_path(path):
    return str(path) + ".meta.json"


def dump_meta(path, meta):
    write_text(meta_path(path), dumps(meta))


def load_meta(path):
    "read a sidecar; `path` may name the data file or the sidecar itself"
    path = str(path)
    if not path.endswith(".meta.json"):
        path = meta_path(path)
    with open(path) as fp:
        return loads(fp.read())


def dump_csv(path, values):
    values = np.asarray(values)
    if values.ndim == 1:
        lines = ["%d" % v for v in values.tolist()]
    elif values.ndim == 2:
        lines = [",".join("%d" % v for v in row) for row in values.tolist()]
    else:
        raise ValueError("only 1d and 2d grids are written as CSV")
    write_text(path, "\n".join(lines) + "\n")


def load_csv(path):
    """read a 1d or 2d integer CSV grid

    a file whose every line holds one value is 1d, unless its sidecar
    records a two-dimensional `shape`.
    """
    with open(path) as fp:
        lines = [line.strip() for line in fp if line.strip()]
    if not lines:
        raise InputError("%s holds no data" % path)
    try:
        rows = [[int(cell) for cell in line.split(",")] for line in lines]
    except ValueError:
        raise InputError("%s holds non-integer values" % path)
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise InputError("%s has ragged rows" % path)
    grid = np.array(rows, dtype=np.int64)
    if widths == {1} and not _sidecar_says_2d(path):
        return grid[:, 0]
    return grid


def _sidecar_says_2d(path):
    if not os.path.exists(meta_path(path)):
        return False
    meta = load_meta(path)
    shape = meta.get('shape') if isinstance(meta, dict) else None
    return isinstance(shape, list) and len(shape) == 2


def dump_trace_csv(path, trace):
    lines = ["iteration,energy"] + ["%d,%r" % (i, float(e))
            for i, e in enumerate(trace)]
    write_text(path, "\n".join(lines) + "\n")


def dump_pgm(path, grid):
    """plain grayscale rendering of a 2d grid

    :returns: how many negative values were clamped to 0
    """
    grid = np.asarray(grid, dtype=np.int64)
    if grid.ndim != 2:
        raise ValueError("PGM needs a 2d grid")
    clamped = int((grid < 0).sum())
    # P2 caps maxval at 65535
    grid = np.clip(grid, 0, 65535)
    maxval = max(1, int(grid.max()) if grid.size else 1)
    rows, cols = grid.shape
    lines = ["P2", "%d %d" % (cols, rows), "%d" % maxval]
    lines.extend(" ".join("%d" % v for v in row) for row in grid.tolist())
    write_text(path, "\n".join(lines) + "\n")
    return clamped
