"""Delimited text formats for designs, responses and result tables."""

from __future__ import annotations

import re

import numpy as np

from .exceptions import InputFormatError

_SPLIT = re.compile(r"[\s,;]+")


def _fields(line):
    return [f for f in _SPLIT.split(line.strip()) if f]


def _floats(fields, path, lineno):
    try:
        vals = [float(f) for f in fields]
    except ValueError as exc:
        raise InputFormatError(f"not a number ({exc})", path, lineno) from None
    if not all(np.isfinite(vals)):
        raise InputFormatError("non-finite value", path, lineno)
    return vals


def _content_lines(text):
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip() and not line.lstrip().startswith("#"):
            yield i, line


def parse_design(text, path="<design>"):
    """Parse ``n p`` on the first line followed by ``n`` rows of ``p`` reals.

    Fields may be separated by whitespace, commas or semicolons; blank lines
    and ``#`` comments are ignored.
    """
    lines = list(_content_lines(text))
    if not lines:
        raise InputFormatError("empty design file", path, 1)
    lineno, header = lines[0]
    head = _fields(header)
    if len(head) != 2:
        raise InputFormatError("header must be 'n p'", path, lineno)
    try:
        n, p = int(head[0]), int(head[1])
    except ValueError:
        raise InputFormatError("header must hold two integers 'n p'", path, lineno) from None
    if n < 1 or p < 1:
        raise InputFormatError(f"invalid dimensions n={n}, p={p}", path, lineno)
    rows = lines[1:]
    if len(rows) != n:
        where = rows[-1][0] + 1 if rows else lineno + 1
        raise InputFormatError(f"expected {n} data rows, found {len(rows)}", path, where)
    X = np.empty((n, p))
    for r, (lineno, line) in enumerate(rows):
        vals = _floats(_fields(line), path, lineno)
        if len(vals) != p:
            raise InputFormatError(f"expected {p} values, found {len(vals)}", path, lineno)
        X[r] = vals
    return X


def parse_response(text, n=None, path="<response>"):
    """One real per line."""
    vals = []
    last = 0
    for lineno, line in _content_lines(text):
        f = _fields(line)
        if len(f) != 1:
            raise InputFormatError(f"expected one value per line, found {len(f)}", path, lineno)
        vals.extend(_floats(f, path, lineno))
        last = lineno
    if n is not None and len(vals) != n:
        raise InputFormatError(f"expected {n} response values, found {len(vals)}", path, last + 1)
    return np.array(vals)


def read_design(path):
    with open(path) as fh:
        return parse_design(fh.read(), str(path))


def read_response(path, n=None):
    with open(path) as fh:
        return parse_response(fh.read(), n, str(path))


def format_design(X):
    X = np.asarray(X, dtype=float)
    out = [f"{X.shape[0]} {X.shape[1]}"]
    out += [" ".join(repr(float(v)) for v in row) for row in X]
    return "\n".join(out) + "\n"


def format_response(y):
    return "\n".join(repr(float(v)) for v in np.asarray(y, dtype=float)) + "\n"


def fmt(value):
    """Six significant digits; integers and strings pass through."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return "nan"
        return f"{float(value):.6g}"
    return str(value)


def format_table(columns, rows, header=()):
    """Tab-delimited table preceded by ``# key: value`` metadata lines."""
    out = [f"# {line}" for line in header]
    out.append("\t".join(columns))
    for row in rows:
        out.append("\t".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def parse_table(text):
    """Inverse of :func:`format_table`: ``(metadata lines, columns, rows of strings)``."""
    meta, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            meta.append(line[1:].strip())
        elif line.strip():
            body.append(line.split("\t"))
    if not body:
        return meta, [], []
    return meta, body[0], body[1:]
