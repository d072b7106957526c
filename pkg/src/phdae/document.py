"""JSON system documents and report documents.

A system document looks like::

    {
      "schema": 1,
      "n": 2, "m": 1, "t0": 0.0, "tf": 1.0,
      "coefficients": {
        "E": [[[1.0, 0.0], [0.0, 0.0]]],
        ...                                  all nine, zeros written out
      },
      "x0": [1.0, 0.0],                      optional
      "input": {"polynomial": [[[0.5]]]}     optional, or {"times": [...], "values": [[...], ...]}
    }

Each coefficient is a list of row-major matrices, the polynomial
coefficients in increasing powers of ``t``. Floats are written with
``repr``, the shortest string that parses back to the same double, so
``dumps(loads(s)) == s`` for any canonical ``s``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .exceptions import ShapeError
from .matfun import MatFun
from .system import COEFFICIENT_NAMES, PHDAESystem

SCHEMA = 1

__all__ = ["SCHEMA", "SystemDocument", "dumps", "loads", "load", "save", "to_jsonable",
           "report_document", "write_report"]


@dataclass
class SystemDocument:
    system: PHDAESystem
    x0: np.ndarray | None = None
    input: dict | None = None

    def input_spec(self):
        """The input in the form accepted by :func:`phdae.sim.make_input`."""
        if self.input is None:
            return None
        if "polynomial" in self.input:
            return MatFun(np.asarray(self.input["polynomial"], dtype=float))
        return (np.asarray(self.input["times"], dtype=float),
                np.asarray(self.input["values"], dtype=float))


def _num(v) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ShapeError(f"non-finite number {v} cannot be serialized")
    return repr(v)


def _row(r) -> str:
    return "[" + ", ".join(_num(v) for v in r) + "]"


def _matrix(A, indent: str) -> str:
    A = np.asarray(A, dtype=float)
    if A.shape[0] == 0:
        return "[]"
    if A.shape[1] == 0:
        return "[" + ", ".join("[]" for _ in range(A.shape[0])) + "]"
    inner = (",\n" + indent + " ").join(_row(r) for r in A)
    return "[" + inner + "]"


def _stack(C, indent: str) -> str:
    return "[" + (",\n" + indent + " ").join(_matrix(c, indent + " ") for c in C) + "]"


def dumps(doc: SystemDocument | PHDAESystem) -> str:
    """Canonical serialization (one matrix row per line, fixed key order)."""
    if isinstance(doc, PHDAESystem):
        doc = SystemDocument(doc)
    s = doc.system
    lines = ["{", f'  "schema": {SCHEMA},', f'  "n": {s.n},', f'  "m": {s.m},',
             f'  "t0": {_num(s.t0)},', f'  "tf": {_num(s.tf)},', '  "coefficients": {']
    for i, name in enumerate(COEFFICIENT_NAMES):
        pre = f'    "{name}": '
        sep = "," if i < len(COEFFICIENT_NAMES) - 1 else ""
        lines.append(pre + _stack(getattr(s, name).coeffs, " " * len(pre)) + sep)
    tail = []
    if doc.x0 is not None:
        tail.append('  "x0": ' + _row(np.asarray(doc.x0, dtype=float)))
    if doc.input is not None:
        if "polynomial" in doc.input:
            pre = '    "polynomial": '
            body = pre + _stack(np.asarray(doc.input["polynomial"], dtype=float), " " * len(pre))
        else:
            vals = np.asarray(doc.input["values"], dtype=float).reshape(len(doc.input["times"]), -1)
            body = ('    "times": ' + _row(doc.input["times"]) + ",\n"
                    + '    "values": ' + _matrix(vals, " " * 14))
        tail.append('  "input": {\n' + body + "\n  }")
    lines.append("  }" + ("," if tail else ""))
    lines.append(",\n".join(tail)) if tail else None
    lines.append("}")
    return "\n".join(lines) + "\n"


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _where(text: str, key: str) -> str:
    ln = _line_of(text, key)
    return f" (line {ln})" if ln else ""


def _finite_array(value, field_name: str, text: str, ndim: int) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ShapeError(f"field {field_name!r}{_where(text, field_name)} is not a rectangular "
                         f"numeric array") from None
    if a.ndim != ndim and not (a.size == 0 and a.ndim < ndim):
        raise ShapeError(f"field {field_name!r}{_where(text, field_name)} must be a "
                         f"{ndim}-dimensional array, got {a.ndim} dimensions")
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"field {field_name!r}{_where(text, field_name)} contains non-finite values")
    return a


def loads(text: str) -> SystemDocument:
    """Parse a system document; every problem is reported as :class:`ShapeError`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ShapeError("system document must be a JSON object")
    for key in ("n", "m", "t0", "tf", "coefficients"):
        if key not in raw:
            raise ShapeError(f"missing required field {key!r}")
    if raw.get("schema", SCHEMA) != SCHEMA:
        raise ShapeError(f"unsupported schema {raw.get('schema')!r}{_where(text, 'schema')}; "
                         f"expected {SCHEMA}")
    n, m = raw["n"], raw["m"]
    if not (isinstance(n, int) and isinstance(m, int)) or n < 0 or m < 0:
        raise ShapeError("fields 'n' and 'm' must be nonnegative integers")
    coeffs = raw["coefficients"]
    if not isinstance(coeffs, dict):
        raise ShapeError(f"field 'coefficients'{_where(text, 'coefficients')} must be an object")
    missing = [k for k in COEFFICIENT_NAMES if k not in coeffs]
    if missing:
        raise ShapeError(
            f"missing coefficient field(s) {', '.join(missing)} in 'coefficients'"
            f"{_where(text, 'coefficients')}; zero matrices must be written explicitly"
        )
    extra = sorted(set(coeffs) - set(COEFFICIENT_NAMES))
    if extra:
        raise ShapeError(f"unknown coefficient field(s) {', '.join(extra)}{_where(text, extra[0])}")
    shapes = {"E": (n, n), "Q": (n, n), "J": (n, n), "R": (n, n), "K": (n, n),
              "B": (n, m), "P": (n, m), "S": (m, m), "N": (m, m)}
    mats = {}
    for name in COEFFICIENT_NAMES:
        a = _finite_array(coeffs[name], name, text, 3)
        if a.size == 0:
            k = max(len(coeffs[name]), 1)
            a = np.zeros((k,) + shapes[name])
        if a.shape[0] == 0 or a.shape[1:] != shapes[name]:
            raise ShapeError(f"coefficient {name}{_where(text, name)} has matrices of shape "
                             f"{a.shape[1:]}, expected {shapes[name]} (n={n}, m={m})")
        mats[name] = MatFun(a)
    try:
        t0, tf = float(raw["t0"]), float(raw["tf"])
    except (TypeError, ValueError):
        raise ShapeError("fields 't0' and 'tf' must be numbers") from None
    system = PHDAESystem(t0=t0, tf=tf, **mats)
    x0 = None
    if raw.get("x0") is not None:
        x0 = _finite_array(raw["x0"], "x0", text, 1)
        if x0.shape != (n,):
            raise ShapeError(f"field 'x0'{_where(text, 'x0')} has length {x0.size}, expected {n}")
    inp = raw.get("input")
    if inp is not None:
        inp = _parse_input(inp, m, text)
    return SystemDocument(system, x0, inp)


def _parse_input(inp, m: int, text: str) -> dict:
    if not isinstance(inp, dict):
        raise ShapeError(f"field 'input'{_where(text, 'input')} must be an object")
    if "polynomial" in inp:
        p = _finite_array(inp["polynomial"], "polynomial", text, 3)
        if p.shape[1:] != (m, 1):
            raise ShapeError(f"polynomial input{_where(text, 'polynomial')} must have coefficient "
                             f"matrices of shape ({m}, 1)")
        return {"polynomial": p}
    if "times" in inp and "values" in inp:
        ts = _finite_array(inp["times"], "times", text, 1)
        vals = _finite_array(inp["values"], "values", text, 2)
        if vals.shape != (len(ts), m):
            raise ShapeError(f"sampled input values{_where(text, 'values')} must have shape "
                             f"({len(ts)}, {m})")
        if len(ts) < 2 or np.any(np.diff(ts) <= 0):
            raise ShapeError("sampled input times must be increasing with at least two entries")
        return {"times": ts, "values": vals}
    raise ShapeError(f"field 'input'{_where(text, 'input')} needs 'polynomial' or 'times' and 'values'")


def load(path) -> SystemDocument:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ShapeError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def save(doc: SystemDocument | PHDAESystem, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(doc))


def to_jsonable(obj):
    """Convert numpy containers and scalars for ``json``; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_document(command: str, tolerances: dict, **sections) -> dict:
    """Versioned report: ``schema``, ``command``, provenance and the given sections."""
    doc = {"schema": SCHEMA, "command": command,
           "provenance": {"tool": "phdae", "version": __version__, "tolerances": tolerances}}
    for k, v in sections.items():
        if v is not None:
            doc[k] = v
    return to_jsonable(doc)


def write_report(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")
