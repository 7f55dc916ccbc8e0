"""Reading and writing state-space model files.

Two formats are supported:

* **JSON** (primary): a single object ``{"name"?, "n", "m", "A", "B",
  "C", "D", "metadata"?}`` where each matrix is a flat row-major array of
  numbers (nested row arrays are also accepted on input).  Numbers are
  written with Python's shortest round-tripping decimal representation,
  so ``load_model(write_model(sys))`` reproduces every matrix bit for
  bit.
* **Text** (secondary, for hand-authored fixtures): four matrix blocks,
  each introduced by a line containing only ``A``, ``B``, ``C``, or
  ``D``, followed by one whitespace-separated row per line.  ``#``
  starts a comment; blank lines are ignored.  Dimensions are inferred
  from the block shapes.

Parsing failures raise :class:`~klap.exceptions.ParseError` naming the
offending line or field.  A model whose ``A`` is not Hurwitz raises
:class:`~klap.exceptions.NotHurwitzError`; a stable matrix that sits very
close to the stability boundary is accepted with a warning, since
Gramian-based computations degrade there.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotHurwitzError, ParseError
from .linalg import max_real_part
from .system import StateSpaceSystem

__all__ = ["ModelFile", "load_model", "load_model_file", "write_model", "dumps_model"]

_MATRIX_KEYS = ("A", "B", "C", "D")

# relative stability margin below which a (still Hurwitz) A triggers a warning
_BORDERLINE_RTOL = 1e-6


@dataclass(frozen=True)
class ModelFile:
    """A parsed model file: the system plus its optional annotations."""

    system: StateSpaceSystem
    name: str | None = None
    metadata: dict = field(default_factory=dict)


def _check_stability(A: np.ndarray, source: str) -> None:
    scale = max(1.0, float(np.linalg.norm(A, "fro")))
    abscissa = max_real_part(A)
    if abscissa >= -1e-12 * np.linalg.norm(A, "fro"):
        raise NotHurwitzError(
            f"{source}: A is not Hurwitz (largest eigenvalue real part "
            f"{abscissa:.3e}); every algorithm here assumes asymptotic stability"
        )
    if abscissa > -_BORDERLINE_RTOL * scale:
        warnings.warn(
            f"{source}: A is barely Hurwitz (largest eigenvalue real part "
            f"{abscissa:.3e}); Gramian computations may be inaccurate",
            RuntimeWarning,
            stacklevel=3,
        )


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    x = float(value)
    if not np.isfinite(x):
        raise ParseError(f"{where}: non-finite value {value!r}")
    return x


def _json_matrix(doc: dict, key: str, rows: int, cols: int, source: str) -> np.ndarray:
    where = f"{source}: field '{key}'"
    raw = doc.get(key)
    if raw is None:
        raise ParseError(f"{where} is missing")
    if not isinstance(raw, list):
        raise ParseError(f"{where}: expected an array, got {type(raw).__name__}")
    if raw and all(isinstance(r, list) for r in raw):
        if len(raw) != rows:
            raise ParseError(f"{where}: expected {rows} rows, got {len(raw)}")
        flat = []
        for i, row in enumerate(raw):
            if len(row) != cols:
                raise ParseError(
                    f"{where}: row {i + 1} has {len(row)} entries, expected {cols}"
                )
            flat.extend(_as_number(v, f"{where}, row {i + 1}") for v in row)
    else:
        if len(raw) != rows * cols:
            raise ParseError(
                f"{where}: expected {rows * cols} numbers (row-major "
                f"{rows}x{cols}), got {len(raw)}"
            )
        flat = [_as_number(v, f"{where}, entry {i + 1}") for i, v in enumerate(raw)]
    return np.array(flat, dtype=float).reshape(rows, cols)


def _positive_int(doc: dict, key: str, source: str) -> int:
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ParseError(f"{source}: field '{key}' must be a positive integer, got {value!r}")
    return value


def _parse_json(text: str, source: str) -> ModelFile:
    def reject_constant(token: str):
        raise ParseError(f"{source}: non-finite number {token!r}")

    try:
        doc = json.loads(text, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: expected a JSON object at the top level")

    n = _positive_int(doc, "n", source)
    m = _positive_int(doc, "m", source)
    A = _json_matrix(doc, "A", n, n, source)
    B = _json_matrix(doc, "B", n, m, source)
    C = _json_matrix(doc, "C", m, n, source)
    D = _json_matrix(doc, "D", m, m, source)

    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ParseError(f"{source}: field 'name' must be a string")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ParseError(f"{source}: field 'metadata' must be an object")

    _check_stability(A, source)
    return ModelFile(StateSpaceSystem(A, B, C, D), name, dict(metadata))


def _parse_text(text: str, source: str) -> ModelFile:
    blocks: dict[str, list[list[float]]] = {}
    current: str | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) == 1 and tokens[0] in _MATRIX_KEYS:
            key = tokens[0]
            if key in blocks:
                raise ParseError(f"{source}: line {lineno}: duplicate block '{key}'")
            blocks[key] = []
            current = key
            continue
        if current is None:
            raise ParseError(
                f"{source}: line {lineno}: data before any matrix header "
                f"(expected one of {', '.join(_MATRIX_KEYS)})"
            )
        row = []
        for tok in tokens:
            try:
                row.append(float(tok))
            except ValueError:
                raise ParseError(
                    f"{source}: line {lineno}: invalid number {tok!r} in block '{current}'"
                ) from None
            if not np.isfinite(row[-1]):
                raise ParseError(
                    f"{source}: line {lineno}: non-finite value in block '{current}'"
                )
        blocks[current].append(row)

    for key in _MATRIX_KEYS:
        if key not in blocks:
            raise ParseError(f"{source}: missing block '{key}'")
        if not blocks[key]:
            raise ParseError(f"{source}: block '{key}' has no rows")

    def matrix(key: str, rows: int | None, cols: int | None) -> np.ndarray:
        data = blocks[key]
        width = len(data[0])
        for i, row in enumerate(data):
            if len(row) != width:
                raise ParseError(
                    f"{source}: block '{key}': row {i + 1} has {len(row)} "
                    f"entries, expected {width}"
                )
        if rows is not None and len(data) != rows:
            raise ParseError(f"{source}: block '{key}': expected {rows} rows, got {len(data)}")
        if cols is not None and width != cols:
            raise ParseError(f"{source}: block '{key}': expected {cols} columns, got {width}")
        return np.array(data, dtype=float)

    A = matrix("A", None, None)
    if A.shape[0] != A.shape[1]:
        raise ParseError(
            f"{source}: block 'A': expected a square matrix, got {A.shape[0]}x{A.shape[1]}"
        )
    n = A.shape[0]
    B = matrix("B", n, None)
    m = B.shape[1]
    C = matrix("C", m, n)
    D = matrix("D", m, m)

    _check_stability(A, source)
    return ModelFile(StateSpaceSystem(A, B, C, D), None, {})


def load_model_file(path: str | os.PathLike) -> ModelFile:
    """Parse a model file (JSON or text, detected by content) with its
    annotations.  See the module docstring for both formats."""
    source = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"{source}: cannot read file: {exc.strerror or exc}") from exc
    stripped = text.lstrip()
    if not stripped:
        raise ParseError(f"{source}: file is empty")
    if stripped[0] in "{[":
        return _parse_json(text, source)
    return _parse_text(text, source)


def load_model(path: str | os.PathLike) -> StateSpaceSystem:
    """Load a state-space model from a JSON or text model file."""
    return load_model_file(path).system


def dumps_model(
    sys: StateSpaceSystem,
    name: str | None = None,
    metadata: dict | None = None,
) -> str:
    """Serialize a system to the JSON model format (one matrix per line,
    shortest exact decimal representation for every number)."""
    parts = []
    if name is not None:
        parts.append(f'  "name": {json.dumps(name)}')
    parts.append(f'  "n": {sys.n}')
    parts.append(f'  "m": {sys.m}')
    for key, M in (("A", sys.A), ("B", sys.B), ("C", sys.C), ("D", sys.D)):
        entries = ", ".join(repr(float(v)) for v in M.ravel(order="C"))
        parts.append(f'  "{key}": [{entries}]')
    if metadata:
        parts.append(f'  "metadata": {json.dumps(metadata, sort_keys=True)}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_model(
    sys: StateSpaceSystem,
    path: str | os.PathLike,
    name: str | None = None,
    metadata: dict | None = None,
) -> None:
    """Write a system to ``path`` in the JSON model format.

    The serialization round-trips exactly: loading the written file
    reproduces every matrix entry bit for bit.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(sys, name=name, metadata=metadata))
