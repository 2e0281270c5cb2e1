"""Text formats shared by the library and the command line.

Matrix documents are JSON objects ``{"dim": n, "entries": [[re, im], ...]}``
with entries in row-major order. Distributions are two-column CSV text with
a ``z,p`` header. Floats are written with ``repr`` so they round-trip exactly.
"""

import json
import os
import tempfile

import numpy as np

from .errors import DimensionError, ParseError


def _num(x):
    x = float(x)
    return 0.0 if x == 0 else x


def matrix_to_doc(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {m.shape}")
    return {"dim": int(m.shape[0]),
            "entries": [[_num(z.real), _num(z.imag)] for z in m.ravel()]}


def matrix_from_doc(doc, where="<doc>"):
    if not isinstance(doc, dict) or "dim" not in doc or "entries" not in doc:
        raise ParseError(f"{where}: expected an object with 'dim' and 'entries'")
    dim, entries = doc["dim"], doc["entries"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError(f"{where}: 'dim' must be a positive integer")
    if not isinstance(entries, list):
        raise ParseError(f"{where}: 'entries' must be a list")
    if len(entries) != dim * dim:
        raise DimensionError(
            f"{where}: {len(entries)} entries do not form a {dim}x{dim} matrix")
    out = np.empty(dim * dim, dtype=complex)
    for i, pair in enumerate(entries):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ParseError(f"{where}: entry {i} (row {i // dim}, col {i % dim}) is not a [re, im] pair")
        try:
            out[i] = complex(float(pair[0]), float(pair[1]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: entry {i} (row {i // dim}, col {i % dim}): {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise ParseError(f"{where}: non-finite entry")
    return out.reshape(dim, dim)


def dumps(doc):
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def read_matrix(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return matrix_from_doc(doc, str(path))


def distribution_to_text(dist):
    lines = ["z,p"]
    for z, p in dist.atoms:
        lines.append(f"{_num(z)!r},{_num(p)!r}")
    return "\n".join(lines) + "\n"


def distribution_from_text(text):
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0].replace(" ", "") != "z,p":
        raise ParseError("distribution text must start with a 'z,p' header")
    atoms = []
    for k, ln in enumerate(rows[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {k}: expected two columns")
        try:
            atoms.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"line {k}: {exc}") from exc
    return atoms


def atomic_write(path, text):
    """Write through a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
