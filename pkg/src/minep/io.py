"""JSON game documents and CSV report rows.

Document layout (schema version 1)::

    {
      "schema_version": 1,
      "fixture": {"name": "example-1", "params": {"eps": 0.1}},   # optional
      "game": {                                                   # optional if fixture given
        "name": "...", "dims": [..], "int_counts": [..],
        "q_blocks": [[matrix, ...], ...], "c": [[..], ..], "const": [..],
        "lower": [[..], ..], "upper": [[..], ..],
        "A": [matrix, ..], "b": [[..], ..], "E": [matrix, ..], "d": [[..], ..]
      },
      "certificates": {...}                                       # optional
    }

Infinite bounds are written as the strings ``"inf"`` and ``"-inf"``.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fixtures import FIXTURES, load_fixture
from .game import QuadGame

__all__ = ["SCHEMA_VERSION", "GameFormatError", "GameDocument", "game_to_dict", "game_from_dict",
           "document_to_dict", "document_from_dict", "load_document", "load_game", "save",
           "dumps", "CSV_COLUMNS", "format_csv_value", "write_csv", "to_jsonable"]

SCHEMA_VERSION = 1


class GameFormatError(ValueError):
    """A document does not match the schema; the message starts with the field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class GameDocument:
    game: QuadGame
    fixture: str | None = None
    fixture_params: dict = field(default_factory=dict)
    certificates: dict | None = None
    version: int = SCHEMA_VERSION


def _num(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise ValueError("NaN cannot be serialized")
    return x


def to_jsonable(obj):
    """Recursively convert numpy containers and non-finite floats."""
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
        return _num(obj)
    return obj


def game_to_dict(game: QuadGame) -> dict:
    N = game.n_players
    return to_jsonable({
        "name": game.name,
        "dims": list(game.dims),
        "int_counts": list(game.int_counts),
        "q_blocks": [[game.Q[v][u] for u in range(N)] for v in range(N)],
        "c": list(game.c),
        "const": list(game.const),
        "lower": list(game.lower),
        "upper": list(game.upper),
        "A": list(game.A), "b": list(game.b),
        "E": list(game.E), "d": list(game.d),
    })


def _scalar(val, path):
    if isinstance(val, bool):
        raise GameFormatError(path, "expected a number, got a boolean")
    if isinstance(val, (int, float)):
        return float(val)
    if val in ("inf", "+inf", "Infinity"):
        return math.inf
    if val in ("-inf", "-Infinity"):
        return -math.inf
    raise GameFormatError(path, f"expected a number, got {val!r}")


def _vector(val, length, path):
    if not isinstance(val, list):
        raise GameFormatError(path, "expected a list")
    if len(val) != length:
        raise GameFormatError(path, f"has length {len(val)}, expected {length}")
    return np.array([_scalar(x, f"{path}[{i}]") for i, x in enumerate(val)], dtype=float)


def _matrix(val, rows, cols, path):
    if not isinstance(val, list):
        raise GameFormatError(path, "expected a list of rows")
    if rows is not None and len(val) != rows:
        raise GameFormatError(path, f"has {len(val)} rows, expected {rows}")
    out = []
    for i, row in enumerate(val):
        if not isinstance(row, list) or len(row) != cols:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise GameFormatError(path, f"row {i} has length {got}, expected {cols}")
        out.append([_scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(out, dtype=float).reshape(len(out), cols)


def _per_player(data, key, N, required=True):
    val = data.get(key)
    if val is None:
        if required:
            raise GameFormatError(key, "missing")
        return None
    if not isinstance(val, list) or len(val) != N:
        raise GameFormatError(key, f"expected a list with one entry per player ({N})")
    return val


def game_from_dict(data: dict) -> QuadGame:
    if not isinstance(data, dict):
        raise GameFormatError("game", "expected an object")
    dims = data.get("dims")
    if not isinstance(dims, list) or not dims or not all(isinstance(n, int) and n >= 0 for n in dims):
        raise GameFormatError("dims", "expected a nonempty list of nonnegative integers")
    N = len(dims)
    ic = _per_player(data, "int_counts", N)
    for v, i in enumerate(ic):
        if not isinstance(i, int) or not 0 <= i <= dims[v]:
            raise GameFormatError(f"int_counts[{v}]", f"expected an integer in [0, {dims[v]}]")
    qb = _per_player(data, "q_blocks", N)
    Q = []
    for v in range(N):
        if not isinstance(qb[v], list) or len(qb[v]) != N:
            raise GameFormatError(f"q_blocks[{v}]", f"expected {N} blocks")
        Q.append([_matrix(qb[v][u], dims[v], dims[u], f"q_blocks[{v}][{u}]") for u in range(N)])
    c_raw = _per_player(data, "c", N)
    c = [_vector(c_raw[v], dims[v], f"c[{v}]") for v in range(N)]

    def vecs(key, default):
        raw = _per_player(data, key, N, required=False)
        if raw is None:
            return [np.full(n, default) for n in dims]
        return [_vector(raw[v], dims[v], f"{key}[{v}]") for v in range(N)]

    lower, upper = vecs("lower", -math.inf), vecs("upper", math.inf)
    const_raw = data.get("const")
    const = [0.0] * N if const_raw is None else list(_vector(const_raw, N, "const"))

    def system(mk, rk):
        M_raw = _per_player(data, mk, N, required=False)
        r_raw = _per_player(data, rk, N, required=False)
        if M_raw is None and r_raw is None:
            return None, None
        if M_raw is None or r_raw is None:
            raise GameFormatError(mk if M_raw is None else rk, "must be given together with its partner")
        Ms, rs = [], []
        for v in range(N):
            M = _matrix(M_raw[v], None, dims[v], f"{mk}[{v}]")
            Ms.append(M)
            rs.append(_vector(r_raw[v], M.shape[0], f"{rk}[{v}]"))
        return Ms, rs

    A, b = system("A", "b")
    E, d = system("E", "d")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise GameFormatError("name", "expected a string")
    return QuadGame(dims=dims, int_counts=ic, Q=Q, c=c, lower=lower, upper=upper,
                    A=A, b=b, E=E, d=d, const=const, name=name)


def document_to_dict(doc: GameDocument) -> dict:
    out = {"schema_version": doc.version}
    if doc.fixture is not None:
        out["fixture"] = {"name": doc.fixture, "params": to_jsonable(doc.fixture_params)}
    out["game"] = game_to_dict(doc.game)
    if doc.certificates is not None:
        out["certificates"] = to_jsonable(doc.certificates)
    return out


def document_from_dict(data: dict) -> GameDocument:
    if not isinstance(data, dict):
        raise GameFormatError("$", "expected a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise GameFormatError("schema_version", f"unsupported version {version!r}")
    fixture, params = None, {}
    if data.get("fixture") is not None:
        fx = data["fixture"]
        if not isinstance(fx, dict) or fx.get("name") not in FIXTURES:
            raise GameFormatError("fixture.name", f"expected one of {sorted(FIXTURES)}")
        fixture, params = fx["name"], dict(fx.get("params") or {})
    if "game" in data:
        game = game_from_dict(data["game"])
    elif fixture is not None:
        try:
            game = load_fixture(fixture, **params)
        except TypeError as exc:
            raise GameFormatError("fixture.params", str(exc)) from None
    else:
        raise GameFormatError("game", "missing (and no fixture given)")
    certs = data.get("certificates")
    return GameDocument(game, fixture, params, certs, version)


def dumps(obj) -> str:
    """Deterministic JSON text; floats use the shortest round-tripping repr."""
    if isinstance(obj, GameDocument):
        obj = document_to_dict(obj)
    elif isinstance(obj, QuadGame):
        obj = document_to_dict(GameDocument(obj))
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def load_document(path) -> GameDocument:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GameFormatError("$", f"invalid JSON ({exc})") from None
    return document_from_dict(data)


def load_game(path) -> QuadGame:
    return load_document(path).game


def save(document, path) -> None:
    Path(path).write_text(dumps(document))


CSV_COLUMNS = ("instance", "procedure", "schedule", "iterations", "time_ms", "converged",
               "radius", "contained")


def format_csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(rows, dest=None, columns=CSV_COLUMNS) -> str:
    """Write dict rows with fixed columns; returns the text and writes ``dest`` if given."""
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([format_csv_value(r.get(c)) for c in columns])
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text)
    return text
