"""JSON instance and solution files.

Instance document::

    {"players": [{"n": 1, "Q": [[...], ...], "c": [...]}, ...],
     "A": [[...]], "b": [...], "E": [[...]], "f": [...], "lb": [...]}

``E``, ``f`` and ``lb`` are optional; a player's ``n`` (block size) defaults to
an equal split of the variables.  Solution documents carry ``x``, ``lambda``
and ``nu``.  Floats are written with 17 significant digits so files round-trip
exactly, and the writer is deterministic byte for byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, InvalidGame
from .game import LQGame


def fmt(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    s = "%.17g" % v
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_encode(v, indent + 1).lstrip()}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        inner = [pad + "  " + _encode(v, indent + 1).lstrip() for v in obj]
        return "[\n" + ",\n".join(inner) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps(doc: dict) -> str:
    return _encode(doc) + "\n"


def game_to_dict(game: LQGame) -> dict:
    C = game.constraints
    doc: dict[str, Any] = {
        "players": [{"n": p.block_size, "Q": p.Q, "c": p.c} for p in game.players],
        "A": C.A,
        "b": C.b,
    }
    if C.q:
        doc["E"] = C.E
        doc["f"] = C.f
    if game.lower_bounds is not None:
        doc["lb"] = game.lower_bounds
    return doc


def _matrix(doc: dict, key: str, n: int) -> np.ndarray:
    val = doc.get(key)
    if val is None or len(val) == 0:
        return np.zeros((0, n))
    M = np.asarray(val, dtype=float)
    if M.ndim != 2 or M.shape[1] != n:
        raise DimensionMismatch(f"'{key}' must be a list of rows of length {n}")
    return M


def game_from_dict(doc: dict) -> LQGame:
    try:
        players = doc["players"]
    except (KeyError, TypeError):
        raise InvalidGame("instance document has no 'players' list") from None
    if not players:
        raise InvalidGame("instance document has an empty 'players' list")
    Qs = [np.asarray(p["Q"], dtype=float) for p in players]
    cs = [np.asarray(p["c"], dtype=float) for p in players]
    n = Qs[0].shape[0]
    if all("n" in p for p in players):
        sizes = [int(p["n"]) for p in players]
    else:
        if n % len(players):
            raise InvalidGame(f"cannot split {n} variables equally among {len(players)} players; give 'n' per player")
        sizes = [n // len(players)] * len(players)
    A = _matrix(doc, "A", n)
    E = _matrix(doc, "E", n)
    b = np.asarray(doc.get("b") or [], dtype=float)
    f = np.asarray(doc.get("f") or [], dtype=float)
    lb = doc.get("lb")
    return LQGame.from_arrays(Qs, cs, sizes, A, b, E, f, None if lb is None else np.asarray(lb, dtype=float))


def save_game(game: LQGame, path: str | Path) -> None:
    Path(path).write_text(dumps(game_to_dict(game)))


def load_game(path: str | Path) -> LQGame:
    return game_from_dict(json.loads(Path(path).read_text()))


def solution_to_dict(x, lam, nu, **extra) -> dict:
    doc: dict[str, Any] = {"x": np.asarray(x, dtype=float), "lambda": np.asarray(lam, dtype=float),
                           "nu": np.asarray(nu, dtype=float)}
    doc.update(extra)
    return doc


def save_solution(path: str | Path, x, lam, nu, **extra) -> None:
    Path(path).write_text(dumps(solution_to_dict(x, lam, nu, **extra)))


def load_solution(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    try:
        return (np.asarray(doc["x"], dtype=float), np.asarray(doc.get("lambda", []), dtype=float),
                np.asarray(doc.get("nu", []), dtype=float))
    except KeyError:
        raise InvalidGame("solution document has no 'x'") from None
