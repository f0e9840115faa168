"""Bradley-Terry ranking of two-alternative forced-choice study responses.

Raw (item, method_a, method_b, choice) rows are tallied into a pairwise win
matrix, maximum-likelihood strengths come from the standard minorize-maximize
iteration, and the report lists methods by descending score.  Scores are
normalized to sum to 1, a pure reporting convention since the model itself is
scale-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PairwiseTally",
    "BTScores",
    "ingest_responses",
    "bt_fit",
    "ranking",
    "report",
    "report_json",
]


@dataclass(frozen=True)
class PairwiseTally:
    """Win counts between methods: wins[i, j] = times method i beat method j."""

    methods: tuple[str, ...]
    wins: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.methods)
        arr = np.asarray(self.wins)
        if arr.shape != (n, n):
            raise ValueError(f"wins must be {n}x{n}, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("win counts must be integers")
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValueError("win counts must be non-negative")
        if np.any(np.diag(arr) != 0):
            raise ValueError("a method cannot beat itself; diagonal must be zero")
        if len(set(self.methods)) != n:
            raise ValueError("method names must be unique")
        arr.flags.writeable = False
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "wins", arr)

    @property
    def total(self) -> int:
        return int(self.wins.sum())


@dataclass(frozen=True)
class BTScores:
    """Normalized Bradley-Terry strengths, aligned with ``methods``."""

    methods: tuple[str, ...]
    scores: np.ndarray
    iterations: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if arr.shape != (len(self.methods),):
            raise ValueError("scores and methods must have the same length")
        if np.any(arr <= 0):
            raise ValueError("scores must be positive")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise ValueError(f"scores must sum to 1, got {float(arr.sum())}")
        arr.flags.writeable = False
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "scores", arr)


def ingest_responses(rows) -> PairwiseTally:
    """Tally an iterable of (item_id, method_a, method_b, choice) rows.

    ``choice`` picks the winner: "a" or "b".  Methods are indexed in
    first-seen order.  A malformed row raises with its 1-based row number.
    """
    methods: list[str] = []
    index: dict[str, int] = {}
    pairs: list[tuple[int, int]] = []
    for k, row in enumerate(rows, start=1):
        try:
            _, method_a, method_b, choice = row
        except (TypeError, ValueError):
            raise ValueError(f"row {k}: expected 4 fields, got {row!r}") from None
        method_a = str(method_a).strip()
        method_b = str(method_b).strip()
        choice = str(choice).strip().lower()
        if not method_a or not method_b:
            raise ValueError(f"row {k}: method names must be nonempty")
        if method_a == method_b:
            raise ValueError(f"row {k}: a method cannot be compared with itself")
        if choice not in ("a", "b"):
            raise ValueError(f"row {k}: choice must be 'a' or 'b', got {choice!r}")
        for name in (method_a, method_b):
            if name not in index:
                index[name] = len(methods)
                methods.append(name)
        winner, loser = (method_a, method_b) if choice == "a" else (method_b, method_a)
        pairs.append((index[winner], index[loser]))
    wins = np.zeros((len(methods), len(methods)), dtype=np.int64)
    for i, j in pairs:
        wins[i, j] += 1
    return PairwiseTally(methods=tuple(methods), wins=wins)


def _check_fittable(tally: PairwiseTally) -> None:
    w = tally.wins.sum(axis=1)
    zero = [m for m, wi in zip(tally.methods, w) if wi == 0]
    if zero:
        raise ValueError(
            "methods with zero wins make the maximum-likelihood scores "
            f"degenerate: {', '.join(zero)} (enable add-half smoothing to proceed)"
        )
    n = len(tally.methods)
    adjacency = (tally.wins + tally.wins.T) > 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(adjacency[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    if not seen.all():
        missing = [m for m, s in zip(tally.methods, seen) if not s]
        raise ValueError(
            "comparison graph is disconnected; unreachable methods: "
            + ", ".join(missing)
        )


def bt_fit(
    tally: PairwiseTally,
    max_iters: int = 1000,
    tol: float = 1e-10,
    add_half: bool = False,
) -> BTScores:
    """Maximum-likelihood Bradley-Terry strengths by minorize-maximize.

    Iterates p_i <- W_i / sum_j N_ij / (p_i + p_j) and renormalizes, stopping
    when the largest relative score change drops below ``tol``.  Methods with
    no wins or a disconnected comparison graph have no finite ML optimum and
    raise, naming the offenders; ``add_half`` adds half a win to every ordered
    pair instead (Laplace-style smoothing, off by default to keep the fit
    faithful to the raw counts).
    """
    n = len(tally.methods)
    if n == 0:
        raise ValueError("cannot fit an empty tally")
    if n == 1:
        return BTScores(methods=tally.methods, scores=np.array([1.0]), iterations=0)
    wins = tally.wins.astype(np.float64)
    if add_half:
        wins = wins + 0.5
        np.fill_diagonal(wins, 0.0)
    else:
        _check_fittable(tally)
    w = wins.sum(axis=1)
    n_ij = wins + wins.T
    p = np.full(n, 1.0 / n)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        # Diagonal terms vanish (n_ii = 0), so the pair sums never divide by 0.
        denom = (n_ij / (p[:, None] + p[None, :])).sum(axis=1)
        p_new = w / denom
        p_new = p_new / p_new.sum()
        rel = float(np.max(np.abs(p_new - p) / p))
        p = p_new
        if rel < tol:
            break
    return BTScores(methods=tally.methods, scores=p, iterations=iterations)


def ranking(scores: BTScores) -> list[tuple[str, float]]:
    """(method, score) pairs sorted by descending score; ties keep first-seen order."""
    order = sorted(range(len(scores.methods)), key=lambda i: (-scores.scores[i], i))
    return [(scores.methods[i], float(scores.scores[i])) for i in order]


def report(scores: BTScores) -> str:
    """Aligned text table of the ranking with 4-decimal scores."""
    rows = ranking(scores)
    name_width = max(len(name) for name, _ in rows)
    lines = [f"{name:<{name_width}}  {value:.4f}" for name, value in rows]
    return "\n".join(lines)


def report_json(scores: BTScores) -> str:
    """The same ranking as a JSON array of {method, score} objects."""
    rows = [{"method": m, "score": round(s, 10)} for m, s in ranking(scores)]
    return json.dumps(rows, indent=2)
