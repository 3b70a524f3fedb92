"""Markov chain of a memory-one pair: transition matrix, determinants, stationary laws.

Matrices are row-stochastic: row ``i`` holds the probabilities of moving from
state ``i`` (CC, CD, DC, DD order, focal player first) to each next state, so a
round distribution evolves as ``v_next = v @ M``.

The analytic route solves the 4x4 system built from the two Press-Dyson
vectors, the CC balance row and the normalisation row; its determinant is
``D``.  Replacing column 2 or 3 by ``(0, 0, 0, 1)`` gives ``D2`` and ``D3`` and
``v2 = D2 / D``, ``v3 = D3 / D``.  When ``|D|`` is tiny the stationary law is
not unique and the Cesaro average of the round distributions is used instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .strategies import DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, format_literal

#: |D| at or below this is treated as the D = 0 regime.
EPS_D = 1e-10

CESARO_MAX_ROUNDS = 2 ** 40
CESARO_TOL = 1e-10
CESARO_FIRST_CHECKPOINT = 1024


class NonConvergent(RuntimeError):
    def __init__(self, average: np.ndarray, gap: float, rounds: int):
        self.average = average
        self.gap = gap
        self.rounds = rounds
        super().__init__(f"Cesaro average not converged after {rounds} rounds (gap {gap:.3g})")


@dataclass(frozen=True)
class Determinants:
    D: float
    D2: float
    D3: float


@dataclass(frozen=True)
class StationaryResult:
    v: np.ndarray
    dets: Determinants
    sx: float
    sy: float
    method: str  # "analytic" or "cesaro"
    degenerate: bool
    initial: Optional[np.ndarray] = None
    rounds: Optional[int] = None
    gap: Optional[float] = field(default=None, compare=False)

    @property
    def winner(self) -> str:
        if self.sx > self.sy + 1e-9:
            return "X"
        if self.sy > self.sx + 1e-9:
            return "Y"
        return "tie"

    def as_dict(self) -> dict:
        out = {
            "v": [float(x) for x in self.v],
            "D": self.dets.D, "D2": self.dets.D2, "D3": self.dets.D3,
            "sX": self.sx, "sY": self.sy,
            "method": self.method, "degenerate": self.degenerate,
            "winner": self.winner,
        }
        if self.initial is not None:
            out["initial"] = [float(x) for x in self.initial]
            out["rounds"] = self.rounds
            out["gap"] = self.gap
        return out


# -- array kernels (trailing axis of length 4, any leading batch shape) --------

def _split(a):
    a = np.asarray(a, dtype=float)
    return a[..., 0], a[..., 1], a[..., 2], a[..., 3]


def transition_matrices(P, Q) -> np.ndarray:
    P, Q = np.broadcast_arrays(np.asarray(P, dtype=float), np.asarray(Q, dtype=float))
    p1, p2, p3, p4 = _split(P)
    q1, q2, q3, q4 = _split(Q)
    # the co-player sees CD as DC, hence q3 on row CD and q2 on row DC
    x = np.stack([p1, p2, p3, p4], axis=-1)
    y = np.stack([q1, q3, q2, q4], axis=-1)
    return np.stack([x * y, x * (1 - y), (1 - x) * y, (1 - x) * (1 - y)], axis=-1)


def system_matrices(P, Q) -> np.ndarray:
    P, Q = np.broadcast_arrays(np.asarray(P, dtype=float), np.asarray(Q, dtype=float))
    p1, p2, p3, p4 = _split(P)
    q1, q2, q3, q4 = _split(Q)
    one = np.ones_like(p1)
    rows = [
        [p1 - 1, p2 - 1, p3, p4],
        [q1 - 1, q3, q2 - 1, q4],
        [p1 * q1 - 1, p2 * q3, p3 * q2, p4 * q4],
        [one, one, one, one],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def determinant_arrays(P, Q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    A = system_matrices(P, Q)
    unit = np.array([0.0, 0.0, 0.0, 1.0])
    A2 = A.copy()
    A2[..., :, 1] = unit
    A3 = A.copy()
    A3[..., :, 2] = unit
    return np.linalg.det(A), np.linalg.det(A2), np.linalg.det(A3)


def _clean(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    return v / v.sum(axis=-1, keepdims=True)


def solve_stationary_arrays(P, Q):
    """Analytic stationary vectors for a batch; degenerate rows come back as NaN."""
    A = system_matrices(P, Q)
    D = np.linalg.det(A)
    ok = np.abs(D) > EPS_D
    v = np.full(A.shape[:-1], np.nan)
    if ok.any():
        rhs = np.broadcast_to(np.array([0.0, 0.0, 0.0, 1.0]), A[ok].shape[:-1])
        v[ok] = _clean(np.linalg.solve(A[ok], rhs[..., None])[..., 0])
    return v, D, ~ok


# -- scalar API -------------------------------------------------------------

def build_matrix(p: MemoryOneStrategy, q: MemoryOneStrategy) -> np.ndarray:
    return transition_matrices(p.p, q.p)


def initial_distribution(p: MemoryOneStrategy, q: MemoryOneStrategy) -> np.ndarray:
    a, b = p.p0, q.p0
    return np.array([a * b, a * (1 - b), (1 - a) * b, (1 - a) * (1 - b)])


def determinants(p: MemoryOneStrategy, q: MemoryOneStrategy) -> Determinants:
    D, D2, D3 = determinant_arrays(p.p, q.p)
    return Determinants(float(D), float(D2), float(D3))


def _scores(v: np.ndarray, payoffs: PayoffMatrix) -> tuple[float, float]:
    return float(v @ payoffs.sx), float(v @ payoffs.sy)


def stationary_analytic(p: MemoryOneStrategy, q: MemoryOneStrategy,
                        payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> StationaryResult:
    dets = determinants(p, q)
    if abs(dets.D) <= EPS_D:
        return stationary_cesaro(p, q, initial_distribution(p, q), payoffs=payoffs)
    A = system_matrices(p.p, q.p)
    v = _clean(np.linalg.solve(A, np.array([0.0, 0.0, 0.0, 1.0])))
    sx, sy = _scores(v, payoffs)
    return StationaryResult(v, dets, sx, sy, "analytic", False)


def _combine(first, second):
    """(M^a, S_a, a) and (M^b, S_b, b) -> (M^(a+b), S_(a+b), a+b), S_n = sum_{j<n} M^j.

    Row sums are known exactly (1 and n); rescaling to them stops rounding
    error from compounding through repeated squaring.
    """
    Pa, Sa, a = first
    Pb, Sb, b = second
    P = Pa @ Pb
    S = Sa + Pa @ Sb
    P /= P.sum(axis=-1, keepdims=True)
    S *= (a + b) / S.sum(axis=-1, keepdims=True)
    return P, S, a + b


def _power_sum(M: np.ndarray, n: int):
    eye = np.eye(4)
    result = (eye, np.zeros((4, 4)), 0)
    base = (M, eye, 1)
    while n:
        if n & 1:
            result = _combine(result, base) if result[2] else base
        n >>= 1
        if n:
            base = _combine(base, base)
    return result


def cesaro_average(M: np.ndarray, initial: np.ndarray,
                   max_rounds: int = CESARO_MAX_ROUNDS, tol: float = CESARO_TOL,
                   first_checkpoint: int = CESARO_FIRST_CHECKPOINT):
    """Running mean of ``initial @ M^k`` for ``k < n`` with ``n`` doubling per checkpoint.

    Partial sums are built by repeated squaring, so reaching ``n`` rounds
    costs ``O(log n)`` products.  Stops once two consecutive checkpoints
    differ by less than ``tol`` in max-norm.  Returns ``(average, rounds, gap)``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    initial = np.asarray(initial, dtype=float)
    n = min(first_checkpoint, max_rounds)
    half = _power_sum(M, n // 2) if n >= 2 else None
    state = _power_sum(M, n)
    avg = initial @ state[1] / n
    gap = float(np.max(np.abs(avg - initial @ half[1] / (n // 2)))) if half else np.inf
    while gap >= tol and n < max_rounds:
        step = min(n, max_rounds - n)
        state = _combine(state, state if step == n else _power_sum(M, step))
        n += step
        nxt = initial @ state[1] / n
        gap = float(np.max(np.abs(nxt - avg)))
        avg = nxt
    if gap >= tol:
        raise NonConvergent(avg, gap, n)
    return _clean(avg), n, gap


def stationary_cesaro(p: MemoryOneStrategy, q: MemoryOneStrategy,
                      initial: Optional[Sequence[float]] = None,
                      max_rounds: int = CESARO_MAX_ROUNDS, tol: float = CESARO_TOL,
                      payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> StationaryResult:
    if initial is None:
        initial = initial_distribution(p, q)
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (4,) or (initial < 0).any() or abs(initial.sum() - 1) > 1e-12:
        raise ValueError(f"initial must be a distribution over 4 states, got {initial}")
    v, rounds, gap = cesaro_average(build_matrix(p, q), initial, max_rounds, tol)
    dets = determinants(p, q)
    sx, sy = _scores(v, payoffs)
    return StationaryResult(v, dets, sx, sy, "cesaro", abs(dets.D) <= EPS_D,
                            initial=initial, rounds=rounds, gap=gap)


def press_dyson_matrix(p: MemoryOneStrategy, q: MemoryOneStrategy, f) -> np.ndarray:
    p1, p2, p3, p4 = p.p
    q1, q2, q3, q4 = q.p
    f1, f2, f3, f4 = (float(x) for x in f)
    return np.array([
        [p1 * q1 - 1, p1 - 1, q1 - 1, f1],
        [p2 * q3, p2 - 1, q3, f2],
        [p3 * q2, p3, q2 - 1, f3],
        [p4 * q4, p4, q4, f4],
    ])


def press_dyson_dot(p: MemoryOneStrategy, q: MemoryOneStrategy, f) -> float:
    """Unnormalised ``v . f``; divide by ``press_dyson_dot(p, q, 1)`` for the mean."""
    return float(np.linalg.det(press_dyson_matrix(p, q, f)))


def akin_residual(p: MemoryOneStrategy, v) -> float:
    p1, p2, p3, p4 = p.p
    v1, v2, v3, v4 = (float(x) for x in v)
    return abs(v1 * (p1 - 1) + v2 * (p2 - 1) + v3 * p3 + v4 * p4)


# -- exact arithmetic -------------------------------------------------------

def exact_det(rows: Sequence[Sequence]) -> Fraction:
    """Laplace expansion along the first row; exact for ints and Fractions."""
    n = len(rows)
    if n == 1:
        return Fraction(rows[0][0])
    total = Fraction(0)
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * Fraction(rows[0][j]) * exact_det(minor)
    return total


def exact_system(p: Sequence, q: Sequence) -> list[list[Fraction]]:
    p1, p2, p3, p4 = (Fraction(x) for x in p)
    q1, q2, q3, q4 = (Fraction(x) for x in q)
    return [
        [p1 - 1, p2 - 1, p3, p4],
        [q1 - 1, q3, q2 - 1, q4],
        [p1 * q1 - 1, p2 * q3, p3 * q2, p4 * q4],
        [Fraction(1)] * 4,
    ]


def exact_D(p: Sequence, q: Sequence) -> Fraction:
    return exact_det(exact_system(p, q))


# -- CSV batch interface ----------------------------------------------------

STATIONARY_COLUMNS = ["p", "q", "D", "D2", "D3", "v1", "v2", "v3", "v4",
                      "sX", "sY", "method", "degenerate"]


def stationary_row(p: MemoryOneStrategy, q: MemoryOneStrategy, res: StationaryResult) -> dict:
    row = {"p": format_literal(p), "q": format_literal(q),
           "D": res.dets.D, "D2": res.dets.D2, "D3": res.dets.D3}
    row.update({f"v{i + 1}": float(x) for i, x in enumerate(res.v)})
    row.update({"sX": res.sx, "sY": res.sy, "method": res.method,
                "degenerate": int(res.degenerate)})
    return row


def write_stationary_csv(pairs: Iterable[tuple[MemoryOneStrategy, MemoryOneStrategy]],
                         out: Optional[TextIO] = None,
                         payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> Optional[str]:
    """One row per pair in ``STATIONARY_COLUMNS`` order; returns text if ``out`` is None."""
    buf = out if out is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=STATIONARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for p, q in pairs:
        writer.writerow(stationary_row(p, q, stationary_analytic(p, q, payoffs)))
    return None if out is not None else buf.getvalue()
