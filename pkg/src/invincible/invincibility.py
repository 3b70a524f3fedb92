"""Opponent-space sampling and counterexample search around invincibility.

A memory-one strategy never loses in the long run iff it never cooperates
after mutual defection and ``p2 + p3 <= 1``.  This module checks that claim
numerically: it sweeps opponents, records where the stationary law lands in
the ``(v2, v3)`` plane, hunts for opponents that out-score a strategy, and
labels the degenerate ``D = 0`` pairings.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, TextIO

import numpy as np

from .markov import (
    EPS_D, determinants, initial_distribution, solve_stationary_arrays, stationary_analytic,
    stationary_cesaro,
)
from .strategies import (
    DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, corner_strategies, format_literal,
    is_invincible,
)

#: Slack on score and v2/v3 comparisons.
MARGIN_TOL = 1e-9

ALLD = MemoryOneStrategy(0.0, (0.0, 0.0, 0.0, 0.0), "Defector")
# cooperates only after mutual defection; exposes p2 + p3 > 1
DD_COOPERATOR = MemoryOneStrategy(0.0, (0.0, 0.0, 0.0, 1.0), "0:0,0,0,1")
WITNESSES = (ALLD, DD_COOPERATOR)
DOUBLE_DEFECT_START = np.array([0.0, 0.0, 0.0, 1.0])


def uniform_block(seed: int, n: int, dim: int = 4) -> np.ndarray:
    """Counter-based uniforms: row ``i`` depends only on ``(seed, i)``."""
    return np.random.Generator(np.random.Philox(key=seed)).random((n, dim))


@dataclass(frozen=True)
class OpponentSample:
    q: MemoryOneStrategy
    v2: float
    v3: float
    sx: float
    sy: float
    degenerate: bool


@dataclass(frozen=True)
class CloudGrid:
    """Opponents to sweep: a lattice with spacing ``step`` and/or ``n_random`` draws."""

    step: Optional[float] = 0.1
    n_random: int = 0
    seed: int = 0
    q0: float = 1.0

    def points(self) -> np.ndarray:
        blocks = []
        if self.step is not None:
            k = int(round(1 / self.step))
            if k < 1 or abs(k * self.step - 1) > 1e-9:
                raise ValueError(f"lattice step must divide 1, got {self.step}")
            axis = np.linspace(0.0, 1.0, k + 1)
            blocks.append(np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"),
                                   axis=-1).reshape(-1, 4))
        if self.n_random:
            blocks.append(uniform_block(self.seed, self.n_random))
        if not blocks:
            raise ValueError("grid defines no opponents")
        return np.concatenate(blocks)


def _evaluate(p: MemoryOneStrategy, Q: np.ndarray, q0: np.ndarray,
              payoffs: PayoffMatrix):
    """Stationary vectors of ``p`` against every row of ``Q``; Cesaro for D = 0 rows."""
    v, _, degenerate = solve_stationary_arrays(np.asarray(p.p), Q)
    for i in np.flatnonzero(degenerate):
        q = MemoryOneStrategy(q0[i], Q[i])
        v[i] = stationary_cesaro(p, q, payoffs=payoffs).v
    return v, v @ payoffs.sx, v @ payoffs.sy, degenerate


def sample_cloud(p: MemoryOneStrategy, grid: CloudGrid = CloudGrid(),
                 payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> list[OpponentSample]:
    Q = grid.points()
    q0 = np.full(len(Q), grid.q0)
    v, sx, sy, degenerate = _evaluate(p, Q, q0, payoffs)
    return [OpponentSample(MemoryOneStrategy(grid.q0, tuple(Q[i])), float(v[i, 1]),
                           float(v[i, 2]), float(sx[i]), float(sy[i]), bool(degenerate[i]))
            for i in range(len(Q))]


CLOUD_COLUMNS = ["q1", "q2", "q3", "q4", "v2", "v3", "sX", "sY", "degenerate"]


def write_cloud_csv(samples: Iterable[OpponentSample], out: Optional[TextIO] = None):
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CLOUD_COLUMNS)
    for s in samples:
        writer.writerow([*s.q.p, s.v2, s.v3, s.sx, s.sy, int(s.degenerate)])
    return None if out is not None else buf.getvalue()


def cloud_summary(samples: list[OpponentSample], max_witnesses: int = 5) -> dict:
    margins = np.array([s.v3 - s.v2 for s in samples])
    below = [s for s in samples if s.v2 > s.v3 + MARGIN_TOL]
    below.sort(key=lambda s: s.v3 - s.v2)
    return {
        "n": len(samples),
        "n_degenerate": sum(s.degenerate for s in samples),
        "fraction_above_diagonal": float(np.mean(margins >= -MARGIN_TOL)),
        "worst_margin": float(margins.min()),
        "witnesses": [format_literal(s.q) for s in below[:max_witnesses]],
    }


# -- counterexamples ------------------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    q: MemoryOneStrategy
    sx: float
    sy: float


def find_counterexample(p: MemoryOneStrategy, payoffs: PayoffMatrix = DEFAULT_PAYOFFS,
                        budget: int = 10 ** 5, seed: int = 0,
                        chunk: int = 10 ** 4) -> Optional[Counterexample]:
    """An opponent scoring above ``p``; the two proof witnesses are tried first."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    for q in WITNESSES[:budget]:
        res = stationary_analytic(p, q, payoffs)
        if res.sy > res.sx + MARGIN_TOL:
            return Counterexample(q, res.sx, res.sy)
    remaining = budget - len(WITNESSES)
    if remaining <= 0:
        return None
    Q_all = uniform_block(seed, remaining, 5)
    for start in range(0, remaining, chunk):
        block = Q_all[start:start + chunk]
        v, sx, sy, _ = _evaluate(p, block[:, 1:], block[:, 0], payoffs)
        hits = np.flatnonzero(sy > sx + MARGIN_TOL)
        if hits.size:
            i = hits[0]
            return Counterexample(MemoryOneStrategy(block[i, 0], tuple(block[i, 1:])),
                                  float(sx[i]), float(sy[i]))
    return None


def _sufficiency_term(p: MemoryOneStrategy, q: MemoryOneStrategy) -> float:
    """Non-negative whenever ``p2 + p3 <= 1``; times ``q4`` it equals ``D2 - D3`` if ``p4 = 0``."""
    p1, p2, p3, _ = p.p
    q1, q2, q3, _ = q.p
    return (1 - p2 - p3) * (1 - p1 * q1) + (1 - p1) * p3 * q2 + (1 - p1) * p2 * q3


# -- D = 0 edge cases -------------------------------------------------------------

class EdgeCase(Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"
    CASE5 = "Case5"
    CASE6 = "Case6"
    CASE7 = "Case7"
    GENERIC_DEGENERATE = "GenericDegenerate"
    NON_DEGENERATE = "NonDegenerate"


class Verdict(Enum):
    INVINCIBLE = "Invincible"
    NOT_INVINCIBLE = "NotInvincible"
    INVINCIBLE_WITH_FIRST_MOVE_D = "InvincibleWithFirstMoveD"


@dataclass(frozen=True)
class EdgeCaseReport:
    case_id: EdgeCase
    verdict: Verdict
    rationale: str
    #: opening with D removes any loss for this pattern
    defect_first_fixes: bool = True

    def as_dict(self) -> dict:
        return {"case": self.case_id.value, "verdict": self.verdict.value,
                "rationale": self.rationale, "defect_first_fixes": self.defect_first_fixes}


REPEAT = (1.0, 1.0, 0.0, 0.0)

_PATTERNS = {
    (0.0, 0.0, 0.0, 0.0): (EdgeCase.CASE1, Verdict.INVINCIBLE,
                           "always defects, so the co-player can never collect T"),
    (0.0, 0.0, 1.0, 0.0): (EdgeCase.CASE2, Verdict.INVINCIBLE,
                           "cooperates only right after exploiting, so every CD follows a DC"),
    (0.0, 1.0, 0.0, 0.0): (EdgeCase.CASE3, Verdict.NOT_INVINCIBLE,
                           "keeps cooperating after being exploited; CD can absorb"),
    (1.0, 0.0, 0.0, 0.0): (EdgeCase.CASE4, Verdict.INVINCIBLE,
                           "grim trigger: CD occurs at most once"),
    (1.0, 0.0, 1.0, 0.0): (EdgeCase.CASE5, Verdict.INVINCIBLE,
                           "tit for tat: CD and DC alternate, counts differ by at most one"),
    (1.0, 1.0, 0.0, 0.0): (EdgeCase.CASE6, Verdict.NOT_INVINCIBLE,
                           "repeat: an opening C is kept forever, even against a defector"),
}


def corner_pattern(p: MemoryOneStrategy) -> Optional[EdgeCaseReport]:
    """Edge-case verdict that depends on ``p`` alone (Cases 1-6), or None."""
    pattern = _PATTERNS.get(p.p)
    if pattern is None:
        return None
    case, verdict, why = pattern
    if verdict is Verdict.NOT_INVINCIBLE and p.p0 == 0:
        verdict = Verdict.INVINCIBLE_WITH_FIRST_MOVE_D
        why += "; opening with D it never cooperates"
    return EdgeCaseReport(case, verdict, why)


def is_invincible_with_opening(p: MemoryOneStrategy) -> bool:
    """Closed-form conditions plus the corner patterns that an opening C breaks."""
    report = corner_pattern(p)
    return is_invincible(p) and (report is None or report.verdict is not Verdict.NOT_INVINCIBLE)


def _margin(p, q, initial, payoffs) -> float:
    res = stationary_cesaro(p, q, initial, payoffs=payoffs)
    return res.sx - res.sy


def classify_edge_case(p: MemoryOneStrategy, q: MemoryOneStrategy,
                       payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> EdgeCaseReport:
    D = determinants(p, q).D
    if abs(D) > EPS_D:
        inv = is_invincible(p)
        return EdgeCaseReport(EdgeCase.NON_DEGENERATE,
                              Verdict.INVINCIBLE if inv else Verdict.NOT_INVINCIBLE,
                              f"D = {D:.6g}: unique stationary law", inv)
    report = corner_pattern(p)
    if report is not None:
        return report
    if q.p == REPEAT and all(0 < x < 1 for x in p.p):
        return EdgeCaseReport(EdgeCase.CASE7, Verdict.INVINCIBLE_WITH_FIRST_MOVE_D,
                              "co-player repeats its own opening move forever")
    first = _margin(p, q, initial_distribution(p, q), payoffs)
    dd = _margin(p, q, DOUBLE_DEFECT_START, payoffs)
    if first >= -MARGIN_TOL:
        verdict = Verdict.INVINCIBLE
    elif dd >= -MARGIN_TOL:
        verdict = Verdict.INVINCIBLE_WITH_FIRST_MOVE_D
    else:
        verdict = Verdict.NOT_INVINCIBLE
    return EdgeCaseReport(EdgeCase.GENERIC_DEGENERATE, verdict,
                          f"D = 0; margin {first:.3g} from the opening, {dd:.3g} from DD",
                          dd >= -MARGIN_TOL)


# -- empirical check ------------------------------------------------------------------

@dataclass
class InvincibilityReport:
    strategy: MemoryOneStrategy
    passed: bool
    worst_margin: float
    witness: Optional[MemoryOneStrategy]
    n_checked: int
    n_degenerate: int
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "strategy": format_literal(self.strategy),
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "witness": format_literal(self.witness) if self.witness else None,
            "n_checked": self.n_checked,
            "n_degenerate": self.n_degenerate,
            "failures": [format_literal(q) for q in self.failures[:10]],
        }


def opponent_panel(n_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random opponents plus all deterministic corners (both openings) and the witnesses."""
    draws = uniform_block(seed, n_samples, 5)
    corners = [c.p for c in corner_strategies()]
    Q = np.concatenate([draws[:, 1:], np.array(corners * 2),
                        np.array([w.p for w in WITNESSES])])
    q0 = np.concatenate([draws[:, 0], np.ones(16), np.zeros(16),
                         np.array([w.p0 for w in WITNESSES])])
    return Q, q0


def verify_invincible_empirically(p: MemoryOneStrategy,
                                  payoffs: PayoffMatrix = DEFAULT_PAYOFFS,
                                  n_samples: int = 1000, seed: int = 0) -> InvincibilityReport:
    """Score ``p`` against a panel of opponents; pass iff it never trails.

    Degenerate pairings count as passed when the opening actually played
    does not lose, or when the edge-case verdict says opening with D is safe
    and the all-DD start does not lose either.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    Q, q0 = opponent_panel(n_samples, seed)
    v, _, degenerate = solve_stationary_arrays(np.asarray(p.p), Q)
    margins = v @ payoffs.sx - v @ payoffs.sy
    for i in np.flatnonzero(degenerate):
        q = MemoryOneStrategy(q0[i], Q[i])
        m = _margin(p, q, initial_distribution(p, q), payoffs)
        if m < -MARGIN_TOL:
            report = classify_edge_case(p, q, payoffs)
            if report.verdict is Verdict.INVINCIBLE_WITH_FIRST_MOVE_D and p.p0 == 0:
                m = max(m, _margin(p, q, DOUBLE_DEFECT_START, payoffs))
        margins[i] = m
    bad = np.flatnonzero(margins < -MARGIN_TOL)
    worst = int(np.argmin(margins))
    return InvincibilityReport(
        strategy=p,
        passed=bad.size == 0,
        worst_margin=float(margins[worst]),
        witness=MemoryOneStrategy(q0[worst], tuple(Q[worst])),
        n_checked=len(Q),
        n_degenerate=int(degenerate.sum()),
        failures=[MemoryOneStrategy(q0[i], tuple(Q[i])) for i in bad],
    )


def summary_json(samples: list[OpponentSample], p: MemoryOneStrategy, grid: CloudGrid) -> str:
    doc = {"schema_version": 1, "p": format_literal(p),
           "grid": {"step": grid.step, "n_random": grid.n_random, "seed": grid.seed,
                    "q0": grid.q0}}
    doc.update(cloud_summary(samples))
    return json.dumps(doc, indent=2)
