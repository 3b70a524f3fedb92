"""Executable property suites behind ``invincible verify``.

Each suite returns a :class:`SuiteResult` carrying the number of cases
checked, the worst observed value of its test statistic and, on failure, a
witness that breaks the property.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .invincibility import find_counterexample, uniform_block, verify_invincible_empirically
from .markov import (EPS_D, akin_residual, determinant_arrays, exact_D,
                     solve_stationary_arrays, stationary_analytic, stationary_cesaro)
from .strategies import (DEFAULT_PAYOFFS, ExtortionParams, MemoryOneStrategy, PayoffMatrix,
                         is_invincible, make_extortionate, max_extortion_scale)

D_TOL = 1e-12
AKIN_TOL = 1e-8
ORACLE_TOL = 1e-6
SCORE_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: bool
    n_checked: int
    worst: float
    witness: Optional[str] = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "n_checked": self.n_checked,
                "worst": self.worst, "witness": self.witness, **self.details}


def _pair_literal(p, q) -> str:
    fmt = lambda xs: ",".join(repr(float(x)) for x in xs)
    return f"p=({fmt(p)}) q=({fmt(q)})"


def _random_pairs(seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    u = uniform_block(seed, n, 8)
    return u[:, :4], u[:, 4:]


def theorem1(n_samples: int = 10 ** 5, seed: int = 0) -> SuiteResult:
    """D <= 0: exact on every deterministic pair, within D_TOL on random pairs."""
    corners = list(itertools.product((0, 1), repeat=4))
    exact_worst = max(exact_D(p, q) for p in corners for q in corners)
    bad_corner = next(((p, q) for p in corners for q in corners if exact_D(p, q) > 0), None)
    P, Q = _random_pairs(seed, n_samples)
    D, _, _ = determinant_arrays(P, Q)
    i = int(np.argmax(D))
    passed = bool(bad_corner is None and D[i] <= D_TOL)
    witness = None
    if bad_corner is not None:
        witness = _pair_literal(*bad_corner)
    elif not passed:
        witness = _pair_literal(P[i], Q[i])
    return SuiteResult("theorem1", passed, len(corners) ** 2 + n_samples, float(D[i]), witness,
                       {"n_corners": len(corners) ** 2, "corner_max_D": float(exact_worst)})


def theorem2(n_samples: int = 10 ** 4, seed: int = 1,
             payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> SuiteResult:
    """sX - sY = (T - S)(v3 - v2) on non-degenerate pairs, so the signs agree."""
    P, Q = _random_pairs(seed, n_samples)
    v, _, degenerate = solve_stationary_arrays(P, Q)
    ok = ~degenerate
    gap = v[ok] @ payoffs.sx - v[ok] @ payoffs.sy
    err = np.abs(gap - (payoffs.T - payoffs.S) * (v[ok, 2] - v[ok, 1]))
    i = int(np.argmax(err))
    passed = bool(err[i] <= SCORE_TOL)
    witness = None if passed else _pair_literal(P[ok][i], Q[ok][i])
    return SuiteResult("theorem2", passed, int(ok.sum()), float(err[i]), witness,
                       {"n_degenerate": int(degenerate.sum())})


def sample_invincible(seed: int, n: int) -> list[MemoryOneStrategy]:
    """Random strategies with p4 = 0 and p2 + p3 <= 1 (folded onto the triangle)."""
    u = uniform_block(seed, n, 4)
    out = []
    for p0, p1, a, b in u:
        if a + b > 1:
            a, b = 1 - a, 1 - b
        out.append(MemoryOneStrategy(float(p0), (float(p1), float(a), float(b), 0.0)))
    return out


def sample_vulnerable(seed: int, n: int) -> list[MemoryOneStrategy]:
    """Random strategies breaking p4 = 0 or p2 + p3 <= 1; alternates the two failures."""
    u = uniform_block(seed, n, 5)
    out = []
    for k, (p0, p1, a, b, c) in enumerate(u):
        if k % 2 == 0:
            # p4 > 0, rest unconstrained
            p = (p1, a, b, max(c, 1e-3))
        else:
            if a + b <= 1:
                a, b = 1 - a, 1 - b
            p = (p1, a, b, 0.0)
        out.append(MemoryOneStrategy(float(p0), tuple(float(x) for x in p)))
    return out


def theorem4(n_strategies: int = 10 ** 3, n_opponents: int = 10 ** 3, seed: int = 2,
             payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> SuiteResult:
    """Sufficiency by sampling and necessity via the two proof witnesses."""
    worst, witness, n_fail_a = np.inf, None, 0
    for k, p in enumerate(sample_invincible(seed, n_strategies)):
        rep = verify_invincible_empirically(p, payoffs, n_opponents, seed + k)
        if rep.worst_margin < worst:
            worst = rep.worst_margin
        if not rep.passed:
            n_fail_a += 1
            witness = witness or f"{p.label} trails {rep.witness.label}"
    n_fail_b = 0
    for p in sample_vulnerable(seed + 1, n_strategies):
        if find_counterexample(p, payoffs, budget=2) is None:
            n_fail_b += 1
            witness = witness or f"{p.label} survives both witnesses"
    return SuiteResult("theorem4", n_fail_a == 0 and n_fail_b == 0, 2 * n_strategies,
                       float(worst), witness,
                       {"sufficiency_failures": n_fail_a, "necessity_failures": n_fail_b})


def theorem5(n_samples: int = 10 ** 3, seed: int = 3, chi_max: float = 10.0,
             payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> SuiteResult:
    """Every admissible extortionate strategy is invincible, strictly inside when chi > 1."""
    u = uniform_block(seed, n_samples, 2)
    worst, witness = -np.inf, None
    for a, b in u:
        chi = 1.0 + (chi_max - 1.0) * a
        phi = max_extortion_scale(chi, payoffs) * (1.0 - b)
        s = make_extortionate(ExtortionParams(chi, phi), payoffs)
        slack = s.p[1] + s.p[2] - 1.0
        worst = max(worst, slack)
        if not is_invincible(s) or (chi > 1 and slack >= 0):
            witness = witness or f"chi={chi!r} phi={phi!r} -> {s.label}"
    return SuiteResult("theorem5", witness is None, n_samples, float(worst), witness,
                       {"statistic": "max p2+p3-1"})


def akin(n_samples: int = 10 ** 4, seed: int = 4) -> SuiteResult:
    """Stationary vectors are orthogonal to (p1-1, p2-1, p3, p4)."""
    P, Q = _random_pairs(seed, n_samples)
    v, _, degenerate = solve_stationary_arrays(P, Q)
    ok = ~degenerate
    pt = P[ok] - np.array([1.0, 1.0, 0.0, 0.0])
    res = np.abs(np.einsum("ij,ij->i", v[ok], pt))
    i = int(np.argmax(res))
    passed = bool(res[i] <= AKIN_TOL)
    witness = None if passed else _pair_literal(P[ok][i], Q[ok][i])
    return SuiteResult("akin", passed, int(ok.sum()), float(res[i]), witness)


def oracle(n_samples: int = 10 ** 3, seed: int = 5) -> SuiteResult:
    """Analytic solution against the Cesaro average of the chain itself."""
    P, Q = _random_pairs(seed, n_samples)
    worst, witness, n = 0.0, None, 0
    for p_, q_ in zip(P, Q):
        p = MemoryOneStrategy(1.0, tuple(p_))
        q = MemoryOneStrategy(1.0, tuple(q_))
        a = stationary_analytic(p, q)
        if a.degenerate:
            continue
        n += 1
        err = float(np.max(np.abs(a.v - stationary_cesaro(p, q).v)))
        res = akin_residual(p, a.v)
        if err > worst:
            worst = err
        if err > ORACLE_TOL or res > AKIN_TOL:
            witness = witness or _pair_literal(p_, q_)
    return SuiteResult("oracle", witness is None, n, worst, witness)


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "theorem1": theorem1,
    "theorem2": theorem2,
    "theorem4": theorem4,
    "theorem5": theorem5,
    "akin": akin,
    "oracle": oracle,
}


def run_suite(name: str) -> list[SuiteResult]:
    if name == "all":
        return [fn() for fn in SUITES.values()]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return [SUITES[name]()]


__all__ = ["SuiteResult", "SUITES", "run_suite", "EPS_D", "sample_invincible",
           "sample_vulnerable"] + list(SUITES)
