"""Finite-round matches and round-robin tournaments.

Randomness is counter-based: every match owns a Philox stream keyed by
``(seed, match_id)`` and round ``r`` consumes uniforms ``[r, 0]`` (first
player) and ``[r, 1]`` (second player), so results never depend on the order
in which matches are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, TextIO

import numpy as np

from .strategies import DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, Rule


class MatchOutcome(Enum):
    WIN_X = "WinX"
    WIN_Y = "WinY"
    TIE = "Tie"


@dataclass(frozen=True)
class MatchConfig:
    rounds: int = 1000
    seed: int = 0
    payoffs: PayoffMatrix = DEFAULT_PAYOFFS
    record_trajectory: bool = False
    tie_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")

    @property
    def tie(self) -> float:
        """Score gap below which a match counts as drawn; defaults to 2 (T - S) / rounds."""
        if self.tie_tolerance is not None:
            return self.tie_tolerance
        return 2 * (self.payoffs.T - self.payoffs.S) / self.rounds


@dataclass
class MatchResult:
    distribution: np.ndarray
    avg_x: float
    avg_y: float
    outcome: MatchOutcome
    trajectory: Optional[np.ndarray] = None


def decide(avg_x: float, avg_y: float, tie: float) -> MatchOutcome:
    if avg_x - avg_y > tie:
        return MatchOutcome.WIN_X
    if avg_y - avg_x > tie:
        return MatchOutcome.WIN_Y
    return MatchOutcome.TIE


def match_stream(seed: int, match_id: int, rounds: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, match_id]))
    return gen.random((rounds, 2))


def _moves(x: Rule, y: Rule, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rounds = len(u)
    if isinstance(x, MemoryOneStrategy) and isinstance(y, MemoryOneStrategy):
        return _memory_one_moves(x, y, u)
    hx: list[bool] = []
    hy: list[bool] = []
    for r in range(rounds):
        cx = u[r, 0] < x.cooperation_probability(hx, hy)
        cy = u[r, 1] < y.cooperation_probability(hy, hx)
        hx.append(bool(cx))
        hy.append(bool(cy))
    return np.array(hx), np.array(hy)


def _memory_one_moves(x: MemoryOneStrategy, y: MemoryOneStrategy, u: np.ndarray):
    px, py = x.p, y.p
    ux = u[:, 0].tolist()
    uy = u[:, 1].tolist()
    hx = [False] * len(ux)
    hy = [False] * len(ux)
    cx = ux[0] < x.p0
    cy = uy[0] < y.p0
    hx[0], hy[0] = cx, cy
    for r in range(1, len(ux)):
        # state index from each player's own perspective
        sx = (0 if cx else 2) + (0 if cy else 1)
        sy = (0 if cy else 2) + (0 if cx else 1)
        cx = ux[r] < px[sx]
        cy = uy[r] < py[sy]
        hx[r], hy[r] = cx, cy
    return np.array(hx), np.array(hy)


def _states(hx: np.ndarray, hy: np.ndarray) -> np.ndarray:
    return np.where(hx, 0, 2) + np.where(hy, 0, 1)


def play_match(x: Rule, y: Rule, cfg: MatchConfig = MatchConfig(), match_id: int = 0) -> MatchResult:
    u = match_stream(cfg.seed, match_id, cfg.rounds)
    hx, hy = _moves(x, y, u)
    states = _states(hx, hy)
    counts = np.bincount(states, minlength=4)
    dist = counts / cfg.rounds
    avg_x = float(cfg.payoffs.sx[states].mean())
    avg_y = float(cfg.payoffs.sy[states].mean())
    trajectory = None
    if cfg.record_trajectory:
        onehot = np.zeros((cfg.rounds, 4))
        onehot[np.arange(cfg.rounds), states] = 1.0
        trajectory = np.cumsum(onehot, axis=0) / np.arange(1, cfg.rounds + 1)[:, None]
    return MatchResult(dist, avg_x, avg_y, decide(avg_x, avg_y, cfg.tie), trajectory)


def convergence_trace(x: Rule, y: Rule, cfg: MatchConfig, match_id: int = 0) -> np.ndarray:
    """Running empirical distribution after every round, shape ``(rounds, 4)``."""
    if not cfg.record_trajectory:
        raise ValueError("convergence_trace needs cfg.record_trajectory = True")
    return play_match(x, y, cfg, match_id).trajectory


TRAJECTORY_COLUMNS = ["round", "vCC", "vCD", "vDC", "vDD"]


def write_trajectory_csv(trajectory: np.ndarray, out: Optional[TextIO] = None):
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for r, row in enumerate(trajectory, start=1):
        writer.writerow([r, *(float(x) for x in row)])
    return None if out is not None else buf.getvalue()


# -- round robin --------------------------------------------------------------

@dataclass
class TournamentReport:
    names: list[str]
    scores: np.ndarray            # mean payoff of row player against each column
    outcomes: list[list[Optional[MatchOutcome]]]
    replicates: int
    config: MatchConfig

    @property
    def average_scores(self) -> np.ndarray:
        n = len(self.names)
        off = ~np.eye(n, dtype=bool)
        return np.array([self.scores[i][off[i]].mean() for i in range(n)])

    def record(self, name: str) -> dict:
        i = self.names.index(name)
        row = [o for j, o in enumerate(self.outcomes[i]) if j != i]
        return {
            "wins": sum(o is MatchOutcome.WIN_X for o in row),
            "ties": sum(o is MatchOutcome.TIE for o in row),
            "losses": sum(o is MatchOutcome.WIN_Y for o in row),
        }

    @property
    def ranking(self) -> list[str]:
        avg = self.average_scores
        order = sorted(range(len(self.names)), key=lambda i: (-avg[i], self.names[i]))
        return [self.names[i] for i in order]

    def as_dict(self) -> dict:
        avg = self.average_scores
        return {
            "schema_version": 1,
            "config": {"rounds": self.config.rounds, "seed": self.config.seed,
                       "replicates": self.replicates, "tie_tolerance": self.config.tie,
                       "payoffs": self.config.payoffs.as_dict()},
            "ranking": self.ranking,
            "strategies": {
                name: {"average_score": float(avg[i]), **self.record(name)}
                for i, name in enumerate(self.names)
            },
            "scores": self.scores.tolist(),
            "outcomes": [[o.value if o else None for o in row] for row in self.outcomes],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def _match_id(i: int, j: int, n: int, replicate: int) -> int:
    return (i * n + j) * 1_000_003 + replicate


def run_tournament(strategies: Sequence[tuple[str, Rule]], cfg: MatchConfig = MatchConfig(),
                   replicates: int = 10) -> TournamentReport:
    """Each unordered pair meets once per replicate; verdicts use the replicate mean."""
    if len(strategies) < 2:
        raise ValueError("a tournament needs at least two strategies")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    names = [n for n, _ in strategies]
    if len(set(names)) != len(names):
        raise ValueError("strategy names must be unique")
    n = len(strategies)
    scores = np.full((n, n), np.nan)
    outcomes: list[list[Optional[MatchOutcome]]] = [[None] * n for _ in range(n)]
    plain = MatchConfig(cfg.rounds, cfg.seed, cfg.payoffs, False, cfg.tie_tolerance)
    for i in range(n):
        for j in range(i + 1, n):
            xs, ys = [], []
            for k in range(replicates):
                res = play_match(strategies[i][1], strategies[j][1], plain, _match_id(i, j, n, k))
                xs.append(res.avg_x)
                ys.append(res.avg_y)
            ax, ay = float(np.mean(xs)), float(np.mean(ys))
            scores[i, j], scores[j, i] = ax, ay
            o = decide(ax, ay, cfg.tie)
            outcomes[i][j] = o
            outcomes[j][i] = {MatchOutcome.WIN_X: MatchOutcome.WIN_Y,
                              MatchOutcome.WIN_Y: MatchOutcome.WIN_X}.get(o, o)
    return TournamentReport(names, scores, outcomes, replicates, plain)
