"""Moran-process evolution on complete and complete-bipartite interaction graphs.

Each step one agent reproduces with probability proportional to
``exp(intensity * fitness)`` and its offspring replaces a uniformly chosen
agent of the same party (or, in ``eliminate_worst`` mode, the least fit agent
of that party).  Fitness is the mean payoff against graph neighbours: every
other agent in a single population, every agent of the other party in the
two-party variant.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from .markov import EPS_D, determinants, stationary_analytic
from .strategies import DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, Rule, named_catalog
from .tournament import MatchConfig, play_match

SINGLE = None
PARTIES = ("A", "B")
MODES = ("moran", "eliminate_worst")


@dataclass(frozen=True)
class Population:
    agents: tuple[tuple[Rule, Optional[str]], ...]
    bipartite: bool = False

    def __post_init__(self):
        if len(self.agents) < 2:
            raise ValueError("population needs at least two agents")
        parties = {party for _, party in self.agents}
        if self.bipartite:
            if parties != set(PARTIES):
                raise ValueError("a two-party population needs agents in both parties A and B")
        elif parties != {SINGLE}:
            raise ValueError("single population agents must not carry a party tag")

    @classmethod
    def well_mixed(cls, groups: Sequence[tuple[Rule, int]]) -> "Population":
        return cls(tuple((rule, SINGLE) for rule, n in groups for _ in range(n)))

    @classmethod
    def two_party(cls, a: Sequence[tuple[Rule, int]], b: Sequence[tuple[Rule, int]]) -> "Population":
        agents = [(rule, "A") for rule, n in a for _ in range(n)]
        agents += [(rule, "B") for rule, n in b for _ in range(n)]
        return cls(tuple(agents), bipartite=True)

    @property
    def size(self) -> int:
        return len(self.agents)

    def counts(self) -> Counter:
        return Counter((party, rule.label) for rule, party in self.agents)

    def party_size(self, party: Optional[str]) -> int:
        return sum(1 for _, p in self.agents if p == party)


@dataclass(frozen=True)
class EvolutionConfig:
    steps: int = 10_000
    rounds: int = 1000
    seed: int = 0
    intensity: float = 1.0
    mutation: float = 0.0
    mode: str = "moran"
    #: replicates and seed behind finite-round payoff estimates
    replicates: int = 10
    fitness_seed: int = 0
    payoffs: PayoffMatrix = DEFAULT_PAYOFFS

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.intensity < 0:
            raise ValueError("selection intensity must be >= 0")
        if not 0 <= self.mutation < 1:
            raise ValueError("mutation rate must be in [0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


class PayoffCache:
    """Pairwise payoffs memoised by rule identity; rules are immutable."""

    def __init__(self):
        self._values: dict = {}

    def get(self, x: Rule, y: Rule, cfg: EvolutionConfig) -> float:
        key = (x, y, cfg.rounds, cfg.replicates, cfg.fitness_seed, cfg.payoffs)
        value = self._values.get(key)
        if value is None:
            value = _pair_payoff(x, y, cfg)
            self._values[key] = value
        return value

    def __len__(self):
        return len(self._values)


def simulated_payoff(x: Rule, y: Rule, cfg: EvolutionConfig) -> float:
    match = MatchConfig(cfg.rounds, cfg.fitness_seed, cfg.payoffs)
    return float(np.mean([play_match(x, y, match, k).avg_x for k in range(cfg.replicates)]))


def _pair_payoff(x: Rule, y: Rule, cfg: EvolutionConfig) -> float:
    if isinstance(x, MemoryOneStrategy) and isinstance(y, MemoryOneStrategy):
        if abs(determinants(x, y).D) > EPS_D:
            return stationary_analytic(x, y, cfg.payoffs).sx
    return simulated_payoff(x, y, cfg)


def fitness_oracle(x: Rule, y: Rule, cfg: EvolutionConfig = EvolutionConfig(),
                   cache: Optional[PayoffCache] = None) -> float:
    """Payoff of ``x`` against ``y``: long-run score when defined, else simulated."""
    if cache is not None:
        return cache.get(x, y, cfg)
    return _pair_payoff(x, y, cfg)


# -- compact state: one count per (party, strategy type) -------------------------------

@dataclass
class _State:
    types: list
    parties: tuple
    counts: np.ndarray   # (n_parties, n_types)
    bipartite: bool

    @classmethod
    def from_population(cls, pop: Population) -> "_State":
        types: list = []
        for rule, _ in pop.agents:
            if rule not in types:
                types.append(rule)
        parties = PARTIES if pop.bipartite else (SINGLE,)
        counts = np.zeros((len(parties), len(types)), dtype=np.int64)
        for rule, party in pop.agents:
            counts[parties.index(party), types.index(rule)] += 1
        return cls(types, parties, counts, pop.bipartite)

    def to_population(self) -> Population:
        agents = [(rule, party) for k, party in enumerate(self.parties)
                  for t, rule in enumerate(self.types) for _ in range(self.counts[k, t])]
        return Population(tuple(agents), self.bipartite)

    def add_type(self, rule) -> int:
        if rule in self.types:
            return self.types.index(rule)
        self.types.append(rule)
        self.counts = np.hstack([self.counts, np.zeros((len(self.parties), 1), dtype=np.int64)])
        return len(self.types) - 1


def _payoff_table(types, cfg, cache) -> np.ndarray:
    return np.array([[cache.get(x, y, cfg) for y in types] for x in types])


def _fitness(state: _State, table: np.ndarray) -> np.ndarray:
    """Fitness of each (party, type) cell."""
    c = state.counts.astype(float)
    if not state.bipartite:
        n = c[0].sum()
        return ((table @ c[0] - np.diag(table)) / (n - 1))[None, :]
    a, b = c
    return np.stack([table @ b / b.sum(), table @ a / a.sum()])


def _step(state: _State, cfg: EvolutionConfig, rng: np.random.Generator,
          cache: PayoffCache, pool: Sequence[Rule]) -> tuple[int, int, int]:
    table = _payoff_table(state.types, cfg, cache)
    fit = _fitness(state, table)
    alive = state.counts > 0
    logw = np.where(alive, cfg.intensity * fit, -np.inf)
    w = state.counts * np.exp(logw - logw[alive].max())
    flat = rng.choice(w.size, p=(w / w.sum()).ravel())
    party, parent = divmod(int(flat), w.shape[1])
    child = parent
    if cfg.mutation and rng.random() < cfg.mutation:
        child = state.add_type(pool[rng.integers(len(pool))])
    row = state.counts[party]
    if cfg.mode == "moran":
        dead = int(rng.choice(row.size, p=row / row.sum()))
    else:
        # a freshly added mutant type has no residents yet, so padding is harmless
        f = np.pad(fit[party], (0, row.size - fit.shape[1]), constant_values=np.inf)
        f = np.where(row > 0, f, np.inf)
        worst = np.flatnonzero(f == f.min())
        dead = int(rng.choice(worst, p=row[worst] / row[worst].sum()))
    state.counts[party, child] += 1
    state.counts[party, dead] -= 1
    return party, child, dead


def _mutation_pool() -> list:
    return [rule for _, rule in named_catalog()]


def moran_step(pop: Population, cfg: EvolutionConfig = EvolutionConfig(),
               rng: Optional[np.random.Generator] = None,
               cache: Optional[PayoffCache] = None) -> Population:
    """One birth and one death; population and party sizes are unchanged."""
    state = _State.from_population(pop)
    _step(state, cfg, rng if rng is not None else np.random.default_rng(cfg.seed),
          cache if cache is not None else PayoffCache(), _mutation_pool())
    return state.to_population()


# -- traces ------------------------------------------------------------------------------

@dataclass
class EvolutionTrace:
    labels: list[str]
    counts: np.ndarray                      # (recorded steps, n labels)
    events: list[tuple[int, str, str]] = field(default_factory=list)
    fixed: Optional[dict] = None            # party -> surviving label once monomorphic
    mean_fitness: Optional[np.ndarray] = None  # (recorded steps, n parties)

    @property
    def steps(self) -> int:
        return len(self.counts) - 1

    def final(self) -> dict:
        return {label: int(n) for label, n in zip(self.labels, self.counts[-1]) if n}

    def winner(self, party: Optional[str] = None) -> Optional[str]:
        if self.fixed is None:
            return None
        return self.fixed.get(party if party is not None else "all")


def _labels(state: _State) -> list[str]:
    out = []
    for party in state.parties:
        for rule in state.types:
            out.append(rule.label if party is SINGLE else f"{party}:{rule.label}")
    return out


def _monomorphic(state: _State) -> Optional[dict]:
    winners = {}
    for k, party in enumerate(state.parties):
        present = np.flatnonzero(state.counts[k])
        if present.size != 1:
            return None
        winners["all" if party is SINGLE else party] = state.types[present[0]].label
    return winners


def run_evolution(pop: Population, cfg: EvolutionConfig = EvolutionConfig(),
                  cache: Optional[PayoffCache] = None) -> EvolutionTrace:
    """Iterate until every party is monomorphic or the step budget runs out.

    With mutation switched on there is no absorbing state and the full
    ``cfg.steps`` are always run.
    """
    cache = cache if cache is not None else PayoffCache()
    rng = np.random.default_rng(cfg.seed)
    state = _State.from_population(pop)
    pool = _mutation_pool()
    rows = [state.counts.ravel().copy()]
    fitness_rows = []
    events: list[tuple[int, str, str]] = []

    def mean_fitness():
        fit = _fitness(state, _payoff_table(state.types, cfg, cache))
        c = state.counts
        return [float((fit[k] * c[k]).sum() / c[k].sum()) for k in range(len(state.parties))]

    fitness_rows.append(mean_fitness())
    fixed = None if cfg.mutation else _monomorphic(state)
    step = 0
    while fixed is None and step < cfg.steps:
        step += 1
        n_types = len(state.types)
        before = state.counts.copy()
        _step(state, cfg, rng, cache, pool)
        if len(state.types) > n_types:
            rows = [np.hstack([r.reshape(len(state.parties), -1),
                               np.zeros((len(state.parties), len(state.types) - n_types),
                                        dtype=np.int64)]).ravel() for r in rows]
            before = np.hstack([before, np.zeros((len(state.parties), len(state.types) - n_types),
                                                 dtype=np.int64)])
        gone = np.argwhere((before > 0) & (state.counts == 0))
        for k, t in gone:
            party = state.parties[k]
            label = state.types[t].label if party is SINGLE else f"{party}:{state.types[t].label}"
            events.append((step, "extinction", label))
        rows.append(state.counts.ravel().copy())
        fitness_rows.append(mean_fitness())
        if not cfg.mutation:
            fixed = _monomorphic(state)
    if fixed is not None:
        for key, label in fixed.items():
            events.append((step, "fixation", label if key == "all" else f"{key}:{label}"))
    return EvolutionTrace(_labels(state), np.array(rows), events, fixed, np.array(fitness_rows))


TRACE_COLUMNS = ["step", "strategy", "count"]


def write_trace_csv(trace: EvolutionTrace, out: Optional[TextIO] = None, run: Optional[int] = None):
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = TRACE_COLUMNS if run is None else ["run"] + TRACE_COLUMNS
    writer.writerow(header)
    # combinations that never held an agent (e.g. a B-only type under party A) are dropped
    used = np.flatnonzero(trace.counts.any(axis=0))
    for step, row in enumerate(trace.counts):
        for j in used:
            writer.writerow(([run] if run is not None else []) + [step, trace.labels[j], int(row[j])])
    return None if out is not None else buf.getvalue()


def fixation_counts(pop: Population, cfg: EvolutionConfig, runs: int,
                    cache: Optional[PayoffCache] = None) -> Counter:
    """How often each strategy takes over across ``runs`` seeds ``cfg.seed + k``."""
    cache = cache if cache is not None else PayoffCache()
    tally: Counter = Counter()
    for k in range(runs):
        run_cfg = EvolutionConfig(**{**cfg.__dict__, "seed": cfg.seed + k})
        trace = run_evolution(pop, run_cfg, cache)
        tally[trace.winner() if trace.fixed else None] += 1
    return tally


# -- catalyst diagnostics ----------------------------------------------------------------

@dataclass(frozen=True)
class CatalystRelations:
    vs_defector: float
    vs_cooperative: float
    self_play: float
    punishment: float

    @property
    def defector_near_punishment(self) -> bool:
        return abs(self.vs_defector - self.punishment) <= 0.1

    @property
    def cooperative_above_punishment(self) -> bool:
        return self.vs_cooperative >= self.punishment

    @property
    def self_play_between(self) -> bool:
        lo, hi = sorted((self.vs_defector, self.vs_cooperative))
        return lo <= self.self_play <= hi

    @property
    def holds(self) -> bool:
        return (self.defector_near_punishment and self.cooperative_above_punishment
                and self.self_play_between)


def catalyst_relations(catalyst: Rule, defector: Rule, cooperative: Rule,
                       rounds: int = 1000, replicates: int = 10, seed: int = 0,
                       payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> CatalystRelations:
    """Finite-round payoffs of a catalyst against a defector, a cooperator and itself."""
    cfg = EvolutionConfig(rounds=rounds, replicates=replicates, fitness_seed=seed,
                          payoffs=payoffs)
    return CatalystRelations(
        simulated_payoff(catalyst, defector, cfg),
        simulated_payoff(catalyst, cooperative, cfg),
        simulated_payoff(catalyst, catalyst, cfg),
        payoffs.P,
    )
