"""Strategies, payoff matrices and closed-form strategy classification.

State order is always (CC, CD, DC, DD) from the strategy owner's point of
view: ``p[1]`` is the probability to cooperate after the owner cooperated
and the co-player defected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np


class StrategyError(ValueError):
    """Raised for malformed strategies, literals or payoff matrices."""


class ComponentOutOfRange(StrategyError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"component {index} = {value!r} is outside [0, 1]")


class OutOfRange(StrategyError):
    """A constructed strategy would leave the unit cube."""


class Outcome(IntEnum):
    """Joint move of one round; first letter is the focal player's move."""

    CC = 0
    CD = 1
    DC = 2
    DD = 3

    @classmethod
    def from_moves(cls, own: bool, other: bool) -> "Outcome":
        return cls((0 if own else 2) + (0 if other else 1))

    def swapped(self) -> "Outcome":
        """The same round seen from the co-player's side."""
        return _SWAP[self]


_SWAP = {Outcome.CC: Outcome.CC, Outcome.CD: Outcome.DC,
         Outcome.DC: Outcome.CD, Outcome.DD: Outcome.DD}


@dataclass(frozen=True)
class PayoffMatrix:
    T: float = 5.0
    R: float = 3.0
    P: float = 1.0
    S: float = 0.0

    def __post_init__(self):
        if not (self.T > self.R > self.P > self.S):
            raise StrategyError(f"payoffs must satisfy T > R > P > S, got {self}")
        if not (2 * self.R > self.T + self.S):
            raise StrategyError(f"payoffs must satisfy 2R > T + S, got {self}")

    @property
    def sx(self) -> np.ndarray:
        """Focal player's payoff per state (R, S, T, P)."""
        return np.array([self.R, self.S, self.T, self.P], dtype=float)

    @property
    def sy(self) -> np.ndarray:
        """Co-player's payoff per state (R, T, S, P)."""
        return np.array([self.R, self.T, self.S, self.P], dtype=float)

    def round_payoffs(self, own: bool, other: bool) -> tuple[float, float]:
        i = Outcome.from_moves(own, other)
        return float(self.sx[i]), float(self.sy[i])

    def as_dict(self) -> dict:
        return {"T": self.T, "R": self.R, "P": self.P, "S": self.S}


DEFAULT_PAYOFFS = PayoffMatrix()


@dataclass(frozen=True)
class MemoryOneStrategy:
    """First-move cooperation probability ``p0`` plus the reactive vector ``p``."""

    p0: float
    p: tuple[float, float, float, float]
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if len(p) != 4:
            raise StrategyError(f"memory-one vector needs 4 components, got {len(p)}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p0", float(self.p0))
        for i, x in enumerate((self.p0,) + p):
            if not (0.0 <= x <= 1.0) or math.isnan(x):
                raise ComponentOutOfRange(i, x)

    @property
    def label(self) -> str:
        return self.name or format_literal(self)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.p, dtype=float)

    def cooperation_probability(self, own: Sequence[bool], other: Sequence[bool]) -> float:
        if not own:
            return self.p0
        return self.p[Outcome.from_moves(own[-1], other[-1])]

    def with_first_move(self, p0: float) -> "MemoryOneStrategy":
        return MemoryOneStrategy(p0, self.p, self.name)

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class HistoryRule:
    """A strategy that looks further back than one round.

    ``decide(own, other)`` returns the probability of cooperating next given
    both full move histories (True = cooperate); it is only called with
    non-empty histories, the first move comes from ``p0``.
    """

    name: str
    p0: float
    decide: Callable[[Sequence[bool], Sequence[bool]], float] = field(compare=False)

    @property
    def label(self) -> str:
        return self.name

    def cooperation_probability(self, own: Sequence[bool], other: Sequence[bool]) -> float:
        if not own:
            return self.p0
        return self.decide(own, other)

    def __str__(self):
        return self.name


Rule = Union[MemoryOneStrategy, HistoryRule]


@dataclass(frozen=True)
class ExtortionParams:
    chi: float
    phi: float

    def __post_init__(self):
        if not self.chi >= 1:
            raise StrategyError(f"extortion factor must be >= 1, got {self.chi}")
        if not self.phi > 0:
            raise StrategyError(f"scale must be > 0, got {self.phi}")


@dataclass(frozen=True)
class ZDCoefficients:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.alpha == 0 and self.beta == 0 and self.gamma == 0:
            raise StrategyError("ZD coefficients must not all be zero")

    def vector(self, payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> np.ndarray:
        return self.alpha * payoffs.sx + self.beta * payoffs.sy + self.gamma


# -- construction and parsing -------------------------------------------------

def validate_strategy(raw: Sequence[float], name: Optional[str] = None) -> MemoryOneStrategy:
    """Build a strategy from ``(p0, p1, p2, p3, p4)``."""
    values = [float(x) for x in raw]
    if len(values) != 5:
        raise StrategyError(f"expected 5 components (p0, p1..p4), got {len(values)}")
    for i, x in enumerate(values):
        if not (0.0 <= x <= 1.0):
            raise ComponentOutOfRange(i, x)
    return MemoryOneStrategy(values[0], tuple(values[1:]), name)


def _parse_number(token: str) -> float:
    token = token.strip()
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        raise StrategyError(f"cannot parse number {token!r}") from None


def parse_literal(text: str, name: Optional[str] = None) -> MemoryOneStrategy:
    """Parse ``p0:p1,p2,p3,p4``; fractions such as ``11/13`` are allowed."""
    head, sep, tail = text.strip().partition(":")
    if not sep:
        raise StrategyError(f"strategy literal {text!r} must look like p0:p1,p2,p3,p4")
    parts = tail.split(",")
    if len(parts) != 4:
        raise StrategyError(f"strategy literal {text!r} needs four conditional probabilities")
    return validate_strategy([_parse_number(head)] + [_parse_number(t) for t in parts], name)


def format_literal(s: MemoryOneStrategy) -> str:
    return f"{s.p0:g}:" + ",".join(f"{x:g}" for x in s.p)


def strategy_from_mapping(doc: dict) -> Rule:
    """Config-file form: ``{name: ...}`` or ``{p0: ..., p: [...], name: ...}``."""
    if "p" not in doc:
        if "name" not in doc:
            raise StrategyError(f"strategy entry needs 'name' or 'p': {doc!r}")
        return lookup(doc["name"])
    p = [_parse_number(str(x)) for x in doc["p"]]
    p0 = _parse_number(str(doc.get("p0", 1)))
    return validate_strategy([p0] + p, doc.get("name"))


def parse_rule(text: str) -> Rule:
    """A catalog name or a ``p0:p1,p2,p3,p4`` literal."""
    text = text.strip()
    if ":" in text:
        return parse_literal(text)
    return lookup(text)


# -- classification -----------------------------------------------------------

def is_invincible(s: MemoryOneStrategy) -> bool:
    _, p2, p3, p4 = s.p
    return p4 == 0 and p2 + p3 <= 1


def is_semi_cooperative_invincible(s: MemoryOneStrategy) -> bool:
    return s.p0 == 1 and 0.5 < s.p[0] < 1 and is_invincible(s)


def press_dyson_vector(s: MemoryOneStrategy) -> np.ndarray:
    p1, p2, p3, p4 = s.p
    return np.array([p1 - 1, p2 - 1, p3, p4])


def zd_residual(s: MemoryOneStrategy, payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> float:
    """Distance of the Press-Dyson vector from span{S_X, S_Y, 1}.

    For the canonical (R, S, T, P) = (3, 0, 5, 1) game this is the hyperplane
    expression ``3 p1 - 2 p2 - 2 p3 + p4 - 1`` in absolute value.
    """
    if payoffs == DEFAULT_PAYOFFS:
        p1, p2, p3, p4 = s.p
        return abs(3 * p1 - 2 * p2 - 2 * p3 + p4 - 1)
    basis = np.column_stack([payoffs.sx, payoffs.sy, np.ones(4)])
    target = press_dyson_vector(s)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return float(np.linalg.norm(basis @ coef - target))


def is_zero_determinant(s: MemoryOneStrategy, payoffs: PayoffMatrix = DEFAULT_PAYOFFS,
                        tol: float = 1e-9) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return zd_residual(s, payoffs) <= tol


def make_extortionate(params: ExtortionParams,
                      payoffs: PayoffMatrix = DEFAULT_PAYOFFS,
                      name: Optional[str] = None) -> MemoryOneStrategy:
    """Strategy enforcing ``s_X - P = chi (s_Y - P)``; always defects first."""
    T, R, P, S = payoffs.T, payoffs.R, payoffs.P, payoffs.S
    chi, phi = params.chi, params.phi
    p = (
        1 - phi * (chi - 1) * (R - P) / (P - S),
        1 - phi * (1 + chi * (T - P) / (P - S)),
        phi * (chi + (T - P) / (P - S)),
        0.0,
    )
    bad = [(i + 1, x) for i, x in enumerate(p) if not (0.0 <= x <= 1.0)]
    if bad:
        raise OutOfRange(f"phi={phi} too large for chi={chi}: components {bad} leave [0, 1]")
    return MemoryOneStrategy(0.0, p, name)


def max_extortion_scale(chi: float, payoffs: PayoffMatrix = DEFAULT_PAYOFFS) -> float:
    """Largest phi for which ``make_extortionate`` stays inside the unit cube."""
    T, R, P, S = payoffs.T, payoffs.R, payoffs.P, payoffs.S
    limits = [1 / (1 + chi * (T - P) / (P - S)), 1 / (chi + (T - P) / (P - S))]
    if chi > 1:
        limits.append(1 / ((chi - 1) * (R - P) / (P - S)))
    return min(limits)


def fit_extortion(s: MemoryOneStrategy, payoffs: PayoffMatrix = DEFAULT_PAYOFFS,
                  tol: float = 1e-9) -> Optional[ExtortionParams]:
    """Recover (chi, phi) if ``s`` is extortionate, else None.

    Least squares over ``p~ = a (S_X - P) - b (S_Y - P)`` with ``phi = a``,
    ``chi = b / a``.
    """
    basis = np.column_stack([payoffs.sx - payoffs.P, -(payoffs.sy - payoffs.P)])
    target = press_dyson_vector(s)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = float(np.linalg.norm(basis @ coef - target))
    a, b = coef
    if residual >= tol or a <= 0:
        return None
    chi = b / a
    if chi < 1 - tol:
        return None
    return ExtortionParams(float(max(chi, 1.0)), float(a))


# -- catalog ------------------------------------------------------------------

def _tit_for_two_tats(own, other):
    return 0.0 if len(other) >= 2 and not other[-1] and not other[-2] else 1.0


def _hard_go_by_majority(own, other):
    cooperations = other.count(True) if isinstance(other, list) else sum(other)
    return 1.0 if cooperations > len(other) - cooperations else 0.0


EXTORT2 = make_extortionate(ExtortionParams(2.0, 1 / 18), name="Extort-2")
ENTRANT = MemoryOneStrategy(0.0, (1.0, 0.7, 0.2, 0.0), "Invincible")
CATALYST = MemoryOneStrategy(1.0, (0.9, 0.7, 0.2, 0.0), "Catalyst")

_CATALOG: list[tuple[str, Rule]] = [
    ("Cooperator", MemoryOneStrategy(1, (1, 1, 1, 1), "Cooperator")),
    ("Defector", MemoryOneStrategy(0, (0, 0, 0, 0), "Defector")),
    ("TFT", MemoryOneStrategy(1, (1, 0, 1, 0), "TFT")),
    ("Grudger", MemoryOneStrategy(1, (1, 0, 0, 0), "Grudger")),
    ("WSLS", MemoryOneStrategy(1, (1, 0, 0, 1), "WSLS")),
    ("Random", MemoryOneStrategy(0.5, (0.5, 0.5, 0.5, 0.5), "Random")),
    ("Repeat", MemoryOneStrategy(1, (1, 1, 0, 0), "Repeat")),
    ("GTFT", MemoryOneStrategy(1, (1, 1 / 3, 1, 1 / 3), "GTFT")),
    ("ZDGTFT-2", MemoryOneStrategy(1, (1, 1 / 8, 1, 1 / 4), "ZDGTFT-2")),
    ("Extort-2", EXTORT2),
    ("TF2T", HistoryRule("TF2T", 1.0, _tit_for_two_tats)),
    ("HardGoByMajority", HistoryRule("HardGoByMajority", 0.0, _hard_go_by_majority)),
    ("Invincible", ENTRANT),
    ("Catalyst", CATALYST),
]

_ALIASES = {
    "allc": "Cooperator", "alld": "Defector", "trigger": "Grudger",
    "titfortat": "TFT", "tit-for-tat": "TFT", "tit-for-two-tats": "TF2T",
    "titfor2tats": "TF2T", "hardgobymajority": "HardGoByMajority",
    "hard-go-by-majority": "HardGoByMajority", "win-stay-lose-shift": "WSLS",
    "zdgtft2": "ZDGTFT-2", "extort2": "Extort-2", "entrant": "Invincible",
    "semi-cooperative-invincible": "Catalyst",
}


def named_catalog() -> list[tuple[str, Rule]]:
    return list(_CATALOG)


def lookup(name: str) -> Rule:
    key = name.strip().lower()
    key = _ALIASES.get(key, key).lower()
    for entry, rule in _CATALOG:
        if entry.lower() == key:
            return rule
    raise StrategyError(f"unknown strategy name {name!r}")


def memory_one_catalog() -> list[MemoryOneStrategy]:
    return [r for _, r in _CATALOG if isinstance(r, MemoryOneStrategy)]


def corner_strategies(p0: float = 1.0) -> list[MemoryOneStrategy]:
    """The 16 deterministic reactive vectors."""
    out = []
    for k in range(16):
        bits = tuple(float((k >> (3 - i)) & 1) for i in range(4))
        out.append(MemoryOneStrategy(p0, bits))
    return out

