import csv
import io
import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from invincible.markov import (
    EPS_D, NonConvergent, STATIONARY_COLUMNS, akin_residual, build_matrix, cesaro_average,
    determinant_arrays, determinants, exact_D, initial_distribution, press_dyson_dot,
    solve_stationary_arrays, stationary_analytic, stationary_cesaro, write_stationary_csv)
from invincible.strategies import DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, lookup

import oracles

unit = st.floats(0.0, 1.0, allow_nan=False)
interior = st.floats(0.01, 0.99, allow_nan=False)
vec4 = st.tuples(unit, unit, unit, unit)
ivec4 = st.tuples(interior, interior, interior, interior)

Q = MemoryOneStrategy(0.5, (0.4, 0.5, 0.6, 0.3))
P1 = MemoryOneStrategy(0.5, (0.5, 0.2, 0.7, 0.0))
P2 = MemoryOneStrategy(0.5, (0.5, 0.7, 0.2, 0.0))


def m1(p, p0=1.0):
    return MemoryOneStrategy(p0, p)


# -- frozen values from the rational oracle ------------------------------------------------

# DERIVED: oracles.stationary over Fractions for the two tabulated pairs
EXACT_P1 = [Fraction(156, 1103), Fraction(165, 1103), Fraction(300, 1103), Fraction(482, 1103)]
EXACT_P2 = [Fraction(57, 716), Fraction(55, 716), Fraction(225, 716), Fraction(379, 716)]


@pytest.mark.parametrize("p, exact", [(P1, EXACT_P1), (P2, EXACT_P2)])
def test_tabulated_pairs_match_rational_oracle(p, exact):
    res = stationary_analytic(p, Q)
    assert res.method == "analytic" and not res.degenerate
    assert res.v == pytest.approx([float(x) for x in exact], abs=1e-14)


def test_oracle_reproduces_frozen_fractions():
    as_frac = lambda s: [Fraction(str(x)) for x in s.p]
    assert oracles.stationary(as_frac(P1), as_frac(Q)) == EXACT_P1
    assert oracles.stationary(as_frac(P2), as_frac(Q)) == EXACT_P2


def test_tabulated_rounding():
    # published three-decimal rows: (0.142,0.150,0.272,0.437) and (0.080,0.077,0.314,0.529);
    # the first component of the first row rounds to 0.141, the rest agree
    v1 = np.round(stationary_analytic(P1, Q).v, 3)
    v2 = np.round(stationary_analytic(P2, Q).v, 3)
    assert v1.tolist() == [0.141, 0.150, 0.272, 0.437]
    assert v2.tolist() == [0.080, 0.077, 0.314, 0.529]


def test_determinant_ratios():
    res = stationary_analytic(P1, Q)
    d = res.dets
    assert res.v[1] == pytest.approx(d.D2 / d.D, abs=1e-14)
    assert res.v[2] == pytest.approx(d.D3 / d.D, abs=1e-14)


def test_exact_det_agrees_with_independent_elimination():
    p = [Fraction(1, 2), Fraction(1, 5), Fraction(7, 10), 0]
    q = [Fraction(2, 5), Fraction(1, 2), Fraction(3, 5), Fraction(3, 10)]
    from invincible.markov import exact_system
    assert exact_D(p, q) == oracles.det(exact_system(p, q))
    assert float(exact_D(p, q)) == pytest.approx(determinants(m1(p), m1(q)).D, abs=1e-14)


# -- D <= 0 --------------------------------------------------------------------------------

def test_corner_determinants_nonpositive_exactly():
    corners = list(itertools.product((0, 1), repeat=4))
    values = [exact_D(p, q) for p in corners for q in corners]
    assert len(values) == 256
    assert all(isinstance(v, Fraction) and v <= 0 for v in values)


@given(vec4, vec4)
def test_D_nonpositive(p, q):
    D, _, _ = determinant_arrays(p, q)
    assert D <= 1e-12


@given(vec4, vec4, st.integers(0, 7), unit)
def test_D_affine_in_each_coordinate(p, q, k, t):
    def with_coord(value):
        pp, qq = list(p), list(q)
        (pp if k < 4 else qq)[k % 4] = value
        return determinant_arrays(pp, qq)[0]
    lhs = with_coord(t)
    rhs = (1 - t) * with_coord(0.0) + t * with_coord(1.0)
    assert lhs == pytest.approx(rhs, abs=1e-12)


# -- structural properties of the stationary vector ------------------------------------------

@given(ivec4, ivec4)
def test_normalised_and_nonnegative(p, q):
    res = stationary_analytic(m1(p), m1(q))
    assert res.v.sum() == pytest.approx(1, abs=1e-12)
    assert (res.v >= 0).all()


@given(ivec4, ivec4)
def test_fixed_point(p, q):
    res = stationary_analytic(m1(p), m1(q))
    M = build_matrix(m1(p), m1(q))
    assert res.v @ M == pytest.approx(res.v, abs=1e-10)


@given(ivec4, ivec4)
def test_akin_orthogonality(p, q):
    res = stationary_analytic(m1(p), m1(q))
    assert akin_residual(m1(p), res.v) <= 1e-8


@given(ivec4, ivec4)
def test_press_dyson_score_ratio(p, q):
    x, y = m1(p), m1(q)
    norm = press_dyson_dot(x, y, np.ones(4))
    assume(abs(norm) > 1e-6)
    res = stationary_analytic(x, y)
    assert press_dyson_dot(x, y, DEFAULT_PAYOFFS.sx) / norm == pytest.approx(res.sx, abs=1e-8)
    assert press_dyson_dot(x, y, DEFAULT_PAYOFFS.sy) / norm == pytest.approx(res.sy, abs=1e-8)


@given(ivec4, ivec4)
def test_swap_symmetry(p, q):
    a = stationary_analytic(m1(p), m1(q)).v
    b = stationary_analytic(m1(q), m1(p)).v
    assert a == pytest.approx(b[[0, 2, 1, 3]], abs=1e-10)


@given(ivec4, ivec4)
def test_score_gap_identity(p, q):
    res = stationary_analytic(m1(p), m1(q))
    T, S = DEFAULT_PAYOFFS.T, DEFAULT_PAYOFFS.S
    assert res.sx - res.sy == pytest.approx((T - S) * (res.v[2] - res.v[1]), abs=1e-10)


@settings(max_examples=30)
@given(ivec4, ivec4)
def test_cesaro_agrees_with_analytic(p, q):
    a = stationary_analytic(m1(p), m1(q))
    c = stationary_cesaro(m1(p), m1(q))
    assert np.max(np.abs(a.v - c.v)) <= 1e-6


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    P, Qs = rng.random((50, 4)), rng.random((50, 4))
    v, D, degenerate = solve_stationary_arrays(P, Qs)
    assert not degenerate.any()
    for i in range(50):
        assert v[i] == pytest.approx(stationary_analytic(m1(P[i]), m1(Qs[i])).v, abs=1e-12)


def test_general_payoffs():
    pay = PayoffMatrix(4, 3, 1, 0)
    res = stationary_analytic(P1, Q, pay)
    assert res.sx == pytest.approx(res.v @ np.array([3, 0, 4, 1]))


# -- degenerate chains --------------------------------------------------------------------

def test_alld_pair():
    d = lookup("Defector")
    res = stationary_analytic(d, d)
    assert res.v.tolist() == [0, 0, 0, 1]
    assert res.winner == "tie"


def test_tft_cycle_from_cd():
    # opening CD alternates CD, DC forever
    res = stationary_analytic(lookup("TFT"), lookup("TFT").with_first_move(0))
    assert res.degenerate and res.method == "cesaro"
    assert res.v == pytest.approx([0, 0.5, 0.5, 0], abs=1e-12)


def test_repeat_pair_keeps_opening():
    r = lookup("Repeat")
    for p0, q0 in [(1, 1), (1, 0), (0, 1), (0, 0)]:
        res = stationary_analytic(r.with_first_move(p0), r.with_first_move(q0))
        assert res.v == pytest.approx(initial_distribution(r.with_first_move(p0),
                                                           r.with_first_move(q0)))


def test_tft_vs_repeat_locks_at_cc():
    res = stationary_analytic(lookup("TFT"), lookup("Repeat"))
    assert res.degenerate and res.v == pytest.approx([1, 0, 0, 0])


def test_mixed_initial_distribution():
    res = stationary_cesaro(lookup("Repeat"), lookup("Repeat"), initial=[0.25] * 4)
    assert res.v == pytest.approx([0.25] * 4)


def test_bad_initial_rejected():
    with pytest.raises(ValueError):
        stationary_cesaro(P1, Q, initial=[1, 1, 0, 0])


def test_cesaro_reports_non_convergence():
    M = build_matrix(lookup("TFT"), lookup("TFT"))
    # an odd number of rounds through a 2-cycle never settles below 1e-20
    with pytest.raises(NonConvergent):
        cesaro_average(M, np.array([0, 1.0, 0, 0]), max_rounds=3, tol=1e-20, first_checkpoint=3)


def test_eps_threshold():
    assert EPS_D == 1e-10


# -- CSV ----------------------------------------------------------------------------------

def test_stationary_csv():
    text = write_stationary_csv([(P1, Q), (P2, Q)])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == STATIONARY_COLUMNS
    assert float(rows[0]["v1"]) == pytest.approx(156 / 1103)
    assert rows[1]["method"] == "analytic"
