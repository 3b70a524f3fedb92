"""Independent reference computations used by the tests.

Nothing here imports the package's solvers: the stationary law comes from
Gaussian elimination over exact rationals, and the chain is built straight
from its definition.
"""

from fractions import Fraction
from typing import Sequence


def transition(p: Sequence, q: Sequence) -> list[list[Fraction]]:
    """Row-stochastic chain over (CC, CD, DC, DD) seen from the first player."""
    p = [Fraction(x) for x in p]
    # co-player sees CD as DC and vice versa
    q = [Fraction(x) for x in q]
    qv = [q[0], q[2], q[1], q[3]]
    rows = []
    for i in range(4):
        a, b = p[i], qv[i]
        rows.append([a * b, a * (1 - b), (1 - a) * b, (1 - a) * (1 - b)])
    return rows


def solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def stationary(p: Sequence, q: Sequence) -> list[Fraction]:
    """v M = v with components summing to one; assumes a unique solution."""
    M = transition(p, q)
    # (M^T - I) v = 0 with the last equation replaced by normalisation
    A = [[M[j][i] - (1 if i == j else 0) for j in range(4)] for i in range(4)]
    A[3] = [Fraction(1)] * 4
    return solve(A, [Fraction(0)] * 3 + [Fraction(1)])


def det(rows) -> Fraction:
    rows = [[Fraction(x) for x in r] for r in rows]
    n = len(rows)
    sign, out = 1, Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if rows[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
            sign = -sign
        out *= rows[c][c]
        for r in range(c + 1, n):
            f = rows[r][c] / rows[c][c]
            rows[r] = [x - f * y for x, y in zip(rows[r], rows[c])]
    return sign * out

