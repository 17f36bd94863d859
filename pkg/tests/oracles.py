"""Slow, loop-based reference implementations used only by the tests."""

import itertools
import math
from fractions import Fraction


def brute_decision(x, transforms, stat, level):
    """Randomization test by explicit sorting; ``transforms`` are plain callables."""
    values = [stat(g(x)) for g in transforms]
    t_obs = stat(x)
    M = len(values)
    ma = M * level
    if abs(ma - round(ma)) <= 1e-9:
        ma = float(round(ma))
    k = M - math.floor(ma)
    ordered = sorted(values)
    tk = ordered[k - 1]
    m_plus = sum(v > tk for v in values)
    m_zero = sum(v == tk for v in values)
    a = (ma - m_plus) / m_zero
    if t_obs > tk:
        phi = 1.0
    elif t_obs == tk:
        phi = a
    else:
        phi = 0.0
    p = sum(v >= t_obs for v in values) / M
    return {"phi": phi, "p_value": p, "k": k, "M_plus": m_plus, "M_zero": m_zero, "a_x": a, "T_obs": t_obs}


def sign_flips(n):
    def make(s):
        return lambda x: tuple(si * xi for si, xi in zip(s, x))

    return [make(s) for s in itertools.product([1, -1], repeat=n)]


def py_mean(x):
    return sum(x) / len(x)


def matrix_power_order(A, tol=1e-9, limit=1000):
    """Smallest r with A^r == I (entrywise within ``tol``), by repeated multiplication."""
    n = len(A)
    P = [row[:] for row in A]
    for r in range(1, limit + 1):
        if all(abs(P[i][j] - (1.0 if i == j else 0.0)) < tol for i in range(n) for j in range(n)):
            return r
        P = [[sum(P[i][k] * A[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return None


def exact_block_matrix():
    return [[Fraction(2, 3), Fraction(-1, 3), Fraction(2, 3)],
            [Fraction(2, 3), Fraction(2, 3), Fraction(-1, 3)],
            [Fraction(-1, 3), Fraction(2, 3), Fraction(2, 3)]]


def realizable_count_diffs(n, K):
    """Distinct nonzero c(x) - c(y) for x, y in {0..K-1}^n, by listing every pair of samples."""
    seen = set()
    samples = list(itertools.product(range(K), repeat=n))
    for x in samples:
        cx = [x.count(i) for i in range(K)]
        for y in samples:
            d = tuple(cx[i] - y.count(i) for i in range(K))
            if any(d):
                seen.add(d)
    return seen


def uniform_moment(a, b, t):
    return (b ** (t + 1) - a ** (t + 1)) / ((t + 1) * (b - a))
