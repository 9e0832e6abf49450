"""Independent reference implementations used only by the tests.

Nothing here imports the package under test.  Closed forms are evaluated
in 50-digit mpmath; integer thresholds come from bisection on the raw
inequality; combinatorial quantities come from plain enumeration.
"""
from __future__ import annotations

from itertools import combinations, product

import mpmath as mp
import numpy as np
import scipy.linalg

mp.mp.dps = 50


def h2(q):
    q = mp.mpf(q)
    if q == 0 or q == 1:
        return mp.mpf(0)
    return -q * mp.log(q) - (1 - q) * mp.log(1 - q)


def rd_binary(alpha, d0):
    return h2(alpha) - h2(d0)


def rd_sparse_gaussian(alpha, sigma1sq, D):
    alpha = mp.mpf(alpha)
    return h2(alpha) + alpha / 2 * mp.log(alpha * mp.mpf(sigma1sq) / mp.mpf(D))


def fano_generic(info, card):
    return 1 - (mp.mpf(info) + mp.log(2)) / mp.log(mp.mpf(card) - 1)


def fano_discrete(n, q, rate, info, d0):
    n, d0 = mp.mpf(n), mp.mpf(d0)
    num = n * mp.mpf(rate) - info - 1 - mp.log(n * d0)
    den = n * mp.log(q) - n * h2(d0) - n * d0 * mp.log(q - 1) - mp.log(n * d0)
    return num / den, num, den


def fano_continuous(rate, K, info_per_n, eps):
    return (mp.mpf(rate) - K - info_per_n) / (mp.mpf(rate) + eps)


def mi_output_worst(m, k, beta, snr):
    return mp.mpf(m) / 2 * mp.log(1 + mp.mpf(k) * beta ** 2 * snr / m)


def bisect_least_int(pred, lo=0, hi=1):
    """Least integer m > lo with pred(m) True, for monotone pred."""
    while not pred(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def necessary_m_output(n, k, beta, snr):
    L = mp.log(mp.binomial(n, k) - 1)
    a = mp.mpf(k) * beta ** 2 * snr
    return bisect_least_int(lambda m: m * mp.log(1 + a / m) + mp.log(2) >= L)


def bayes_output_m(n, rate, s):
    return bisect_least_int(lambda m: mp.mpf(m) / 2 * mp.log(1 + mp.mpf(n) * s / m) >= n * rate)


def f_of_q(n, m, q):
    q = mp.mpf(q)
    return mp.sqrt(mp.mpf(n) / m) * (mp.sqrt(q) + mp.sqrt(2 * h2(q)))


def gaussian_tail(x):
    return mp.erfc(mp.mpf(x) / mp.sqrt(2)) / 2


def brute_sigma_min(G, k):
    """Minimum eigenvalue over every support of size 1..2k, via scipy's LAPACK driver."""
    n = G.shape[1]
    best = np.inf
    for s in range(1, min(2 * k, n) + 1):
        for S in combinations(range(n), s):
            A = G[:, S]
            best = min(best, scipy.linalg.eigh(A.T @ A, eigvals_only=True, driver="ev")[0])
    return best


def brute_single_column_ls(y, G):
    """Residual of projecting y onto each single column; returns (argmin, residuals)."""
    res = []
    for j in range(G.shape[1]):
        g = G[:, j]
        c = g @ y / (g @ g)
        res.append(float(np.sum((y - c * g) ** 2)))
    return int(np.argmin(res)), res


def brute_ls_all_supports(y, G, k, exactly_k=True):
    """Minimum LS residual over every support (size k, or 0..k)."""
    n = G.shape[1]
    sizes = [k] if exactly_k else range(0, k + 1)
    best, arg = np.inf, None
    for s in sizes:
        for S in combinations(range(n), s):
            if s == 0:
                r = float(y @ y)
            else:
                coef = scipy.linalg.lstsq(G[:, S], y)[0]
                r = float(np.sum((y - G[:, S] @ coef) ** 2))
            if r < best - 1e-12:
                best, arg = r, S
    return arg, best


def linear_scan_codebook(y, G, points):
    d = [float(np.sum((y - G @ p) ** 2)) for p in points]
    return int(np.argmin(d))


def greedy_set_cover(n, alpha, d0, target):
    """Greedy cover of a probability-weighted Hamming cube.

    Each step picks the centre whose radius-floor(n d0) ball adds the most
    uncovered probability mass, stopping once ``target`` mass is covered.
    Pure Python sets, deliberately naive.
    """
    radius = int(np.floor(n * d0 + 1e-9))
    words = list(product((0, 1), repeat=n))
    prob = {w: alpha ** sum(w) * (1 - alpha) ** (n - sum(w)) for w in words}
    balls = {c: {w for w in words if sum(a != b for a, b in zip(c, w)) <= radius} for c in words}
    covered, mass, chosen = set(), 0.0, []
    while mass < target - 1e-12:
        c = max(words, key=lambda c: (sum(prob[w] for w in balls[c] - covered), [-v for v in c]))
        gain = balls[c] - covered
        chosen.append(c)
        covered |= gain
        mass += sum(prob[w] for w in gain)
    return chosen, mass


def constrained_ls_by_orthant(A, y, half_beta):
    """min ||y - A x||^2 subject to |x_j| >= half_beta, one bounded LS per sign pattern."""
    from scipy.optimize import lsq_linear
    s = A.shape[1]
    best = np.inf
    for signs in product((-1.0, 1.0), repeat=s):
        lb = np.where(np.array(signs) > 0, half_beta, -np.inf)
        ub = np.where(np.array(signs) > 0, np.inf, -half_beta)
        res = lsq_linear(A, y, bounds=(lb, ub), tol=1e-12, lsq_solver="exact")
        best = min(best, float(np.sum((y - A @ res.x) ** 2)))
    return best
