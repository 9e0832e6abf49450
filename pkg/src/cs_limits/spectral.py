"""Sparse minimum eigenvalues and concentration certificates for Gaussian matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice
from typing import Optional

import numpy as np

from .bounds import binary_entropy
from .exceptions import BudgetExceededError, OutOfRegimeError
from .rng import make_rng

EIG_ATOL = 1e-12
DEFAULT_BUDGET = 10 ** 7


def _combo_chunks(n: int, s: int, chunk: int):
    it = combinations(range(n), s)
    while True:
        block = list(islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _min_eig_of_subsets(gram: np.ndarray, idx: np.ndarray) -> np.ndarray:
    sub = gram[idx[:, :, None], idx[:, None, :]]
    return np.linalg.eigvalsh(sub)[:, 0]


def sigma_g_min(G, k: int, budget: int = DEFAULT_BUDGET, full_output: bool = False,
                chunk: int = 20_000):
    """Smallest eigenvalue of ``G_S^T G_S`` over all supports with ``|S| <= 2k``.

    Eigenvalues of a principal submatrix interlace those of any larger
    one, so only supports of size exactly ``min(2k, n)`` need to be
    scanned.  Values within 1e-12 of zero are reported as zero.

    Parameters
    ----------
    G : array_like of shape (m, n)
    k : int
        Sparsity; subsets of size up to ``2k`` are examined.
    budget : int
        Maximum number of subsets to enumerate.
    full_output : bool
        Also return the minimizing support.

    Raises
    ------
    BudgetExceededError
        The scan exceeds ``budget``; use :func:`sigma_g_min_sampled`.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[1]
    if k < 1:
        raise ValueError("k must be positive")
    s = min(2 * k, n)
    total = math.comb(n, s)
    if total > budget:
        raise BudgetExceededError(
            f"C({n},{s}) = {total} subsets exceeds budget {budget}; "
            "sigma_g_min_sampled gives an upper bound instead")
    gram = G.T @ G
    best, best_idx = math.inf, None
    for idx in _combo_chunks(n, s, chunk):
        vals = _min_eig_of_subsets(gram, idx)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_idx = float(vals[j]), tuple(int(i) for i in idx[j])
    best = 0.0 if best < EIG_ATOL else best
    return (best, best_idx) if full_output else best


def sigma_g_min_batch(Gs: np.ndarray, k: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """:func:`sigma_g_min` for a stack of matrices of shape (B, m, n)."""
    Gs = np.asarray(Gs, dtype=float)
    B, _, n = Gs.shape
    s = min(2 * k, n)
    if math.comb(n, s) > budget:
        raise BudgetExceededError(f"C({n},{s}) subsets exceeds budget {budget}")
    grams = np.einsum("bmi,bmj->bij", Gs, Gs)
    out = np.full(B, np.inf)
    for idx in _combo_chunks(n, s, max(1, 200_000 // max(B, 1))):
        sub = grams[:, idx[:, :, None], idx[:, None, :]]
        if s == 1:
            vals = sub[..., 0, 0]
        elif s == 2:
            a, b, c = sub[..., 0, 0], sub[..., 1, 1], sub[..., 0, 1]
            vals = 0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + c ** 2)
        else:
            vals = np.linalg.eigvalsh(sub)[..., 0]
        np.minimum(out, vals.min(axis=1), out=out)
    out[out < EIG_ATOL] = 0.0
    return out


def sigma_g_min_sampled(G, k: int, n_samples: int = 10_000, rng_seed=0) -> float:
    """Upper bound on :func:`sigma_g_min` from randomly sampled supports.

    The minimum over a subset of supports can only be larger than the
    true minimum, so the result is an upper bound, never an estimate
    from below.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[1]
    s = min(2 * k, n)
    rng = make_rng(rng_seed)
    gram = G.T @ G
    idx = np.sort(np.argsort(rng.random((n_samples, n)), axis=1)[:, :s], axis=1)
    val = float(_min_eig_of_subsets(gram, idx).min())
    return 0.0 if val < EIG_ATOL else val


def f_of_q(n: int, m: int, q: float) -> float:
    """``sqrt(n/m) (sqrt(q) + sqrt(2 H2(q)))``."""
    if not 0 <= q < 1:
        raise ValueError("q must lie in [0, 1)")
    return math.sqrt(n / m) * (math.sqrt(q) + math.sqrt(2 * binary_entropy(q)))


def eta_of(alpha: float, epsilon: float, n: int, m: int) -> float:
    """``2 (1+eps) f(2 alpha) + (1+eps)^2 f(2 alpha)^2``.

    ``1 - eta`` is the level below which the sparse minimum eigenvalue of
    a Gaussian matrix rarely falls.
    """
    if 2 * alpha >= 1:
        raise OutOfRegimeError("need 2 alpha < 1")
    f = f_of_q(n, m, 2 * alpha)
    return 2 * (1 + epsilon) * f + (1 + epsilon) ** 2 * f ** 2


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def delta1(n: int, alpha: float, epsilon: float) -> float:
    """Tail bound on P(sigma_g_min <= 1 - eta): ``2 exp(-n eps H2(alpha) / 2)``."""
    return _clamp01(2 * math.exp(-n * epsilon * binary_entropy(alpha) / 2))


def delta2(m: int, n: int, epsilon: float) -> float:
    """Tail bound on P(max_j ||g_j||^2 >= 1 + eps).

    Chernoff on a chi-square with m degrees of freedom plus a union bound
    over the n columns: ``exp(-(m/2)(eps - ln(1+eps)) + ln n)``.
    """
    return _clamp01(math.exp(-0.5 * m * (epsilon - math.log1p(epsilon)) + math.log(n)))


def delta2_displayed(m: int, n: int, epsilon: float) -> float:
    """Variant with exponent ``(ln(1+eps) + eps)``; smaller than :func:`delta2`
    and not implied by the Chernoff argument.  Kept for comparison only."""
    return _clamp01(math.exp(-0.5 * m * (math.log1p(epsilon) + epsilon) + math.log(n)))


def concentration_certificates(n: int, m: int, alpha: float, epsilon: float) -> tuple[float, float]:
    """Return ``(delta1, delta2)``, both clamped to [0, 1]."""
    if n < 1 or m < 1 or not 0 < alpha < 1 or epsilon < 0:
        raise ValueError("invalid inputs")
    return delta1(n, alpha, epsilon), delta2(m, n, epsilon)


def e1_e2_upper_bounds(sigma_g_min: float, lambda_min_inv_sigma: float, beta: float,
                       snr: float, n: int) -> tuple[float, float]:
    """Upper bounds on the two ML error events for a fixed matrix.

    ``exp(-s^2 lam beta^2 snr / 32 + ln 2n)`` and the same with 8 in
    place of 32, both clamped.  The total is bounded by twice the first.
    """
    c = sigma_g_min ** 2 * lambda_min_inv_sigma * beta ** 2 * snr
    if math.isinf(c):
        return 0.0, 0.0
    return (_clamp01(math.exp(-c / 32 + math.log(2 * n))),
            _clamp01(math.exp(-c / 8 + math.log(2 * n))))


def e1_e2_total_bound(sigma_g_min, lambda_min_inv_sigma, beta, snr, n) -> float:
    c = sigma_g_min ** 2 * lambda_min_inv_sigma * beta ** 2 * snr
    return _clamp01(2 * math.exp(-c / 32 + math.log(2 * n)))


@dataclass(frozen=True)
class SpectralCertificate:
    sigma_g_min: float
    subset_cardinality_bound: int
    max_col_norm_sq: float
    delta1: float
    delta2: float
    eta: float
    f_2alpha: float

    def __post_init__(self):
        if self.sigma_g_min < 0:
            raise ValueError("sigma_g_min must be nonnegative")
        if not (0 <= self.delta1 <= 1 and 0 <= self.delta2 <= 1):
            raise ValueError("delta bounds must lie in [0, 1]")


def certify(G, k: int, epsilon: float, budget: int = DEFAULT_BUDGET) -> SpectralCertificate:
    """Evaluate every spectral quantity for one matrix."""
    G = np.asarray(G, dtype=float)
    m, n = G.shape
    alpha = k / n
    d1, d2 = concentration_certificates(n, m, alpha, epsilon)
    return SpectralCertificate(
        sigma_g_min=sigma_g_min(G, k, budget),
        subset_cardinality_bound=2 * k,
        max_col_norm_sq=float(np.max(np.sum(G ** 2, axis=0))),
        delta1=d1, delta2=d2,
        eta=eta_of(alpha, epsilon, n, m),
        f_2alpha=f_of_q(n, m, 2 * alpha))


@dataclass
class ConcentrationCheck:
    """Monte-Carlo tail frequencies next to their certificates."""

    n: int
    m: int
    k: int
    epsilon: float
    trials: int
    eta: float
    sigma_level: float
    sigma_tail_freq: Optional[float]
    delta1: float
    norm_tail_freq: float
    delta2: float
    sigma_simulated: bool

    def passes(self, n_se: float = 3.0) -> bool:
        ok = True
        for freq, bound in ((self.sigma_tail_freq, self.delta1), (self.norm_tail_freq, self.delta2)):
            if freq is None or self.trials == 0:
                continue
            se = math.sqrt(max(bound * (1 - bound), 1e-300) / self.trials)
            ok &= freq <= bound + n_se * se
        return bool(ok)


def verify_concentration(n: int, m: int, k: int, epsilon: float, trials: int,
                         rng_seed=0, budget: int = DEFAULT_BUDGET, batch: int = 500) -> ConcentrationCheck:
    """Compare empirical tails of sigma_g_min and the largest column norm with delta1, delta2.

    ``m ||g_j||^2`` is chi-square with ``m`` degrees of freedom and the
    columns are independent, so the column-norm tail is sampled directly
    from that law.  The sparse-eigenvalue tail ``P(sigma_g_min <= 1 - eta)``
    is simulated only when ``1 - eta >= 0``; otherwise the event is empty.
    """
    alpha = k / n
    eta = eta_of(alpha, epsilon, n, m)
    d1, d2 = concentration_certificates(n, m, alpha, epsilon)
    level = 1 - eta
    rng = make_rng(rng_seed)
    if trials == 0:
        return ConcentrationCheck(n, m, k, epsilon, 0, eta, level, None, d1, 0.0, d2, False)
    norms = rng.chisquare(m, size=(trials, n)) / m
    norm_freq = float(np.mean(norms.max(axis=1) >= 1 + epsilon))
    sigma_freq, simulated = None, False
    if level >= 0:
        hits = 0
        g_rng = make_rng((int(rng.integers(2 ** 63)), 1))
        for start in range(0, trials, batch):
            B = min(batch, trials - start)
            Gs = g_rng.standard_normal((B, m, n)) / math.sqrt(m)
            hits += int(np.sum(sigma_g_min_batch(Gs, k, budget) <= level))
        sigma_freq, simulated = hits / trials, True
    else:
        sigma_freq = 0.0
    return ConcentrationCheck(n, m, k, epsilon, trials, eta, level, sigma_freq, d1, norm_freq, d2, simulated)
