"""Closed-form information quantities and recovery thresholds.

Everything is in nats.  Lower bounds on error probability are clamped to
[0, 1]; pass ``full_output=True`` to also get the unclamped value and a
``vacuous`` flag.  Threshold calculators return :class:`BoundReport`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import entr, gammaln

from .exceptions import ConvergenceError, OutOfRegimeError
from .model import Channel

LN2 = math.log(2.0)
LINEAR_REGIME_ALPHA = 0.04


# --------------------------------------------------------------------------
# entropies and rate-distortion functions

def binary_entropy(q):
    """Binary entropy in nats, with 0 ln 0 = 0.  Accepts scalars or arrays."""
    qa = np.asarray(q, dtype=float)
    if np.any((qa < 0) | (qa > 1)) or np.any(np.isnan(qa)):
        raise ValueError(f"binary entropy needs q in [0, 1], got {q}")
    h = entr(qa) + entr(1.0 - qa)
    return float(h) if h.ndim == 0 else h


def log_binom(n: int, k: int) -> float:
    """ln C(n, k) via log-gamma; exact enough for n up to ~1e6."""
    if k < 0 or k > n:
        raise ValueError("need 0 <= k <= n")
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def _log_expm1(x: float) -> float:
    """ln(e^x - 1) for x > 0 without overflow."""
    if x > 30:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def log_binom_minus_one(n: int, k: int) -> float:
    """ln(C(n, k) - 1); -inf when C(n, k) = 1."""
    lb = log_binom(n, k)
    if lb <= 0:
        return -math.inf
    if n < 1000:
        return math.log(math.comb(n, k) - 1)
    return _log_expm1(lb)


def rd_binary_hamming(alpha: float, d0: float) -> float:
    """Rate-distortion function of a Bernoulli(alpha) source, Hamming metric.

    ``R(d0) = H2(alpha) - H2(d0)`` on ``0 <= d0 <= alpha <= 1/2``.
    """
    if not 0 < alpha <= 0.5:
        raise OutOfRegimeError(f"alpha must lie in (0, 1/2], got {alpha}")
    if d0 < 0:
        raise OutOfRegimeError("d0 must be nonnegative")
    if d0 > alpha:
        raise OutOfRegimeError(f"d0={d0} exceeds alpha={alpha}; the rate is zero there")
    return max(0.0, binary_entropy(alpha) - binary_entropy(d0))


def rd_mixture_gaussian(alpha: float, sigma0sq: float, sigma1sq: float, D: float,
                        d_floor: float = 1e-12) -> float:
    """Rate-distortion function of a two-component Gaussian mixture (MSE).

    For ``D < sigma0sq`` both components are quantized; above it only the
    high-variance component is.  With ``sigma0sq = 0`` this is
    ``H2(alpha) + (alpha/2) ln(alpha sigma1sq / D)`` on ``0 < D <= alpha sigma1sq``.

    Note the function equals ``H2(alpha)``, not zero, at the largest
    admissible ``D``: the component labels still cost their entropy.
    """
    if not 0 < alpha < 1:
        raise OutOfRegimeError("alpha must lie in (0, 1)")
    if sigma0sq < 0 or sigma1sq <= 0:
        raise OutOfRegimeError("need sigma0sq >= 0 and sigma1sq > 0")
    total = (1 - alpha) * sigma0sq + alpha * sigma1sq
    if D <= 0:
        raise OutOfRegimeError("D must be positive")
    if D < d_floor:
        raise OutOfRegimeError(f"D={D} below the floor {d_floor}; the rate diverges")
    if D > total * (1 + 1e-12):
        raise OutOfRegimeError(f"D={D} above the total variance {total}")
    h = binary_entropy(alpha)
    if D < sigma0sq:
        return h + 0.5 * (1 - alpha) * math.log(sigma0sq / D) + 0.5 * alpha * math.log(sigma1sq / D)
    return h + 0.5 * alpha * math.log(alpha * sigma1sq / (D - (1 - alpha) * sigma0sq))


# --------------------------------------------------------------------------
# Fano-type lower bounds

def _clamped(raw: float, full_output: bool, **info):
    val = min(1.0, max(0.0, raw)) if not math.isnan(raw) else 0.0
    if full_output:
        return val, dict(raw=raw, vacuous=not raw > 0, **info)
    return val


def fano_uniform_lb(card, mutual_info: float, full_output: bool = False):
    """Fano bound for a uniform prior over ``card`` hypotheses.

    ``1 - (I + ln 2) / ln(card - 1)``, clamped to [0, 1].  ``card`` may be
    a Python int of any size.
    """
    if card < 2:
        raise ValueError("need at least two hypotheses")
    if mutual_info < 0:
        raise ValueError("mutual information must be nonnegative")
    logc = math.log(card - 1)
    raw = -math.inf if logc == 0 else 1.0 - (mutual_info + LN2) / logc
    return _clamped(raw, full_output)


def fano_kl_lb(kl_matrix, full_output: bool = False):
    """Fano bound from a matrix of pairwise KL divergences.

    ``1 - (mean of all N^2 entries + ln 2) / ln(N - 1)``.  Invariant to
    relabeling the hypotheses.
    """
    K = np.asarray(kl_matrix, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("KL matrix must be square")
    N = K.shape[0]
    if N < 2:
        raise ValueError("need at least two hypotheses")
    if np.any(K < 0):
        raise ValueError("KL divergences are nonnegative")
    if np.any(np.diag(K) != 0):
        raise ValueError("KL matrix must have a zero diagonal")
    return fano_kl_mean_lb(float(K.mean()), N, full_output)


def fano_kl_mean_lb(mean_kl: float, N, full_output: bool = False):
    """KL-matrix Fano bound from the mean pairwise divergence over all N^2 pairs.

    Useful when the hypothesis count is too large to materialize the matrix.
    """
    if N < 2:
        raise ValueError("need at least two hypotheses")
    if mean_kl < 0:
        raise ValueError("KL divergences are nonnegative")
    logc = math.log(N - 1)
    raw = -math.inf if logc == 0 else 1.0 - (mean_kl + LN2) / logc
    return _clamped(raw, full_output)


def fano_discrete_distortion_lb(n: int, alphabet_size: int, rate_at_d0: float,
                                mutual_info: float, d0: float,
                                min_prob: Optional[float] = None,
                                full_output: bool = False):
    """Lower bound on P(Hamming distortion > d0) for a discrete IID source.

    Parameters
    ----------
    n : int
        Block length.
    alphabet_size : int
        Source alphabet size ``|X| >= 2``.
    rate_at_d0 : float
        Rate-distortion function at ``d0`` (nats per symbol).
    mutual_info : float
        Mutual information between the block and the observation (nats).
    d0 : float
        Target per-symbol distortion.
    min_prob : float, optional
        Smallest source letter probability; when supplied, the condition
        ``d0 <= (|X| - 1) min_prob`` is checked.
    """
    if alphabet_size < 2:
        raise ValueError("alphabet must have at least two letters")
    if not 0 < d0 <= 0.5:
        raise OutOfRegimeError("need 0 < d0 <= 1/2")
    if min_prob is not None and d0 > (alphabet_size - 1) * min_prob + 1e-15:
        raise OutOfRegimeError("d0 exceeds (|X| - 1) * min letter probability")
    log_nd = math.log(n * d0)
    num = n * rate_at_d0 - mutual_info - 1.0 - log_nd
    den = (n * math.log(alphabet_size)
           - n * (binary_entropy(d0) + d0 * math.log(alphabet_size - 1) + log_nd / n))
    if den <= 0:
        raise ValueError("nonpositive denominator; n too small for this d0")
    return _clamped(num / den, full_output, numerator=num, denominator=den)


def neighbor_term_default(alpha: float) -> float:
    """Large-n value of the log neighbour count for a sparse Gaussian source."""
    return 0.5 * alpha * LN2


def fano_continuous_distortion_lb(rate_at_d0: float, neighbor_term_K: Optional[float],
                                  mutual_info_per_n: float, epsilon: float,
                                  alpha: Optional[float] = None, full_output: bool = False):
    """Lower bound on P(distortion > d0) for a continuous source.

    ``(R - K - I/n) / (R + epsilon)``, clamped.  When ``neighbor_term_K``
    is None it defaults to ``0.5 alpha ln 2`` (``alpha`` required).
    """
    if neighbor_term_K is None:
        if alpha is None:
            raise ValueError("give neighbor_term_K or alpha")
        neighbor_term_K = neighbor_term_default(alpha)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    den = rate_at_d0 + epsilon
    if rate_at_d0 <= neighbor_term_K or den <= 0:
        return _clamped(-math.inf, full_output, rate_below_K=True)
    raw = (rate_at_d0 - neighbor_term_K - mutual_info_per_n) / den
    return _clamped(raw, full_output, rate_below_K=False)


# --------------------------------------------------------------------------
# mutual-information caps

def mi_cap(channel, n: int, m: int, beta: float, snr: float, *, k: Optional[int] = None,
           alpha: Optional[float] = None, bayesian: bool = False) -> float:
    """Upper bound on I(X; Y | G) for Gaussian ensembles.

    * output channel, worst case: ``(m/2) ln(1 + k beta^2 snr / m)``
    * output channel, Bayesian prior: ``(m/2) ln(1 + (n/m) alpha beta^2 snr)``
    * input channel: ``(m/2) ln(1 + alpha beta^2 snr)``
    """
    if n < 1 or m < 1:
        raise ValueError("dimensions must be positive")
    if snr < 0 or beta < 0:
        raise ValueError("snr and beta must be nonnegative")
    if alpha is None:
        if k is None:
            raise ValueError("give k or alpha")
        alpha = k / n
    if k is None:
        k = alpha * n
    channel = Channel(channel)
    if channel is Channel.INPUT:
        s = alpha * beta ** 2 * snr
    elif bayesian:
        s = (n / m) * alpha * beta ** 2 * snr
    else:
        s = k * beta ** 2 * snr / m
    return 0.5 * m * math.log1p(s)


def sensing_capacity_ratio(n: int, k: int, m: int) -> float:
    """Source entropy per measurement, ``n H2(k/n) / m`` (nats)."""
    if not 0 < k < n or m < 1:
        raise ValueError("need 0 < k < n and m >= 1")
    return n * binary_entropy(k / n) / m


# --------------------------------------------------------------------------
# threshold reports

@dataclass
class BoundReport:
    """One evaluated threshold.

    ``m_threshold`` is an integer measurement count; ``m_exact`` keeps the
    real-valued formula before rounding.  ``m_floor`` is the structural
    minimum ``2k + 1`` where it applies.
    """

    theorem_id: str
    direction: str
    regime: str
    snr_threshold: Optional[float] = None
    m_threshold: Optional[int] = None
    m_exact: Optional[float] = None
    m_floor: Optional[int] = None
    vacuous: bool = False
    out_of_regime: bool = False
    notes: str = ""
    inputs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


NECESSARY = "Necessary"
SUFFICIENT = "Sufficient"
LINEAR = "Linear"
SUBLINEAR = "Sublinear"


def regime_of(alpha: float) -> str:
    return LINEAR if alpha > LINEAR_REGIME_ALPHA else SUBLINEAR


def smallest_m(rhs: Callable[[float], float], max_iter: int = 10_000) -> tuple[int, int]:
    """Smallest integer m >= 1 with ``m >= rhs(m)`` for increasing ``rhs``.

    Iterates ``m <- ceil(rhs(m))`` from m = 1.  Because ``rhs`` is
    increasing, the iterates climb monotonically and stop exactly at the
    least solution.  Returns ``(m, iterations)``.
    """
    m = 1
    for it in range(1, max_iter + 1):
        target = rhs(m)
        if m >= target - 1e-9:
            return m, it
        m = max(m + 1, math.ceil(target - 1e-9))
    raise ConvergenceError(f"fixed point not reached in {max_iter} iterations (m={m})")


def _bisect_m(lhs_ok: Callable[[int], bool], hi: int = 2) -> int:
    while not lhs_ok(hi):
        hi *= 2
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lhs_ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _solve_m(rhs, lhs_ok, max_iter):
    try:
        m, _ = smallest_m(rhs, max_iter)
        return m, ""
    except ConvergenceError:
        # slow approach to an asymptote; the condition is monotone in m
        return _bisect_m(lhs_ok), "fixed point slow; solved by bisection"


def necessary_thresholds_output(n: int, k: int, beta: float, snr: float,
                                max_iter: int = 10_000) -> BoundReport:
    """Necessary SNR and measurement count for exact support recovery (output noise).

    The SNR requirement is ``ln(n) / (2 beta^2)``.  The measurement count
    is the least m with ``m ln(1 + k beta^2 snr / m) + ln 2 >= ln(C(n,k) - 1)``.
    When even m -> infinity cannot satisfy it, ``m_threshold`` is None and
    the report is marked infeasible in ``notes``.
    """
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if beta <= 0 or snr <= 0:
        raise ValueError("beta and snr must be positive")
    a = k * beta ** 2 * snr
    L = log_binom_minus_one(n, k)
    rep = BoundReport("output-necessity", NECESSARY, regime_of(k / n),
                      snr_threshold=math.log(n) / (2 * beta ** 2),
                      inputs=dict(n=n, k=k, beta=beta, snr=snr))
    if L <= LN2:
        rep.m_threshold, rep.m_exact = 1, 1.0
        return rep
    if not math.isinf(a) and a + LN2 <= L:
        rep.notes = "infeasible: no m meets the necessary condition at this snr"
        return rep
    if math.isinf(a):
        rep.m_threshold, rep.m_exact = 1, 1.0
        return rep
    rhs = lambda m: L / (math.log1p(a / m) + LN2 / m)
    ok = lambda m: m >= 1 and m * math.log1p(a / m) + LN2 >= L
    rep.m_threshold, rep.notes = _solve_m(rhs, ok, max_iter)
    rep.m_exact = float(rep.m_threshold)
    return rep


def necessary_threshold_input(n: int, alpha: float, beta: float, snr: float) -> BoundReport:
    """Necessary measurement count under input noise.

    ``ceil(n max(ln n, ln 1/alpha) / (beta^2 snr))``, at least 1.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if beta <= 0 or snr <= 0:
        raise ValueError("beta and snr must be positive")
    exact = n * max(math.log(n), math.log(1 / alpha)) / (beta ** 2 * snr)
    return BoundReport("input-necessity", NECESSARY, regime_of(alpha),
                       m_threshold=max(1, math.ceil(exact - 1e-12)), m_exact=exact,
                       inputs=dict(n=n, alpha=alpha, beta=beta, snr=snr))


def sufficient_thresholds_output(n: int, k: int, beta: float, regime: Optional[str] = None) -> BoundReport:
    """Sufficient SNR and measurements for ML support recovery (Gaussian G).

    SNR ``32 ln(2n) / beta^2``; measurements ``ceil(6 k ln(n / 2k))``
    (sublinear) or ``ceil(6 n H2(2k/n))`` (linear, needs k/n <= 0.04).
    ``m_threshold`` never drops below ``2k + 1``.

    Raises
    ------
    OutOfRegimeError
        Linear branch requested with k/n > 0.04.
    """
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if beta <= 0:
        raise ValueError("beta must be positive")
    alpha = k / n
    regime = regime_of(alpha) if regime is None else regime.capitalize()
    if regime not in (LINEAR, SUBLINEAR):
        raise ValueError(f"unknown regime {regime!r}")
    if regime == LINEAR:
        if alpha > LINEAR_REGIME_ALPHA:
            raise OutOfRegimeError(f"k/n = {alpha:.4g} exceeds {LINEAR_REGIME_ALPHA}")
        exact = 6 * n * binary_entropy(2 * alpha)
    else:
        exact = 6 * k * math.log(n / (2 * k))
    floor = 2 * k + 1
    return BoundReport("output-sufficiency", SUFFICIENT, regime,
                       snr_threshold=32 * math.log(2 * n) / beta ** 2,
                       m_threshold=max(floor, math.ceil(exact - 1e-12)), m_exact=exact,
                       m_floor=floor, inputs=dict(n=n, k=k, beta=beta))


def sufficient_thresholds_deterministic(sigma_g_min: float, lambda_min_inv_sigma: float,
                                        n: int, beta: float, k: Optional[int] = None) -> BoundReport:
    """Sufficient SNR for a fixed matrix with sparse minimum eigenvalue ``sigma_g_min``.

    ``64 ln(2n) / (beta^2 lambda_min(Sigma^-1) sigma_g_min^2)``.

    Raises
    ------
    OutOfRegimeError
        ``sigma_g_min == 0``: some 2k columns are dependent and exact
        recovery cannot be guaranteed at any SNR.
    """
    if sigma_g_min < 0 or lambda_min_inv_sigma <= 0 or beta <= 0:
        raise ValueError("invalid inputs")
    if sigma_g_min == 0:
        raise OutOfRegimeError("sigma_g_min = 0: sparse submatrix is singular, no finite threshold")
    snr = 64 * math.log(2 * n) / (beta ** 2 * lambda_min_inv_sigma * sigma_g_min ** 2)
    return BoundReport("deterministic-sufficiency", SUFFICIENT,
                       regime_of(k / n) if k else SUBLINEAR, snr_threshold=snr,
                       m_floor=None if k is None else 2 * k + 1,
                       inputs=dict(sigma_g_min=sigma_g_min, lambda_min_inv_sigma=lambda_min_inv_sigma,
                                   n=n, beta=beta, k=k))


def approx_support_sufficient(n: int, k: int, beta: float, d0: float) -> BoundReport:
    """Sufficient conditions for recovering the support up to a fraction ``d0``.

    SNR ``64 H2(2 k d0 / n) / beta^2`` and ``m = ceil(6 n H2(2k/n))``.
    """
    if not 0 < d0 <= 2:
        raise OutOfRegimeError("d0 must lie in (0, 2]")
    q = 2 * k * d0 / n
    if q > 0.5:
        raise OutOfRegimeError(f"2 k d0 / n = {q:.4g} exceeds 1/2")
    if 2 * k > n:
        raise OutOfRegimeError("2k/n exceeds 1")
    exact = 6 * n * binary_entropy(2 * k / n)
    snr = 64 * binary_entropy(q) / beta ** 2
    rep = BoundReport("approx-support-sufficiency", SUFFICIENT, regime_of(k / n),
                      snr_threshold=snr, m_threshold=max(1, math.ceil(exact - 1e-12)),
                      m_exact=exact, inputs=dict(n=n, k=k, beta=beta, d0=d0))
    if snr < 1e-9:
        rep.notes = "degenerate: d0 near 0 needs the exact-recovery threshold instead"
    return rep


BAYES_MODELS = ("InputBinary", "OutputBinary", "InputContinuous", "OutputContinuous")


def bayes_thresholds(model: str, n: int, alpha: float, beta_or_sigma: float, snr: float,
                     d0: float, max_iter: int = 10_000) -> tuple[BoundReport, BoundReport]:
    """Necessary and sufficient measurement counts for a Bayesian source.

    Parameters
    ----------
    model : {"InputBinary", "OutputBinary", "InputContinuous", "OutputContinuous"}
    n : int
    alpha : float
        Fraction of nonzero coordinates.
    beta_or_sigma : float
        Nonzero amplitude (binary) or standard deviation of the nonzero
        component (continuous).
    snr, d0 : float
        Noise level and target distortion (Hamming or per-coordinate MSE).

    Returns
    -------
    (necessary, sufficient) : tuple of BoundReport
        ``m_exact`` holds the real-valued threshold; for the output model
        it is the least integer solution of the implicit inequality.
    """
    if model not in BAYES_MODELS:
        raise ValueError(f"model must be one of {BAYES_MODELS}")
    output = model.startswith("Output")
    binary = model.endswith("Binary")
    b2 = beta_or_sigma ** 2
    if binary:
        rate = lambda d: rd_binary_hamming(alpha, d)
        r_nec = rate(d0)
    else:
        rate = lambda d: rd_mixture_gaussian(alpha, 0.0, b2, d)
        r_nec = rate(d0) - neighbor_term_default(alpha)
    r_suff = rate(d0 / 2)
    s_nec = alpha * b2 * snr
    s_suff = d0 * b2 * snr / 2
    inputs = dict(model=model, n=n, alpha=alpha, beta_or_sigma=beta_or_sigma, snr=snr, d0=d0)
    regime = regime_of(alpha)

    def solve(rate_val, s, tag, direction):
        rep = BoundReport(f"bayes-{tag}", direction, regime, inputs=dict(inputs))
        if rate_val <= 0:
            rep.m_exact, rep.m_threshold = 0.0, 0
            rep.vacuous = True
            rep.notes = "rate numerator nonpositive: no obstruction" if direction == NECESSARY else "zero rate"
            return rep
        if math.isinf(s):
            rep.m_exact, rep.m_threshold = 0.0, 0
            rep.notes = "infinite snr"
            return rep
        if s <= 0:
            rep.notes = "infeasible: zero snr"
            return rep
        if not output:
            rep.m_exact = n * rate_val / (0.5 * math.log1p(s))
            rep.m_threshold = max(1, math.ceil(rep.m_exact - 1e-12))
            return rep
        # m >= n R / (0.5 ln(1 + (n/m) s)); left side bounded by n s / 2
        if n * s / 2 <= n * rate_val:
            rep.notes = "infeasible: no m meets the condition at this snr"
            return rep
        rhs = lambda m: n * rate_val / (0.5 * math.log1p(n * s / m))
        ok = lambda m: m >= 1 and 0.5 * m * math.log1p(n * s / m) >= n * rate_val
        rep.m_threshold, rep.notes = _solve_m(rhs, ok, max_iter)
        rep.m_exact = float(rep.m_threshold)
        return rep

    kind = model.lower().replace("binary", "-binary").replace("continuous", "-continuous")
    return solve(r_nec, s_nec, kind + "-necessity", NECESSARY), solve(r_suff, s_suff, kind + "-sufficiency", SUFFICIENT)


def bayes_explicit_corollary(n: int, alpha: float, beta: float, d0: float) -> tuple[BoundReport, BoundReport]:
    """Explicit SNR and m conditions for the binary Bayesian output model.

    Failure region: ``SNR <= 2 R(d0) / (alpha beta^2)`` and ``m <= 2 n R(d0)``.
    Success region: ``SNR >= 200 R(d0/2) / (d0 beta^2)`` and
    ``m >= 2.08 n R(d0/2)``.
    """
    if not 0 < d0 <= alpha:
        raise OutOfRegimeError("need 0 < d0 <= alpha")
    r = rd_binary_hamming(alpha, d0)
    r_half = rd_binary_hamming(alpha, d0 / 2)
    inputs = dict(n=n, alpha=alpha, beta=beta, d0=d0)
    regime = regime_of(alpha)
    nec_m = 2 * n * r
    nec = BoundReport("bayes-explicit-necessity", NECESSARY, regime,
                      snr_threshold=2 * r / (alpha * beta ** 2), m_exact=nec_m,
                      m_threshold=math.ceil(nec_m - 1e-12), inputs=inputs,
                      vacuous=r == 0, notes="no obstruction" if r == 0 else "")
    suff_m = 2.08 * n * r_half
    suff = BoundReport("bayes-explicit-sufficiency", SUFFICIENT, regime,
                       snr_threshold=200 * r_half / (d0 * beta ** 2), m_exact=suff_m,
                       m_threshold=math.ceil(suff_m - 1e-12), inputs=dict(inputs))
    return nec, suff
