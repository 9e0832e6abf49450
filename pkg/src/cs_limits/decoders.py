"""Exhaustive support decoders, rate-distortion codebooks and the
superposition containment check.

The support decoder scans every candidate support, solves a least-squares
fit on each, and keeps the smallest residual.  Candidates are visited in
order of cardinality and then lexicographically; a candidate whose
residual is within ``1e-10 * ||y||^2`` of the global minimum and comes
first in that order wins, which makes ties reproducible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations, islice, product
from typing import Optional

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import rd_binary_hamming, rd_mixture_gaussian
from .exceptions import BudgetExceededError, CoverageWarning, OutOfRegimeError
from .model import BayesPrior, PriorKind, SparseSignal
from .rng import make_rng
from .spectral import e1_e2_upper_bounds, sigma_g_min

RCOND = 1e-10
TIE_RTOL = 1e-10
DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class SupportEstimate:
    """Decoded support with its least-squares coefficients and residual."""

    support: tuple
    coefficients: np.ndarray
    residual_sq: float
    rank_deficient: bool = False
    tie: bool = False
    n_candidates: int = 0

    def to_vector(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[list(self.support)] = self.coefficients
        return x


def count_supports(n: int, k: int, exactly_k: bool = False) -> int:
    if exactly_k:
        return math.comb(n, k)
    return sum(math.comb(n, s) for s in range(k + 1))


def _support_blocks(n: int, k: int, exactly_k: bool, chunk: int):
    """Yield index arrays of shape (B, s) in cardinality-then-lex order."""
    sizes = [k] if exactly_k else range(k + 1)
    for s in sizes:
        it = combinations(range(n), s)
        while True:
            block = list(islice(it, chunk))
            if not block:
                break
            yield np.array(block, dtype=np.intp).reshape(len(block), s)


def _batched_lstsq(A: np.ndarray, b: np.ndarray):
    """Minimum-norm least squares for a stack of systems.

    Parameters
    ----------
    A : ndarray of shape (B, m, s)
    b : ndarray of shape (B, m)

    Returns
    -------
    coef : (B, s), residual_sq : (B,), deficient : (B,) bool
    """
    B, m, s = A.shape
    if s == 0:
        return np.zeros((B, 0)), np.einsum("bm,bm->b", b, b), np.zeros(B, bool)
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = RCOND * S[:, :1]
    keep = S > cutoff
    inv = np.where(keep, 1.0 / np.where(keep, S, 1.0), 0.0)
    proj = np.einsum("bms,bm->bs", U, b) * inv
    coef = np.einsum("bsr,bs->br", Vt, proj)
    r = b - np.einsum("bms,bs->bm", A, coef)
    return coef, np.einsum("bm,bm->b", r, r), ~keep.all(axis=1)


def _project_refit(A: np.ndarray, y: np.ndarray, coef: np.ndarray, half_beta: float):
    """One pass of clamp-to-+-beta/2 on offending coordinates, then refit the rest."""
    B, m, s = A.shape
    coef = coef.copy()
    viol = np.abs(coef) < half_beta
    res = np.empty(B)
    deficient = np.zeros(B, bool)
    # weights for bit patterns
    codes = viol.astype(np.int64) @ (1 << np.arange(s, dtype=np.int64))
    for code in np.unique(codes):
        rows = np.flatnonzero(codes == code)
        mask = viol[rows[0]]
        fixed = np.where(coef[np.ix_(rows, np.flatnonzero(mask))] < 0, -half_beta, half_beta)
        target = y[rows] - np.einsum("bmf,bf->bm", A[np.ix_(rows, np.arange(m), np.flatnonzero(mask))], fixed)
        free = np.flatnonzero(~mask)
        c_free, r2, d = _batched_lstsq(A[np.ix_(rows, np.arange(m), free)], target)
        coef[np.ix_(rows, np.flatnonzero(mask))] = fixed
        coef[np.ix_(rows, free)] = c_free
        res[rows], deficient[rows] = r2, d
    return coef, res, deficient


def ml_support_decode(y, G, k: int, constraint: Optional[float] = None,
                      exactly_k: bool = False, budget: int = DEFAULT_BUDGET,
                      chunk: int = 4096) -> SupportEstimate:
    """Exhaustive least-squares support decoder.

    Parameters
    ----------
    y : array_like of shape (m,)
    G : array_like of shape (m, n)
    k : int
        Largest support size considered.
    constraint : float, optional
        If given (the amplitude ``beta``), fits whose smallest coefficient
        magnitude falls below ``beta/2`` are repaired by clamping the
        offending coordinates to ``+-beta/2`` and refitting the others once.
    exactly_k : bool
        Only consider supports of size exactly ``k``.
    budget : int
        Maximum number of candidate supports.

    Returns
    -------
    SupportEstimate

    Raises
    ------
    BudgetExceededError
        More than ``budget`` candidates.
    """
    y = np.asarray(getattr(y, "y", y), dtype=float)
    G = np.asarray(G, dtype=float)
    m, n = G.shape
    if y.shape != (m,):
        raise ValueError(f"y has shape {y.shape}, expected ({m},)")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    total = count_supports(n, k, exactly_k)
    if total > budget:
        raise BudgetExceededError(f"{total} candidate supports exceeds budget {budget}")
    if m < 2 * k + 1:
        warnings.warn(f"m={m} < 2k+1={2 * k + 1}; supports may be unidentifiable", RuntimeWarning)

    tol = TIE_RTOL * float(y @ y) + 1e-300
    cur_min = math.inf
    near = []  # candidates within tol of the running minimum, in scan order
    any_deficient = False
    for idx in _support_blocks(n, k, exactly_k, chunk):
        B, s = idx.shape
        A = G[:, idx].transpose(1, 0, 2) if s else np.zeros((B, m, 0))
        Y = np.broadcast_to(y, (B, m))
        coef, res, deficient = _batched_lstsq(A, Y)
        if constraint is not None and s and np.any(np.abs(coef) < constraint / 2):
            coef, res, d2 = _project_refit(A, Y, coef, constraint / 2)
            deficient |= d2
        any_deficient |= bool(deficient.any())
        cur_min = min(cur_min, float(res.min()))
        near = [c for c in near if c[0] <= cur_min + tol]
        for j in np.flatnonzero(res <= cur_min + tol):
            near.append((float(res[j]), tuple(int(i) for i in idx[j]), coef[j].copy()))
    best_r, support, coef = near[0]
    tie = len(near) > 1
    return SupportEstimate(support, coef, best_r, any_deficient, tie, total)


class MLSupportDecoder(BaseEstimator):
    """Estimator wrapper around :func:`ml_support_decode`.

    ``fit`` takes the sensing matrix; ``predict`` decodes a batch of
    measurement vectors into signal estimates.

    Parameters
    ----------
    k : int
    beta_constraint : float, optional
        Amplitude whose half is enforced as a lower bound on coefficient
        magnitudes (one-pass repair).
    exactly_k : bool
    budget : int
    """

    def __init__(self, k: int = 1, beta_constraint: Optional[float] = None,
                 exactly_k: bool = False, budget: int = DEFAULT_BUDGET):
        self.k = k
        self.beta_constraint = beta_constraint
        self.exactly_k = exactly_k
        self.budget = budget

    def fit(self, G, y=None):
        G = check_array(G, ensure_min_samples=1)
        self.G_ = np.asfortranarray(G)
        self.n_features_in_ = G.shape[0]
        self.n_coefs_ = G.shape[1]
        return self

    def decode(self, y) -> SupportEstimate:
        check_is_fitted(self, "G_")
        return ml_support_decode(y, self.G_, self.k, self.beta_constraint,
                                 self.exactly_k, self.budget)

    def predict(self, Y) -> np.ndarray:
        """Decode each row of ``Y`` (n_samples, m) into an n-vector."""
        check_is_fitted(self, "G_")
        Y = check_array(Y)
        if Y.shape[1] != self.n_features_in_:
            raise ValueError(f"Y has {Y.shape[1]} columns, G has {self.n_features_in_} rows")
        return np.vstack([self.decode(y).to_vector(self.n_coefs_) for y in Y])

    def predict_support(self, Y) -> list:
        Y = check_array(Y)
        return [self.decode(y).support for y in Y]

    def score(self, Y, X) -> float:
        """Fraction of rows whose support is recovered exactly."""
        Xh = self.predict(Y)
        X = check_array(X)
        return float(np.mean(np.all((Xh != 0) == (X != 0), axis=1)))


# --------------------------------------------------------------------------
# rate-distortion codebooks

METRIC_HAMMING = "Hamming"
METRIC_SQUARED = "SquaredError"


@dataclass(frozen=True)
class Codebook:
    """Quantization points with their target distortion and coverage.

    ``points`` are distinct rows in lexicographic order, so the row index
    doubles as the tie-breaking order of the decoder.
    """

    points: np.ndarray
    d0: float
    metric: str
    rate_nats: float
    coverage_estimate: float
    epsilon: float
    target_rate: float = 0.0
    certified: bool = True
    method: str = "random"
    coverage_draws: int = 0
    coverage_exact: Optional[float] = None

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _per_coord_distortion(X: np.ndarray, Z: np.ndarray, metric: str) -> np.ndarray:
    """(a, b) matrix of per-coordinate distortions between rows of X and Z."""
    if metric == METRIC_HAMMING:
        return (X[:, None, :] != Z[None, :, :]).mean(axis=2)
    d = X[:, None, :] - Z[None, :, :]
    return np.einsum("abn,abn->ab", d, d) / X.shape[1]


def _min_distortion(X: np.ndarray, Z: np.ndarray, metric: str, chunk: int = 512) -> np.ndarray:
    out = np.empty(X.shape[0])
    step = max(1, chunk * 256 // max(Z.shape[0], 1))
    for i in range(0, X.shape[0], step):
        out[i:i + step] = _per_coord_distortion(X[i:i + step], Z, metric).min(axis=1)
    return out


def _rd_rate(prior: BayesPrior, d0: float, metric: str) -> float:
    if metric == METRIC_HAMMING:
        if prior.kind is not PriorKind.BINARY_DELTA:
            raise OutOfRegimeError("Hamming codebooks need a BinaryDelta prior")
        return rd_binary_hamming(prior.alpha, d0)
    if prior.kind is not PriorKind.SPARSE_GAUSSIAN:
        raise OutOfRegimeError("squared-error codebooks need a SparseGaussian prior")
    return rd_mixture_gaussian(prior.alpha, 0.0, prior.sigma1sq, d0)


def _draw_source(prior: BayesPrior, n: int, count: int, rng) -> np.ndarray:
    on = rng.random((count, n)) < prior.alpha
    if prior.kind is PriorKind.BINARY_DELTA:
        return np.where(on, prior.mu1, 0.0)
    vals = prior.mu1 + math.sqrt(prior.sigma1sq) * rng.standard_normal((count, n))
    off = prior.mu0 + math.sqrt(prior.sigma0sq) * rng.standard_normal((count, n))
    return np.where(on, vals, off)


def _most_likely_point(prior: BayesPrior, n: int) -> np.ndarray:
    if prior.kind is PriorKind.BINARY_DELTA and prior.alpha > 0.5:
        return np.full((1, n), prior.mu1)
    return np.full((1, n), prior.mu0)


def exact_hamming_coverage(points: np.ndarray, prior: BayesPrior, n: int, d0: float) -> float:
    """Exact P(min_i d(X, Z_i) <= d0) for a BinaryDelta source, by enumerating {0,1}^n."""
    if n > 20:
        raise BudgetExceededError("exact coverage only for n <= 20")
    cube = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    w = cube.sum(axis=1)
    prob = prior.alpha ** w * (1 - prior.alpha) ** (n - w)
    covered = _min_distortion(cube * prior.mu1, points, METRIC_HAMMING) <= d0 + 1e-12
    return float(prob[covered].sum())


def build_codebook(prior: BayesPrior, n: int, d0: float, epsilon: float = 0.1,
                   metric: str = METRIC_HAMMING, rng_seed=0, n_coverage: int = 4000,
                   max_points: int = 2 ** 18) -> Codebook:
    """Random-coding quantizer at rate ``R(d0) + epsilon``.

    Draws ``ceil(exp(n (R + eps)))`` points IID from the reproduction
    distribution (the source itself), deduplicates them, and estimates the
    coverage ``P(min_i d(X, Z_i)/n <= d0)`` on ``n_coverage`` fresh source
    draws.  If coverage is below ``1 - eps``, ``eps`` is doubled once and
    the codebook redrawn.  If it is still short a
    :class:`CoverageWarning` is issued and ``certified`` is False.

    At zero rate the codebook is the single most likely source point.
    """
    if n_coverage < 1000:
        raise ValueError("coverage needs at least 1000 source draws")
    rate = _rd_rate(prior, d0, metric)
    rng = make_rng(rng_seed)
    test = _draw_source(prior, n, n_coverage, rng)

    def attempt(eps):
        if rate == 0:
            pts = _most_likely_point(prior, n)
        else:
            size = math.ceil(math.exp(n * (rate + eps)))
            if size > max_points:
                raise BudgetExceededError(f"codebook of {size} points exceeds {max_points}")
            pts = np.unique(_draw_source(prior, n, size, rng), axis=0)
        cov = float(np.mean(_min_distortion(test, pts, metric) <= d0 + 1e-12))
        return pts, cov

    eps = epsilon
    pts, cov = attempt(eps)
    if cov < 1 - eps and rate > 0:
        eps = 2 * epsilon
        pts, cov = attempt(eps)
    certified = cov >= 1 - eps
    if not certified:
        warnings.warn(f"codebook coverage {cov:.3f} below target {1 - eps:.3f}", CoverageWarning)
    exact = None
    if metric == METRIC_HAMMING and n <= 16:
        exact = exact_hamming_coverage(pts, prior, n, d0)
    return Codebook(pts, d0, metric, math.log(pts.shape[0]) / n, cov, eps, rate,
                    certified, "random", n_coverage, exact)


def greedy_cover_codebook(prior: BayesPrior, n: int, d0: float, target_coverage: float,
                          max_n: int = 20) -> Codebook:
    """Greedy weighted set cover of {0, beta}^n under Hamming distortion.

    Repeatedly adds the cube point whose radius-``floor(n d0)`` ball
    captures the most not-yet-covered probability mass, until the covered
    mass reaches ``target_coverage``.
    """
    if prior.kind is not PriorKind.BINARY_DELTA:
        raise OutOfRegimeError("greedy cover is for BinaryDelta sources")
    if n > max_n:
        raise BudgetExceededError(f"greedy cover limited to n <= {max_n}")
    N = 2 ** n
    codes = np.arange(N)
    bits = ((codes[:, None] >> np.arange(n)[None, :]) & 1)
    w = bits.sum(axis=1)
    prob = prior.alpha ** w * (1 - prior.alpha) ** (n - w)
    radius = int(math.floor(n * d0 + 1e-9))
    # ball membership via xor popcount
    if N > 4096:
        raise BudgetExceededError("greedy cover membership matrix too large")
    pop = np.array([bin(i).count("1") for i in range(N)])
    inball = pop[codes[:, None] ^ codes[None, :]] <= radius
    remaining = prob.copy()
    chosen = []
    covered = 0.0
    while covered < target_coverage - 1e-12:
        gain = inball @ remaining
        j = int(np.argmax(gain))
        if gain[j] <= 0:
            break
        chosen.append(j)
        covered += gain[j]
        remaining[inball[j]] = 0.0
    pts = np.unique(bits[chosen].astype(float) * prior.mu1, axis=0)
    rate = rd_binary_hamming(prior.alpha, d0)
    return Codebook(pts, d0, METRIC_HAMMING, math.log(pts.shape[0]) / n, float(covered),
                    max(0.0, 1 - covered), rate, covered >= target_coverage - 1e-12,
                    "greedy", 0, float(covered))


def rd_min_distance_decode(y, G, codebook, return_index: bool = False):
    """Return the codeword ``Z_i`` minimizing ``||y - G Z_i||^2``.

    Ties go to the lowest row index, i.e. the lexicographically smallest
    codeword.
    """
    pts = codebook.points if isinstance(codebook, Codebook) else np.asarray(codebook, dtype=float)
    if pts.shape[0] == 0:
        raise ValueError("empty codebook")
    y = np.asarray(getattr(y, "y", y), dtype=float)
    G = np.asarray(G, dtype=float)
    if pts.shape[1] != G.shape[1] or y.shape != (G.shape[0],):
        raise ValueError("dimension mismatch")
    r = y[None, :] - pts @ G.T
    d = np.einsum("im,im->i", r, r)
    i = int(np.flatnonzero(d <= d.min() + TIE_RTOL * float(y @ y))[0])
    return (pts[i].copy(), i) if return_index else pts[i].copy()


def codebook_error_upper_bound(codebook: Codebook, snr: float, m: int, beta: float = 1.0,
                               full_output: bool = False):
    """Upper bound on P(distortion > 2 d0) for minimum-distance codebook decoding.

    ``(1 - eps) |C| (1 + snr beta^2 n d0 / m)^(-m/2) + eps``, clamped to
    [0, 1].  The middle factor is the Gaussian-ensemble average of
    ``exp(-snr ||G (Z_i - Z_j)||^2 / 32)`` for codeword pairs at squared
    distance ``16 n d0 beta^2``; ``|C|`` replaces ``exp(n R)``.  ``eps`` is
    the larger of the codebook's declared slack and its coverage shortfall
    (exact coverage when available).

    Parameters
    ----------
    codebook : Codebook
    snr : float
    m : int
        Number of measurements.
    beta : float
        Nonzero amplitude of the source.
    """
    n = codebook.points.shape[1]
    cov = codebook.coverage_exact if codebook.coverage_exact is not None else codebook.coverage_estimate
    eps = min(1.0, max(codebook.epsilon, 1.0 - cov))
    if math.isinf(snr):
        pair = 0.0
    else:
        pair = math.exp(-0.5 * m * math.log1p(snr * beta ** 2 * n * codebook.d0 / m))
    raw = (1 - eps) * codebook.size * pair + eps
    val = min(1.0, raw)
    if full_output:
        return val, dict(raw=raw, epsilon=eps, pairwise=pair, size=codebook.size)
    return val


class RDCodebookQuantizer(TransformerMixin, BaseEstimator):
    """Random-coding quantizer for a sparse IID source.

    ``fit`` builds the codebook (the training rows, if given, are only
    used for their width ``n``); ``transform`` maps each row to its
    nearest codeword in source space; ``decode`` maps a measurement to
    the codeword whose image under ``G`` is closest.
    """

    def __init__(self, alpha: float = 0.1, beta: float = 1.0, d0: float = 0.05,
                 epsilon: float = 0.1, prior_kind: str = "BinaryDelta",
                 metric: str = METRIC_HAMMING, n_coverage: int = 4000, random_state: int = 0):
        self.alpha = alpha
        self.beta = beta
        self.d0 = d0
        self.epsilon = epsilon
        self.prior_kind = prior_kind
        self.metric = metric
        self.n_coverage = n_coverage
        self.random_state = random_state

    def _prior(self) -> BayesPrior:
        if PriorKind(self.prior_kind) is PriorKind.BINARY_DELTA:
            return BayesPrior.binary_delta(self.alpha, self.beta)
        return BayesPrior.sparse_gaussian(self.alpha, self.beta ** 2)

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.codebook_ = build_codebook(self._prior(), X.shape[1], self.d0, self.epsilon,
                                        self.metric, self.random_state, self.n_coverage)
        return self

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        X = check_array(X)
        D = _per_coord_distortion(X, self.codebook_.points, self.metric)
        return self.codebook_.points[np.argmin(D, axis=1)]

    def decode(self, y, G):
        check_is_fitted(self, "codebook_")
        return rd_min_distance_decode(y, G, self.codebook_)


# --------------------------------------------------------------------------
# superposition containment

@dataclass
class ContainmentReport:
    """Per-draw comparison of the multi-error ML event and its atomic cover.

    ``e1_hits`` counts draws where some wrong support with all
    coefficients at least ``beta/2`` in magnitude fits as well as the
    unconstrained fit on the true support.  ``atomic_hits`` counts draws
    where some column satisfies ``|N^T g_j| >= sigma_g_min * beta / 4``.
    A violation is a draw in the first set but not the second.
    """

    draws: int
    e1_hits: int
    atomic_hits: int
    violations: int
    sigma_g_min: float
    snr: float
    union_bound: float
    union_bound_unit: float
    p_e1_ub: float
    hypothesis_ok: bool
    notes: str = ""
    violation_draws: list = field(default_factory=list)

    @property
    def atomic_freq(self) -> float:
        return self.atomic_hits / self.draws if self.draws else 0.0

    @property
    def e1_freq(self) -> float:
        return self.e1_hits / self.draws if self.draws else 0.0


def _orth_bases(G: np.ndarray, supports: list) -> list:
    out = []
    for S in supports:
        if len(S) == 0:
            out.append(np.zeros((G.shape[0], 0)))
        else:
            Q, _ = np.linalg.qr(G[:, list(S)])
            out.append(Q)
    return out


def constrained_residuals(G: np.ndarray, support, Y: np.ndarray, half_beta: float) -> np.ndarray:
    """Exact ``min ||y - G_S x||^2`` subject to ``|x_j| >= half_beta`` for each row of Y.

    The feasible set is a union of 2^s convex orthant pieces.  On each
    piece the optimum lies on some face; every face is tried by fixing the
    active coordinates at ``+-half_beta``, refitting the free ones, and
    keeping the result only if it is feasible.  Requires ``G_S`` to have
    full column rank.
    """
    S = list(support)
    s = len(S)
    if s == 0:
        return np.einsum("dm,dm->d", Y, Y)
    GS = G[:, S]
    best = np.full(Y.shape[0], np.inf)
    for signs in product((-1.0, 1.0), repeat=s):
        sg = np.array(signs)
        for active in product((False, True), repeat=s):
            act = np.array(active)
            fixed = sg[act] * half_beta
            R = Y - GS[:, act] @ fixed if act.any() else Y
            free = np.flatnonzero(~act)
            if free.size:
                coef, *_ = np.linalg.lstsq(GS[:, free], R.T, rcond=None)
                ok = np.all(sg[free][:, None] * coef >= half_beta - 1e-12, axis=0)
                R = R - (GS[:, free] @ coef).T
            else:
                ok = np.ones(Y.shape[0], bool)
            r2 = np.einsum("dm,dm->d", R, R)
            best = np.where(ok & (r2 < best), r2, best)
    return best


def verify_superposition_containment(G, x0, k: int, beta: float, noise_draws: int,
                                     rng_seed=0, snr: float = 1.0,
                                     budget: int = DEFAULT_BUDGET,
                                     max_violation_records: int = 10) -> ContainmentReport:
    """Check, draw by draw, that the multi-error ML event sits inside its atomic cover.

    Parameters
    ----------
    G : array_like of shape (m, n)
    x0 : SparseSignal or array_like
        True signal; its support is the reference support.
    k : int
        Largest support size in the decoder's search.
    beta : float
        Amplitude; wrong supports must fit with coefficients of size at
        least ``beta/2``.
    noise_draws : int
    rng_seed : int
    snr : float
        The additive noise is ``N(0, I) / sqrt(snr)``.
    """
    G = np.asarray(G, dtype=float)
    m, n = G.shape
    x = x0.values if isinstance(x0, SparseSignal) else np.asarray(x0, dtype=float)
    S0 = tuple(int(j) for j in np.flatnonzero(x))
    total = count_supports(n, k)
    if total > budget:
        raise BudgetExceededError(f"{total} supports exceeds budget {budget}")
    sg = sigma_g_min(G, k, budget)
    ok = m >= 2 * k + 1 and sg > 0
    col_norms = np.linalg.norm(G, axis=0)
    arg = sg * math.sqrt(snr) * beta / 4
    union = float(min(1.0, np.sum(2 * norm.sf(arg / col_norms))))
    union_unit = float(min(1.0, 2 * n * norm.sf(arg)))
    p_e1 = e1_e2_upper_bounds(sg, 1.0, beta, snr, n)[0]
    notes = "" if ok else "hypothesis fails: need m >= 2k+1 and sigma_g_min > 0"
    if noise_draws == 0:
        return ContainmentReport(0, 0, 0, 0, sg, snr, union, union_unit, p_e1, ok,
                                 (notes + "; " if notes else "") + "no draws: vacuous pass")

    rng = make_rng(rng_seed)
    Nz = rng.standard_normal((noise_draws, m)) / math.sqrt(snr)
    Y = (G @ x)[None, :] + Nz

    atomic = np.max(np.abs(Nz @ G), axis=1) >= sg * beta / 4

    supports = [S for s in range(k + 1) for S in combinations(range(n), s)]
    bases = _orth_bases(G, supports)
    yy = np.einsum("dm,dm->d", Y, Y)

    def unconstrained(Q):
        P = Y @ Q
        return yy - np.einsum("dr,dr->d", P, P)

    r_true = unconstrained(bases[supports.index(S0)]) if S0 in supports else None
    if r_true is None:
        raise ValueError("true support is larger than k")
    e1 = np.zeros(noise_draws, bool)
    for S, Q in zip(supports, bases):
        if S == S0:
            continue
        cand = np.flatnonzero(~e1 & (unconstrained(Q) <= r_true))
        if cand.size == 0:
            continue
        rc = constrained_residuals(G, S, Y[cand], beta / 2)
        e1[cand[rc <= r_true[cand]]] = True
    viol = np.flatnonzero(e1 & ~atomic)
    return ContainmentReport(noise_draws, int(e1.sum()), int(atomic.sum()), int(viol.size),
                             sg, snr, union, union_unit, p_e1, ok, notes,
                             [int(v) for v in viol[:max_violation_records]])


@dataclass
class EventBoundCheck:
    draws: int
    e1_freq: float
    e2_freq: float
    p_e1_ub: float
    p_e2_ub: float
    sigma_g_min: float

    def passes(self, n_se: float = 3.0) -> bool:
        if self.draws == 0:
            return True
        ok = True
        for freq, ub in ((self.e1_freq, self.p_e1_ub), (self.e2_freq, self.p_e2_ub)):
            se = math.sqrt(max(ub * (1 - ub), 1e-300) / self.draws)
            ok &= freq <= ub + n_se * se
        return bool(ok)


def verify_event_bounds(G, x0, k: int, beta: float, noise_draws: int, rng_seed=0,
                        snr: float = 1.0) -> EventBoundCheck:
    """Empirical frequencies of the two ML error events against their certificates.

    The first event is the multi-error event of
    :func:`verify_superposition_containment`; the second is
    ``||(G_S^T G_S)^{-1} G_S^T N||_inf >= beta/2`` on the true support.
    """
    G = np.asarray(G, dtype=float)
    x = x0.values if isinstance(x0, SparseSignal) else np.asarray(x0, dtype=float)
    rep = verify_superposition_containment(G, x, k, beta, noise_draws, rng_seed, snr)
    sg = rep.sigma_g_min
    p1, p2 = e1_e2_upper_bounds(sg, 1.0, beta, snr, G.shape[1])
    if noise_draws == 0:
        return EventBoundCheck(0, 0.0, 0.0, p1, p2, sg)
    # same stream as the containment check, so both events see the same noise
    Nz = make_rng(rng_seed).standard_normal((noise_draws, G.shape[0])) / math.sqrt(snr)
    S0 = np.flatnonzero(x)
    GS = G[:, S0]
    coef = np.linalg.solve(GS.T @ GS, GS.T @ Nz.T) if S0.size else np.zeros((0, noise_draws))
    e2 = np.max(np.abs(coef), axis=0) >= beta / 2 if S0.size else np.zeros(noise_draws, bool)
    return EventBoundCheck(noise_draws, rep.e1_freq, float(np.mean(e2)), p1, p2, sg)
