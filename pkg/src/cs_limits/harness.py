"""Seeded Monte-Carlo sweeps over (n, k, m, snr, d0) grids.

Every trial draws its matrix, signal and noise from Philox streams keyed
by ``(master_seed, cell_key, trial)``.  With ``paired_seeds`` (the
default) the cell key ignores the SNR axis, so cells that differ only in
SNR reuse the same matrix, signal and unscaled noise; configs that
differ only in ``channel`` share the matrix and signal as well.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from typing import Optional

import numpy as np
from scipy.stats import binomtest

from . import bounds
from .decoders import (METRIC_HAMMING, METRIC_SQUARED, build_codebook, count_supports,
                       ml_support_decode, rd_min_distance_decode)
from .exceptions import BudgetExceededError, OutOfRegimeError
from .model import (BayesPrior, Channel, Ensemble, Metric, PriorKind, SignalClass, SignalKind,
                    apply_channel, distortion, sample_matrix, sample_signal)
from .rng import spawn_streams, trial_seed

CSV_HEADER = ["n", "k", "m", "snr", "d0", "channel", "decoder", "trials", "errors", "p_emp",
              "ci_lo", "ci_hi", "mean_dist", "fano_lb", "nec_snr", "nec_m", "suff_snr",
              "suff_m", "seed"]
DECODERS = ("ExhaustiveML", "RelaxedML", "RdCodebook")
THREADS_ENV = "CS_LIMITS_THREADS"


def _floats(values) -> list:
    out = []
    for v in values:
        if isinstance(v, str) and v.lower() in ("inf", "infinity"):
            v = math.inf
        out.append(float(v))
    return out


@dataclass
class ExperimentConfig:
    """Sweep definition; field names match the JSON config keys.

    ``signal_source`` is a dict such as ``{"type": "SignalClass", "kind":
    "ExactlyK", "beta": 1.0}`` or ``{"type": "BayesPrior", "kind":
    "BinaryDelta", "beta": 1.0}``; for priors, ``alpha`` defaults to
    ``k / n`` per cell.  ``d0 = 0`` means exact support recovery.
    A trial counts as an error when its distortion exceeds
    ``error_threshold_scale * d0`` (scale defaults to 2 for the codebook
    decoder and 1 otherwise).
    """

    n: list
    k: list
    m: list
    snr: list
    d0: list = field(default_factory=lambda: [0.0])
    trials_per_cell: int = 100
    channel: str = "OutputNoise"
    signal_source: dict = field(default_factory=lambda: {"type": "SignalClass", "kind": "ExactlyK", "beta": 1.0})
    decoder: str = "ExhaustiveML"
    metric: str = "SupportFrac"
    master_seed: int = 0
    budget: int = 10 ** 7
    ensemble: str = "GaussianIID"
    fixed_G: bool = False
    paired_seeds: bool = True
    error_threshold_scale: Optional[float] = None
    codebook_epsilon: float = 0.1
    exactly_k: Optional[bool] = None

    def __post_init__(self):
        for name in ("n", "k", "m"):
            vals = getattr(self, name)
            vals = [vals] if isinstance(vals, (int, float)) else list(vals)
            if not vals or any(int(v) != v or v < 1 for v in vals):
                raise ValueError(f"{name} must be a nonempty list of positive integers")
            setattr(self, name, [int(v) for v in vals])
        self.snr = _floats([self.snr] if isinstance(self.snr, (int, float, str)) else self.snr)
        self.d0 = _floats([self.d0] if isinstance(self.d0, (int, float, str)) else self.d0)
        if not self.snr or any(not s > 0 for s in self.snr):
            raise ValueError("snr values must be positive")
        if not self.d0 or any(d < 0 for d in self.d0):
            raise ValueError("d0 values must be nonnegative")
        if self.trials_per_cell < 0:
            raise ValueError("trials_per_cell must be nonnegative")
        self.channel = Channel(self.channel).value
        self.metric = Metric(self.metric).value
        self.ensemble = Ensemble(self.ensemble).value
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")
        src = dict(self.signal_source)
        if src.get("type") not in ("SignalClass", "BayesPrior"):
            raise ValueError("signal_source.type must be SignalClass or BayesPrior")
        self.signal_source = src
        if self.decoder == "RdCodebook" and src["type"] != "BayesPrior":
            raise ValueError("the codebook decoder needs a BayesPrior source")
        for n, k in product(self.n, self.k):
            if k >= n:
                raise ValueError(f"need k < n in every cell (k={k}, n={n})")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr"] = [s if math.isfinite(s) else "inf" for s in self.snr]
        return d

    @property
    def is_bayes(self) -> bool:
        return self.signal_source["type"] == "BayesPrior"

    @property
    def beta(self) -> float:
        return float(self.signal_source.get("beta", 1.0))

    @property
    def threshold_scale(self) -> float:
        if self.error_threshold_scale is not None:
            return float(self.error_threshold_scale)
        return 2.0 if self.decoder == "RdCodebook" else 1.0

    def cells(self):
        """Yield ``(cell_index, cell_key, (n, k, m, snr, d0))`` in a fixed order."""
        idx = 0
        for key, (n, k, m, d0) in enumerate(product(self.n, self.k, self.m, self.d0)):
            for snr in self.snr:
                yield idx, key, (n, k, m, snr, d0)
                idx += 1

    def make_source(self, n: int, k: int):
        src = self.signal_source
        kind = src.get("kind")
        if src["type"] == "SignalClass":
            return SignalClass(n, k, self.beta, SignalKind(kind or "ExactlyK"))
        alpha = float(src.get("alpha", k / n))
        kind = PriorKind(kind or "BinaryDelta")
        if kind is PriorKind.BINARY_DELTA:
            return BayesPrior.binary_delta(alpha, self.beta)
        if kind is PriorKind.SPARSE_GAUSSIAN:
            return BayesPrior.sparse_gaussian(alpha, float(src.get("sigma1sq", self.beta ** 2)))
        return BayesPrior.mixture_gaussian(alpha, float(src.get("mu1", 0.0)), float(src.get("mu0", 0.0)),
                                           float(src.get("sigma1sq", 1.0)), float(src.get("sigma0sq", 0.0)))

    def decode_exactly_k(self) -> bool:
        if self.exactly_k is not None:
            return bool(self.exactly_k)
        src = self.signal_source
        return src["type"] == "SignalClass" and src.get("kind", "ExactlyK") != "AtMostK"


@dataclass
class TrialOutcome:
    error: bool
    distortion: float
    support: tuple
    support_hat: tuple
    true_residual: float
    failed: bool = False


@dataclass
class CellResult:
    n: int
    k: int
    m: int
    snr: float
    d0: float
    channel: str
    decoder: str
    trials: int
    errors: int
    p_emp: float
    ci_lo: float
    ci_hi: float
    mean_dist: float
    fano_lb: Optional[float]
    nec_snr: Optional[float]
    nec_m: Optional[int]
    suff_snr: Optional[float]
    suff_m: Optional[int]
    seed: int
    failures: int = 0
    nec_flag: bool = False
    suff_flag: bool = False
    wall_time: float = field(default=0.0, compare=False)

    def csv_values(self) -> list:
        return [_fmt(getattr(self, c)) for c in CSV_HEADER]

    def as_dict(self) -> dict:
        d = {c: getattr(self, c) for c in CSV_HEADER}
        d.update(failures=self.failures, nec_flag=self.nec_flag, suff_flag=self.suff_flag)
        return {k: (_json_num(v)) for k, v in d.items()}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_values())
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "config": self.config.to_dict(),
            "seed_lineage": {
                "generator": "numpy Philox via SeedSequence",
                "trial_seed": "SeedSequence([master_seed, cell_key, trial])",
                "cell_key": "index over (n, k, m, d0)" if self.config.paired_seeds else "cell index",
            },
            "notes": self.notes,
            "rows": [r.as_dict() for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    """Two-sided 95% Wilson score interval."""
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def wilson_half_width(errors: int, trials: int) -> float:
    lo, hi = wilson_interval(errors, trials)
    return 0.5 * (hi - lo)


def worker_count(requested: Optional[int] = None) -> int:
    """Worker threads: ``requested``, else ``$CS_LIMITS_THREADS``, else CPU count."""
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


# --------------------------------------------------------------------------
# one trial

def _cell_key(config: ExperimentConfig, cell_index: int, key: int) -> int:
    return key if config.paired_seeds else cell_index


def _true_residual(G: np.ndarray, support, y: np.ndarray) -> float:
    if len(support) == 0:
        return float(y @ y)
    A = G[:, list(support)]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r)


def simulate_trial(config: ExperimentConfig, cell: tuple, cell_key: int, trial: int,
                   codebook=None) -> TrialOutcome:
    """Run one trial of one cell; pure function of its arguments."""
    n, k, m, snr, d0 = cell
    seed = trial_seed(config.master_seed, cell_key, trial)
    g_rng, x_rng, w_rng = spawn_streams(seed, 3)
    if config.fixed_G:
        g_rng = trial_seed(config.master_seed, cell_key, 2 ** 32)
    G = sample_matrix(m, n, config.ensemble, g_rng)
    source = config.make_source(n, k)
    x = sample_signal(source, x_rng, n=n)
    channel = Channel(config.channel)
    noise = w_rng.standard_normal(m if channel is Channel.OUTPUT else n)
    y = apply_channel(G, x.values, noise, snr, channel)
    true_res = _true_residual(G, x.support, y)

    try:
        if config.decoder == "RdCodebook":
            xhat = rd_min_distance_decode(y, G, codebook)
            supp_hat = tuple(int(j) for j in np.flatnonzero(xhat))
        else:
            est = ml_support_decode(y, G, k,
                                    constraint=config.beta if config.decoder == "RelaxedML" else None,
                                    exactly_k=config.decode_exactly_k(), budget=config.budget)
            supp_hat = est.support
            xhat = est.to_vector(n)
    except (np.linalg.LinAlgError, FloatingPointError):
        return TrialOutcome(True, math.nan, x.support, (), true_res, failed=True)

    metric = Metric(config.metric)
    if metric is Metric.MSE_L2:
        dist = distortion(x.values, xhat, metric)
    else:
        mismatches = len(set(x.support) ^ set(supp_hat))
        dist = mismatches / (k if metric is Metric.SUPPORT_FRAC else n)
    err = dist > config.threshold_scale * d0 + 1e-12
    return TrialOutcome(bool(err), float(dist), x.support, supp_hat, true_res)


# --------------------------------------------------------------------------
# per-cell bounds

def _nan_if(fn):
    try:
        return fn()
    except (OutOfRegimeError, ValueError):
        return None


def _prob_exactly_k(n: int, k: int, alpha: float) -> float:
    return math.comb(n, k) * alpha ** k * (1 - alpha) ** (n - k)


def _mean_symdiff(n: int, k: int) -> float:
    # two independent uniform k-subsets: E|S1 ^ S2| = 2k - 2k^2/n
    return 2 * k - 2 * k * k / n


def _kl_scale(channel: Channel, n: int, m: int) -> float:
    # expected fraction of ||x_i - x_j||^2 seen by the channel
    return 1.0 if channel is Channel.OUTPUT else min(1.0, m / n)


def cell_bounds(config: ExperimentConfig, cell: tuple) -> dict:
    """Fano lower bound and necessary/sufficient thresholds for one cell."""
    n, k, m, snr, d0 = cell
    beta = config.beta
    channel = Channel(config.channel)
    out = dict(fano_lb=None, nec_snr=None, nec_m=None, suff_snr=None, suff_m=None)
    source = config.make_source(n, k)
    finite = math.isfinite(snr)

    if isinstance(source, SignalClass):
        exact = source.kind is not SignalKind.AT_MOST_K
        card = math.comb(n, k) if exact else sum(math.comb(n, s) for s in range(k + 1))
        if channel is Channel.OUTPUT:
            nec = bounds.necessary_thresholds_output(n, k, beta, snr) if finite else None
            out["nec_snr"] = math.log(n) / (2 * beta ** 2)
            out["nec_m"] = nec.m_threshold if nec else 1
            suff = _nan_if(lambda: bounds.sufficient_thresholds_output(n, k, beta, regime="sublinear"))
            if suff:
                out["suff_snr"], out["suff_m"] = suff.snr_threshold, suff.m_threshold
        else:
            nec = bounds.necessary_threshold_input(n, k / n, beta, snr) if finite else None
            out["nec_m"] = nec.m_threshold if nec else 1
        if finite and d0 == 0:
            I = bounds.mi_cap(channel, n, m, beta, snr, k=k)
            lbs = [bounds.fano_uniform_lb(card, I)]
            if source.kind is SignalKind.BINARY_BETA:
                kl = 0.5 * snr * beta ** 2 * _mean_symdiff(n, k) * _kl_scale(channel, n, m)
                lbs.append(bounds.fano_kl_mean_lb(kl, math.comb(n, k)))
            out["fano_lb"] = max(lbs)
        return out

    alpha = source.alpha
    binary = source.kind is PriorKind.BINARY_DELTA
    model = ("Output" if channel is Channel.OUTPUT else "Input") + ("Binary" if binary else "Continuous")
    d_eff = d0 if d0 > 0 else 1.0 / (2 * n)
    if finite:
        pair = _nan_if(lambda: bounds.bayes_thresholds(model, n, alpha, beta if binary else math.sqrt(source.sigma1sq),
                                                       snr, d_eff))
        if pair:
            out["nec_m"], out["suff_m"] = pair[0].m_threshold, pair[1].m_threshold
    if binary and channel is Channel.OUTPUT:
        cor = _nan_if(lambda: bounds.bayes_explicit_corollary(n, alpha, beta, d_eff))
        if cor:
            out["nec_snr"], out["suff_snr"] = cor[0].snr_threshold, cor[1].snr_threshold
    if not finite:
        return out

    lbs = []
    if binary and d0 == 0 and config.decoder != "RdCodebook":
        p_k = _prob_exactly_k(n, k, alpha)
        I_k = bounds.mi_cap(channel, n, m, beta, snr, k=k)
        lbs.append(p_k * bounds.fano_uniform_lb(math.comb(n, k), I_k))
        kl = 0.5 * snr * beta ** 2 * _mean_symdiff(n, k) * _kl_scale(channel, n, m)
        lbs.append(p_k * bounds.fano_kl_mean_lb(kl, math.comb(n, k)))
    if binary:
        # Hamming surrogate: an exact-support error is a distortion above 1/(2n)
        d_err = config.threshold_scale * d0 if d0 > 0 else 1.0 / (2 * n)
        if d_err <= min(alpha, 0.5):
            I = bounds.mi_cap(channel, n, m, beta, snr, alpha=alpha, bayesian=True)
            lb = _nan_if(lambda: bounds.fano_discrete_distortion_lb(
                n, 2, bounds.rd_binary_hamming(alpha, d_err), I, d_err, min_prob=min(alpha, 1 - alpha)))
            if lb is not None:
                lbs.append(lb)
    elif source.kind is PriorKind.SPARSE_GAUSSIAN and d0 > 0:
        d_err = config.threshold_scale * d0
        I = bounds.mi_cap(channel, n, m, math.sqrt(source.sigma1sq), snr, alpha=alpha, bayesian=True)
        rate = _nan_if(lambda: bounds.rd_mixture_gaussian(alpha, 0.0, source.sigma1sq, d_err))
        if rate is not None:
            lbs.append(bounds.fano_continuous_distortion_lb(rate, None, I / n, 0.0, alpha=alpha))
    out["fano_lb"] = max(lbs) if lbs else None
    return out


# --------------------------------------------------------------------------
# sweeps

def _check_budget(config: ExperimentConfig) -> None:
    if config.decoder == "RdCodebook":
        return
    for n, k in product(config.n, config.k):
        c = count_supports(n, k, config.decode_exactly_k())
        if c > config.budget:
            raise BudgetExceededError(f"cell n={n}, k={k}: {c} supports exceeds budget {config.budget}")


def _codebook_for(config: ExperimentConfig, cell: tuple, key: int):
    n, k, m, snr, d0 = cell
    source = config.make_source(n, k)
    metric = METRIC_HAMMING if source.kind is PriorKind.BINARY_DELTA else METRIC_SQUARED
    return build_codebook(source, n, d0, config.codebook_epsilon, metric,
                          trial_seed(config.master_seed, key, 2 ** 33))


def run_cell(config: ExperimentConfig, index: int, key: int, cell: tuple,
             pool: Optional[ThreadPoolExecutor] = None) -> tuple[CellResult, list]:
    """Run all trials of one cell; returns the aggregated row and the outcomes."""
    t0 = time.perf_counter()
    ck = _cell_key(config, index, key)
    codebook = _codebook_for(config, cell, ck) if config.decoder == "RdCodebook" else None
    T = config.trials_per_cell
    job = lambda t: simulate_trial(config, cell, ck, t, codebook)
    outcomes = list(pool.map(job, range(T))) if pool else [job(t) for t in range(T)]
    errors = sum(o.error for o in outcomes)
    dists = [o.distortion for o in outcomes if not o.failed]
    lo, hi = wilson_interval(errors, T)
    b = cell_bounds(config, cell)
    n, k, m, snr, d0 = cell
    nec_flag = bool((b["nec_m"] is not None and m < b["nec_m"])
                    or (b["nec_snr"] is not None and snr < b["nec_snr"]))
    suff_flag = bool(b["suff_m"] is not None and m >= b["suff_m"]
                     and (b["suff_snr"] is None or snr >= b["suff_snr"]))
    row = CellResult(n, k, m, snr, d0, config.channel, config.decoder, T, errors,
                     errors / T if T else 0.0, lo, hi,
                     float(np.mean(dists)) if dists else math.nan, b["fano_lb"],
                     b["nec_snr"], b["nec_m"], b["suff_snr"], b["suff_m"],
                     trial_seed(config.master_seed, ck), sum(o.failed for o in outcomes),
                     nec_flag, suff_flag, time.perf_counter() - t0)
    return row, outcomes


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None,
                   keep_outcomes: bool = False):
    """Run every cell of the grid.

    Returns an :class:`ExperimentResult`; with ``keep_outcomes`` also the
    per-cell lists of :class:`TrialOutcome`.
    """
    _check_budget(config)
    workers = worker_count(threads)
    rows, all_outcomes = [], []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for index, key, cell in config.cells():
            row, outcomes = run_cell(config, index, key, cell, pool)
            rows.append(row)
            if keep_outcomes:
                all_outcomes.append(outcomes)
    finally:
        if pool:
            pool.shutdown()
    notes = []
    if not config.is_bayes:
        notes.append("worst-case probability approximated by random-sign or binary amplitude-beta signals")
    result = ExperimentResult(config, rows, notes)
    return (result, all_outcomes) if keep_outcomes else result


def phase_diagram(config: ExperimentConfig, threads: Optional[int] = None) -> dict:
    """Rows of a 2-D (m, snr) sweep keyed by ``(m, snr)``.

    The config must fix a single ``n``, ``k`` and ``d0``.
    """
    if len(config.n) != 1 or len(config.k) != 1 or len(config.d0) != 1:
        raise ValueError("phase_diagram needs single-valued n, k and d0")
    result = run_experiment(config, threads)
    return {(r.m, r.snr): r for r in result.rows}


@dataclass
class FanoCheck:
    rows: list
    violations: int

    @property
    def passes(self) -> bool:
        return self.violations == 0


def verify_fano(config: ExperimentConfig, threads: Optional[int] = None, n_se: float = 3.0) -> FanoCheck:
    """Check that every cell's empirical error clears its Fano lower bound.

    A cell violates when ``p_emp < fano_lb - n_se * wilson_half_width``.
    """
    result = run_experiment(config, threads)
    bad = 0
    for r in result.rows:
        if r.fano_lb is None or r.trials == 0:
            continue
        if r.p_emp < r.fano_lb - n_se * wilson_half_width(r.errors, r.trials):
            bad += 1
    return FanoCheck(result.rows, bad)
