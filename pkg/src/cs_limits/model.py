"""Signals, priors, sensing matrices, noise channels and distortion metrics.

Two measurement channels are supported::

    output noise:  y = G x + N / sqrt(snr),   N ~ N(0, Sigma_m)
    input noise:   y = G (x + N / sqrt(snr)), N ~ N(0, Sigma_n)

All value types are frozen dataclasses holding read-only arrays, so they
can be shared between worker threads without copying.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .rng import make_rng


class SignalKind(str, Enum):
    AT_MOST_K = "AtMostK"
    EXACTLY_K = "ExactlyK"
    BINARY_BETA = "BinaryBeta"


class PriorKind(str, Enum):
    MIXTURE_GAUSSIAN = "MixtureGaussian"
    BINARY_DELTA = "BinaryDelta"
    SPARSE_GAUSSIAN = "SparseGaussian"


class Ensemble(str, Enum):
    DETERMINISTIC_NORMALIZED = "DeterministicNormalized"
    GAUSSIAN_IID = "GaussianIID"


class Channel(str, Enum):
    OUTPUT = "OutputNoise"
    INPUT = "InputNoise"


class Metric(str, Enum):
    SUPPORT_FRAC = "SupportFrac"
    HAMMING_PER_N = "HammingPerN"
    MSE_L2 = "MseL2"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SparseSignal:
    """A sparse vector with its support and minimum on-support magnitude.

    Parameters
    ----------
    values : ndarray of shape (n,)
    support : tuple of int
        Sorted indices of the nonzero entries.
    beta : float
        Lower bound on ``|values[j]|`` for ``j`` in the support.
    provenance : str
        Which class or prior produced the draw.
    """

    values: np.ndarray
    support: tuple
    beta: float = 0.0
    provenance: str = "manual"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "support", tuple(int(j) for j in self.support))
        supp = np.zeros(v.size, dtype=bool)
        supp[list(self.support)] = True
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be sorted and duplicate-free")
        if np.any(v[~supp] != 0):
            raise ValueError("nonzero value outside the declared support")
        if self.beta > 0 and np.any(np.abs(v[supp]) < self.beta * (1 - 1e-12)):
            raise ValueError("on-support magnitude below beta")

    @classmethod
    def from_values(cls, values, beta: float = 0.0, provenance: str = "manual") -> "SparseSignal":
        v = np.asarray(values, dtype=float)
        return cls(v, tuple(np.flatnonzero(v)), beta, provenance)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def k(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class SignalClass:
    """Worst-case signal class: at most / exactly ``k`` nonzeros of size >= beta.

    ``BinaryBeta`` signals take values in {0, beta} with exactly ``k``
    nonzeros.
    """

    n: int
    k: int
    beta: float = 1.0
    kind: SignalKind = SignalKind.EXACTLY_K

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.k < 0 or self.k > self.n:
            raise ValueError(f"need 0 <= k <= n, got k={self.k}, n={self.n}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.kind is SignalKind.BINARY_BETA and self.beta <= 0:
            raise ValueError("BinaryBeta requires beta > 0")

    @property
    def alpha(self) -> float:
        return self.k / self.n


@dataclass(frozen=True)
class BayesPrior:
    """IID two-component Gaussian mixture prior on each coordinate.

    With probability ``alpha`` a coordinate is drawn from
    N(mu1, sigma1sq), otherwise from N(mu0, sigma0sq).  Use the
    constructors :meth:`binary_delta` and :meth:`sparse_gaussian` for the
    two degenerate cases.
    """

    alpha: float
    mu1: float = 0.0
    mu0: float = 0.0
    sigma1sq: float = 1.0
    sigma0sq: float = 0.0
    kind: PriorKind = PriorKind.MIXTURE_GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        # alpha = 1 is a legal degenerate mixture for sampling; the
        # rate-distortion formulas enforce alpha <= 1/2 themselves
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.sigma1sq < 0 or self.sigma0sq < 0:
            raise ValueError("variances must be nonnegative")
        if self.kind is PriorKind.BINARY_DELTA:
            if self.sigma1sq != 0 or self.sigma0sq != 0 or self.mu0 != 0:
                raise ValueError("BinaryDelta needs sigma1sq = sigma0sq = mu0 = 0")
        if self.kind is PriorKind.SPARSE_GAUSSIAN:
            if self.mu1 != 0 or self.sigma0sq != 0 or self.mu0 != 0:
                raise ValueError("SparseGaussian needs mu1 = mu0 = sigma0sq = 0")

    @classmethod
    def binary_delta(cls, alpha: float, beta: float = 1.0) -> "BayesPrior":
        return cls(alpha, mu1=beta, mu0=0.0, sigma1sq=0.0, sigma0sq=0.0,
                   kind=PriorKind.BINARY_DELTA)

    @classmethod
    def sparse_gaussian(cls, alpha: float, sigma1sq: float = 1.0) -> "BayesPrior":
        return cls(alpha, mu1=0.0, mu0=0.0, sigma1sq=sigma1sq, sigma0sq=0.0,
                   kind=PriorKind.SPARSE_GAUSSIAN)

    @classmethod
    def mixture_gaussian(cls, alpha, mu1=0.0, mu0=0.0, sigma1sq=1.0, sigma0sq=0.0) -> "BayesPrior":
        return cls(alpha, mu1, mu0, sigma1sq, sigma0sq, PriorKind.MIXTURE_GAUSSIAN)

    @property
    def beta(self) -> float:
        """Minimum on-support magnitude guaranteed by the prior."""
        return abs(self.mu1) if self.kind is PriorKind.BINARY_DELTA else 0.0


AmplitudeFn = Callable[[np.random.Generator, int], np.ndarray]


def sample_support(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random sorted support of the given size."""
    return np.sort(rng.choice(n, size=size, replace=False))


def sample_signal(source: Union[SignalClass, BayesPrior], rng_seed, n: Optional[int] = None,
                  amplitudes: Optional[AmplitudeFn] = None) -> SparseSignal:
    """Draw one signal from a worst-case class or a Bayesian prior.

    Parameters
    ----------
    source : SignalClass or BayesPrior
    rng_seed : int, tuple or Generator
    n : int, optional
        Signal length; required for a ``BayesPrior``.
    amplitudes : callable, optional
        ``amplitudes(rng, size)`` overrides the default on-support values
        (``beta`` times a random sign) for worst-case classes.  Returned
        magnitudes must be at least ``beta``.

    Returns
    -------
    SparseSignal
    """
    rng = make_rng(rng_seed)
    if isinstance(source, SignalClass):
        cls = source
        if cls.kind is SignalKind.AT_MOST_K:
            # uniform over all admissible sets => size ~ C(n, s)
            logw = np.array([math.lgamma(cls.n + 1) - math.lgamma(s + 1) - math.lgamma(cls.n - s + 1)
                             for s in range(cls.k + 1)])
            w = np.exp(logw - logw.max())
            size = int(rng.choice(cls.k + 1, p=w / w.sum()))
        else:
            size = cls.k
        supp = sample_support(cls.n, size, rng)
        x = np.zeros(cls.n)
        if amplitudes is not None:
            vals = np.asarray(amplitudes(rng, size), dtype=float)
        elif cls.kind is SignalKind.BINARY_BETA:
            vals = np.full(size, cls.beta)
        else:
            vals = cls.beta * rng.choice([-1.0, 1.0], size=size)
        x[supp] = vals
        return SparseSignal(x, tuple(supp), cls.beta, f"class:{cls.kind.value}")

    prior = source
    if n is None or n < 1:
        raise ValueError("a positive n is required when sampling from a prior")
    on = rng.random(n) < prior.alpha
    x = np.where(on,
                 prior.mu1 + math.sqrt(prior.sigma1sq) * rng.standard_normal(n),
                 prior.mu0 + math.sqrt(prior.sigma0sq) * rng.standard_normal(n))
    return SparseSignal(x, tuple(np.flatnonzero(x)), prior.beta, f"prior:{prior.kind.value}")


def sample_matrix(m: int, n: int, ensemble=Ensemble.GAUSSIAN_IID, rng_seed=0) -> np.ndarray:
    """Draw an m x n sensing matrix, stored column-major.

    ``GaussianIID`` entries are N(0, 1/m); ``DeterministicNormalized``
    draws a Gaussian matrix and rescales every column to unit norm.
    """
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    ensemble = Ensemble(ensemble)
    rng = make_rng(rng_seed)
    G = rng.standard_normal((m, n)) / math.sqrt(m)
    if ensemble is Ensemble.DETERMINISTIC_NORMALIZED:
        norms = np.linalg.norm(G, axis=0)
        norms[norms == 0] = 1.0
        G = G / norms
    return np.asfortranarray(G)


@dataclass(frozen=True)
class SensingInstance:
    """A sensing matrix together with its noise channel and SNR."""

    G: np.ndarray
    ensemble: Ensemble = Ensemble.GAUSSIAN_IID
    snr: float = 1.0
    channel: Channel = Channel.OUTPUT
    sigma: Optional[np.ndarray] = None
    _chol: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        G = np.asfortranarray(np.array(self.G, dtype=float))
        if G.ndim != 2:
            raise ValueError("G must be two-dimensional")
        object.__setattr__(self, "G", _readonly(G))
        object.__setattr__(self, "ensemble", Ensemble(self.ensemble))
        object.__setattr__(self, "channel", Channel(self.channel))
        if not self.snr > 0:
            raise ValueError("snr must be positive (use inf for noiseless)")
        if self.ensemble is Ensemble.DETERMINISTIC_NORMALIZED:
            if not np.allclose(np.linalg.norm(G, axis=0), 1.0, rtol=0, atol=1e-12):
                raise ValueError("DeterministicNormalized requires unit-norm columns")
        if self.sigma is not None:
            dim = self.noise_dim
            S = np.array(self.sigma, dtype=float)
            if S.shape != (dim, dim):
                raise ValueError(f"sigma must be {dim}x{dim} for the {self.channel.value} channel")
            if not np.allclose(S, S.T, atol=1e-12):
                raise ValueError("sigma must be symmetric")
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                raise ValueError("sigma must be positive definite") from None
            object.__setattr__(self, "sigma", _readonly(S))
            object.__setattr__(self, "_chol", _readonly(L))

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def noise_dim(self) -> int:
        return self.m if self.channel is Channel.OUTPUT else self.n

    @property
    def ident(self) -> str:
        """Short content hash identifying the instance."""
        h = hashlib.sha256(self.G.tobytes(order="F"))
        h.update(f"{self.ensemble.value}|{self.snr!r}|{self.channel.value}".encode())
        if self.sigma is not None:
            h.update(self.sigma.tobytes())
        return h.hexdigest()[:16]

    def draw_noise(self, noise_seed) -> np.ndarray:
        """Unscaled noise vector N with covariance sigma."""
        w = make_rng(noise_seed).standard_normal(self.noise_dim)
        return w if self._chol is None else self._chol @ w


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    instance_ref: str
    noise_seed: int

    def __post_init__(self):
        object.__setattr__(self, "y", _readonly(np.array(self.y, dtype=float)))


def _as_values(x) -> np.ndarray:
    return x.values if isinstance(x, SparseSignal) else np.asarray(x, dtype=float)


def apply_channel(G: np.ndarray, x: np.ndarray, noise: np.ndarray, snr: float,
                  channel=Channel.OUTPUT) -> np.ndarray:
    """Combine a signal and an unscaled noise draw through a channel."""
    scale = 0.0 if math.isinf(snr) else 1.0 / math.sqrt(snr)
    if Channel(channel) is Channel.OUTPUT:
        return G @ x + scale * noise
    return G @ (x + scale * noise)


def measure(x, inst: SensingInstance, noise_seed: int) -> Measurement:
    """Observe ``x`` through ``inst``; ``snr = inf`` gives y = Gx exactly."""
    v = _as_values(x)
    if v.shape != (inst.n,):
        raise ValueError(f"signal has length {v.size}, instance expects {inst.n}")
    y = apply_channel(inst.G, v, inst.draw_noise(noise_seed), inst.snr, inst.channel)
    return Measurement(y, inst.ident, int(noise_seed))


def distortion(x, xhat, metric=Metric.SUPPORT_FRAC, k: Optional[int] = None) -> float:
    """Distortion between a true signal ``x`` and an estimate ``xhat``.

    Parameters
    ----------
    x, xhat : SparseSignal or array_like
    metric : Metric or str
        ``SupportFrac`` counts support mismatches divided by the true
        sparsity ``k``; ``HammingPerN`` divides the same count by ``n``;
        ``MseL2`` is ``||xhat - x||^2 / n``.
    k : int, optional
        Normalizer for ``SupportFrac``; defaults to the support size of
        ``x``.
    """
    a, b = _as_values(x), _as_values(xhat)
    if a.shape != b.shape:
        raise ValueError("signals must have equal length")
    metric = Metric(metric)
    if metric is Metric.MSE_L2:
        return float(np.sum((b - a) ** 2) / a.size)
    mismatches = int(np.count_nonzero((a != 0) != (b != 0)))
    if metric is Metric.HAMMING_PER_N:
        return mismatches / a.size
    k = int(np.count_nonzero(a)) if k is None else k
    if k == 0:
        raise ValueError("SupportFrac is undefined for a zero-sparsity truth")
    return mismatches / k


def support_mismatch(a: Sequence[int], b: Sequence[int]) -> int:
    """Size of the symmetric difference of two index sets."""
    return len(set(a) ^ set(b))
