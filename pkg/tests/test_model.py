import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cs_limits import (BayesPrior, Channel, Ensemble, SensingInstance, SignalClass, SignalKind,
                       SparseSignal, apply_channel, distortion, measure, sample_matrix, sample_signal)
from cs_limits.model import support_mismatch
from cs_limits.rng import make_rng, spawn_streams, trial_seed


# -- rng ---------------------------------------------------------------------

def test_trial_seed_is_stable_and_distinct():
    assert trial_seed(1, 2, 3) == trial_seed(1, 2, 3)
    assert len({trial_seed(1, 2, t) for t in range(1000)}) == 1000


def test_make_rng_uses_philox_and_reproduces():
    a, b = make_rng(5), make_rng(5)
    assert type(a.bit_generator).__name__ == "Philox"
    assert np.array_equal(a.random(4), b.random(4))


def test_spawned_streams_are_independent():
    s = spawn_streams(9, 3)
    draws = [g.random(3) for g in s]
    assert not np.array_equal(draws[0], draws[1])


# -- types -------------------------------------------------------------------

def test_sparse_signal_rejects_off_support_values():
    with pytest.raises(ValueError):
        SparseSignal(np.array([1.0, 2.0]), (0,))


def test_sparse_signal_rejects_small_amplitudes():
    with pytest.raises(ValueError):
        SparseSignal(np.array([0.1, 0.0]), (0,), beta=1.0)


def test_sparse_signal_is_immutable():
    s = SparseSignal.from_values([0, 1.0, 0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0
    assert s.support == (1,) and s.k == 1 and s.n == 3


@pytest.mark.parametrize("kwargs", [dict(n=0, k=0), dict(n=3, k=4), dict(n=3, k=1, beta=-1),
                                    dict(n=3, k=1, beta=0, kind="BinaryBeta")])
def test_signal_class_validation(kwargs):
    with pytest.raises(ValueError):
        SignalClass(**kwargs)


def test_signal_class_allows_zero_sparsity():
    x = sample_signal(SignalClass(5, 0), 1)
    assert x.k == 0


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_prior_alpha_range(alpha):
    with pytest.raises(ValueError):
        BayesPrior.binary_delta(alpha)


def test_prior_alpha_one_is_allowed():
    x = sample_signal(BayesPrior.binary_delta(1.0, 2.0), 0, n=6)
    assert np.all(x.values == 2.0)


def test_sensing_instance_checks_unit_columns():
    G = sample_matrix(5, 4, Ensemble.GAUSSIAN_IID, 0)
    with pytest.raises(ValueError):
        SensingInstance(G, ensemble=Ensemble.DETERMINISTIC_NORMALIZED)
    Gn = sample_matrix(5, 4, Ensemble.DETERMINISTIC_NORMALIZED, 0)
    inst = SensingInstance(Gn, ensemble=Ensemble.DETERMINISTIC_NORMALIZED)
    assert np.allclose(np.linalg.norm(inst.G, axis=0), 1.0)
    assert inst.G.flags.f_contiguous and not inst.G.flags.writeable


def test_sensing_instance_sigma_checks():
    G = sample_matrix(3, 4, rng_seed=0)
    with pytest.raises(ValueError, match="positive definite"):
        SensingInstance(G, sigma=np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        SensingInstance(G, sigma=np.eye(4))
    inst = SensingInstance(G, channel=Channel.INPUT, sigma=np.eye(4))
    assert inst.noise_dim == 4


def test_sensing_instance_ident_depends_on_content():
    G = sample_matrix(3, 4, rng_seed=0)
    assert SensingInstance(G).ident == SensingInstance(G.copy()).ident
    assert SensingInstance(G).ident != SensingInstance(G, snr=2.0).ident


# -- sampling ----------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 30), data=st.data(), kind=st.sampled_from(list(SignalKind)),
       beta=st.floats(0.1, 5), seed=st.integers(0, 2 ** 32))
def test_class_draws_satisfy_invariants(n, data, kind, beta, seed):
    k = data.draw(st.integers(0, n))
    x = sample_signal(SignalClass(n, k, beta, kind), seed)
    if kind is SignalKind.AT_MOST_K:
        assert x.k <= k
    else:
        assert x.k == k
    assert np.all(np.abs(x.values[list(x.support)]) >= beta * (1 - 1e-12))
    if kind is SignalKind.BINARY_BETA:
        assert np.all(x.values[list(x.support)] == beta)


def test_ten_thousand_class_draws_satisfy_invariants():
    rng = make_rng(0)
    for kind in SignalKind:
        cls = SignalClass(12, 3, 0.7, kind)
        for _ in range(10_000 // 3):
            x = sample_signal(cls, rng)
            assert x.k <= 3 and np.all(np.abs(x.values[list(x.support)]) >= 0.7)


def test_at_most_k_size_follows_subset_counts():
    cls = SignalClass(6, 2, kind=SignalKind.AT_MOST_K)
    rng = make_rng(3)
    sizes = np.bincount([sample_signal(cls, rng).k for _ in range(6000)], minlength=3)
    expected = np.array([1, 6, 15]) / 22 * 6000
    assert stats.chisquare(sizes, expected).pvalue > 1e-3


def test_amplitude_override():
    x = sample_signal(SignalClass(5, 2, 1.0), 0, amplitudes=lambda rng, s: np.full(s, 3.0))
    assert np.all(x.values[list(x.support)] == 3.0)


def test_binary_delta_support_fraction_concentrates():
    prior = BayesPrior.binary_delta(0.1)
    rng = make_rng(11)
    fracs = np.array([sample_signal(prior, rng, n=10_000).k / 10_000 for _ in range(1000)])
    assert np.mean((fracs >= 0.09) & (fracs <= 0.11)) >= 0.99


def test_binary_delta_single_draw_fraction():
    prior = BayesPrior.binary_delta(0.1)
    counts = np.array([sample_signal(prior, s, n=10_000).k for s in range(100)])
    # exact chance that one draw leaves [900, 1100], then a binomial check on 100 draws
    p_out = stats.binom.cdf(899, 10_000, 0.1) + stats.binom.sf(1100, 10_000, 0.1)
    outside = int(np.sum(np.abs(counts - 1000) > 100))
    assert outside <= stats.binom.ppf(0.999, 100, p_out)


def test_sparse_gaussian_prior_variance():
    x = sample_signal(BayesPrior.sparse_gaussian(0.3, 4.0), 2, n=200_000)
    assert abs(np.var(x.values) - 0.3 * 4.0) < 0.05


def test_prior_needs_length():
    with pytest.raises(ValueError):
        sample_signal(BayesPrior.binary_delta(0.1), 0)


def test_gaussian_column_norm_mean():
    norms = [np.sum(sample_matrix(100, 1, rng_seed=s) ** 2) for s in range(10_000)]
    assert abs(np.mean(norms) - 1.0) < 0.02


# -- channels ----------------------------------------------------------------

def test_zero_signal_output_noise_variance():
    G = sample_matrix(10_000, 3, rng_seed=0)
    inst = SensingInstance(G, snr=4.0)
    y = measure(np.zeros(3), inst, 17).y
    assert abs(np.var(y) - 0.25) < 0.01


def test_infinite_snr_is_noiseless():
    G = sample_matrix(4, 6, rng_seed=1)
    x = sample_signal(SignalClass(6, 2), 0)
    for ch in Channel:
        y = measure(x, SensingInstance(G, snr=math.inf, channel=ch), 3).y
        assert np.allclose(y, G @ x.values)


def test_input_channel_noise_passes_through_G():
    G = sample_matrix(3, 5, rng_seed=2)
    noise = np.arange(5.0)
    y = apply_channel(G, np.zeros(5), noise, 4.0, Channel.INPUT)
    assert np.allclose(y, G @ noise / 2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), noise_seed=st.integers(0, 10 ** 6))
def test_output_measurement_is_affine(seed, noise_seed):
    G = sample_matrix(4, 7, rng_seed=seed)
    inst = SensingInstance(G, snr=2.0)
    x1 = sample_signal(SignalClass(7, 2), seed + 1).values
    x2 = sample_signal(SignalClass(7, 3), seed + 2).values
    diff = measure(x1 + x2, inst, noise_seed).y - measure(x2, inst, noise_seed).y
    assert np.allclose(diff, G @ x1)


# -- distortion --------------------------------------------------------------

def test_distortion_hand_example():
    beta = 1.7
    x, xh = np.array([beta, 0, 0, 0]), np.array([0, beta, 0, 0])
    assert distortion(x, xh, "SupportFrac") == 2
    assert distortion(x, xh, "HammingPerN") == 0.5
    assert distortion(x, xh, "MseL2") == pytest.approx(beta ** 2 / 2)


def test_disjoint_supports_give_two():
    assert distortion([1, 1, 0, 0], [0, 0, 1, 1], "SupportFrac") == 2


def test_support_frac_undefined_for_empty_truth():
    with pytest.raises(ValueError):
        distortion(np.zeros(3), np.ones(3), "SupportFrac")


def test_support_mismatch():
    assert support_mismatch((0, 1), (1, 2)) == 2


vec = st.lists(st.sampled_from([0.0, 1.0, -2.0, 0.5]), min_size=5, max_size=5)


@settings(max_examples=100, deadline=None)
@given(a=vec, b=vec, c=vec)
def test_distortion_properties(a, b, c):
    a, b, c = map(np.array, (a, b, c))
    for metric in ("SupportFrac", "HammingPerN", "MseL2"):
        if metric == "SupportFrac" and not a.any():
            continue
        assert distortion(a, a, metric) == 0
    assert distortion(a, b, "HammingPerN") == distortion(b, a, "HammingPerN")
    if np.count_nonzero(a) == np.count_nonzero(b) > 0:
        assert distortion(a, b, "SupportFrac") == distortion(b, a, "SupportFrac")
    assert distortion(a, c, "MseL2") <= 2 * (distortion(a, b, "MseL2") + distortion(b, c, "MseL2")) + 1e-12
