import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import oracles as O
from cs_limits import (BayesPrior, MLSupportDecoder, RDCodebookQuantizer, SignalClass, build_codebook,
                       greedy_cover_codebook, ml_support_decode, rd_min_distance_decode, sample_matrix,
                       sample_signal, verify_event_bounds, verify_superposition_containment)
from cs_limits.decoders import constrained_residuals, exact_hamming_coverage
from cs_limits.exceptions import BudgetExceededError, CoverageWarning
from cs_limits.model import Ensemble
from cs_limits.rng import make_rng


def _instance(m, n, k, seed, snr=4.0):
    G = sample_matrix(m, n, rng_seed=seed)
    x = sample_signal(SignalClass(n, k), seed + 1)
    y = G @ x.values + make_rng(seed + 2).standard_normal(m) / math.sqrt(snr)
    return G, x, y


# -- exhaustive ML -----------------------------------------------------------

def test_single_column_case_matches_brute_force():
    G, _, y = _instance(3, 6, 1, 123)
    est = ml_support_decode(y, G, 1, exactly_k=True)
    j, res = O.brute_single_column_ls(y, G)
    assert est.support == (j,)
    assert est.residual_sq == pytest.approx(res[j], rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(3, 8), k=st.integers(1, 3), exactly=st.booleans())
def test_decoder_matches_enumeration(seed, n, k, exactly):
    k = min(k, n - 1)
    m = 2 * k + 1
    G, _, y = _instance(m, n, k, seed)
    est = ml_support_decode(y, G, k, exactly_k=exactly)
    _, best = O.brute_ls_all_supports(y, G, k, exactly)
    assert est.residual_sq == pytest.approx(best, rel=1e-8, abs=1e-10)
    if est.support:
        r = y - G[:, list(est.support)] @ est.coefficients
    else:
        r = y
    assert float(r @ r) == pytest.approx(est.residual_sq, rel=1e-9, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_residual_nonincreasing_in_k(seed):
    G, _, y = _instance(9, 7, 2, seed)
    res = [ml_support_decode(y, G, k).residual_sq for k in range(5)]
    assert all(a >= b - 1e-10 for a, b in zip(res, res[1:]))


def test_ties_break_toward_first_support():
    g = sample_matrix(5, 1, rng_seed=0)[:, 0]
    G = np.column_stack([g, g, sample_matrix(5, 1, rng_seed=1)[:, 0]])
    est = ml_support_decode(2 * g, G, 1, exactly_k=True)
    assert est.tie and est.support == (0,)


def test_noiseless_recovery():
    G = sample_matrix(7, 10, rng_seed=4)
    x = sample_signal(SignalClass(10, 2), 9)
    assert ml_support_decode(G @ x.values, G, 2, exactly_k=True).support == x.support


def test_budget_and_underdetermined_warning():
    G = sample_matrix(3, 30, rng_seed=0)
    with pytest.raises(BudgetExceededError):
        ml_support_decode(np.ones(3), G, 5, budget=100)
    with pytest.warns(RuntimeWarning):
        ml_support_decode(np.ones(3), G, 2)


def test_shape_check():
    with pytest.raises(ValueError):
        ml_support_decode(np.ones(4), sample_matrix(3, 5, rng_seed=0), 1)


def test_constraint_repair_never_beats_unconstrained():
    G, _, y = _instance(7, 8, 2, 5, snr=0.5)
    free = ml_support_decode(y, G, 2, exactly_k=True)
    con = ml_support_decode(y, G, 2, constraint=1.0, exactly_k=True)
    assert con.residual_sq >= free.residual_sq - 1e-12


def test_estimator_api():
    G, x, y = _instance(7, 8, 2, 11, snr=1e6)
    dec = MLSupportDecoder(k=2, exactly_k=True)
    with pytest.raises(NotFittedError):
        dec.predict(y[None, :])
    dec.fit(G)
    Xh = dec.predict(np.vstack([y, y]))
    assert Xh.shape == (2, 8)
    assert dec.predict_support(y[None, :])[0] == x.support
    assert dec.score(y[None, :], x.values[None, :]) == 1.0
    assert clone(dec).get_params() == dec.get_params()


# -- constrained fits --------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), s=st.integers(1, 3), half=st.floats(0.1, 2.0))
def test_constrained_residual_matches_bounded_lsq(seed, s, half):
    rng = make_rng(seed)
    A = rng.standard_normal((6, s))
    Y = rng.standard_normal((3, 6))
    got = constrained_residuals(A, range(s), Y, half)
    for i in range(3):
        assert got[i] == pytest.approx(O.constrained_ls_by_orthant(A, Y[i], half), rel=1e-6, abs=1e-9)


# -- codebooks ---------------------------------------------------------------

def test_codebook_rate_and_coverage():
    prior = BayesPrior.binary_delta(0.2)
    cb = build_codebook(prior, 10, 0.1, epsilon=0.1, rng_seed=3)
    assert cb.rate_nats <= cb.target_rate + cb.epsilon + 1e-12
    assert cb.coverage_draws >= 1000
    assert abs(cb.coverage_estimate - cb.coverage_exact) < 0.05
    assert np.array_equal(cb.points, np.unique(cb.points, axis=0))


def test_codebook_needs_enough_draws():
    with pytest.raises(ValueError):
        build_codebook(BayesPrior.binary_delta(0.2), 10, 0.1, n_coverage=100)


def test_codebook_zero_rate_is_single_point():
    # one point cannot reach 1 - eps coverage, so the warning is expected
    with pytest.warns(CoverageWarning):
        cb = build_codebook(BayesPrior.binary_delta(0.2), 10, 0.2, rng_seed=0)
    assert cb.size == 1 and not cb.points.any()


def test_codebook_warns_when_coverage_short():
    with pytest.warns(CoverageWarning):
        cb = build_codebook(BayesPrior.binary_delta(0.3), 8, 0.05, epsilon=0.0, rng_seed=0)
    assert not cb.certified


def test_exact_coverage_of_full_cube():
    cube = ((np.arange(16)[:, None] >> np.arange(4)) & 1).astype(float)
    assert exact_hamming_coverage(cube, BayesPrior.binary_delta(0.3), 4, 0.0) == pytest.approx(1.0)


def test_greedy_library_matches_oracle_and_beats_random():
    prior = BayesPrior.binary_delta(0.2)
    rand = build_codebook(prior, 10, 0.1, epsilon=0.1, rng_seed=1)
    target = rand.coverage_exact
    greedy = greedy_cover_codebook(prior, 10, 0.1, target)
    chosen, mass = O.greedy_set_cover(10, 0.2, 0.1, target)
    assert greedy.size == len(chosen)
    assert greedy.coverage_estimate >= target - 1e-12 and mass >= target - 1e-12
    assert exact_hamming_coverage(greedy.points, prior, 10, 0.1) == pytest.approx(greedy.coverage_estimate)
    assert greedy.size <= rand.size


@pytest.mark.filterwarnings("ignore::cs_limits.exceptions.CoverageWarning")
def test_rd_decoder_matches_linear_scan():
    prior = BayesPrior.binary_delta(0.25)
    cb = build_codebook(prior, 8, 0.125, rng_seed=2)
    G = sample_matrix(5, 8, rng_seed=3)
    for s in range(20):
        y = make_rng(s).standard_normal(5)
        _, i = rd_min_distance_decode(y, G, cb, return_index=True)
        assert i == O.linear_scan_codebook(y, G, cb.points)


def test_quantizer_estimator():
    q = RDCodebookQuantizer(alpha=0.25, d0=0.125, random_state=0)
    with pytest.raises(NotFittedError):
        q.transform(np.zeros((1, 8)))
    X = np.zeros((3, 8))
    Z = q.fit(X).transform(X)
    assert Z.shape == (3, 8)
    G = sample_matrix(6, 8, rng_seed=0)
    z = q.decode(G @ q.codebook_.points[0], G)
    assert np.array_equal(z, q.codebook_.points[0])


# -- containment and event bounds --------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_containment_holds(seed):
    n, k = 9, 2
    G = sample_matrix(2 * k + 1, n, rng_seed=seed)
    x = sample_signal(SignalClass(n, k), seed)
    rep = verify_superposition_containment(G, x, k, 1.0, 3000, rng_seed=seed, snr=50.0)
    assert rep.hypothesis_ok and rep.violations == 0


def test_containment_zero_draws_is_vacuous():
    G = sample_matrix(5, 6, rng_seed=0)
    rep = verify_superposition_containment(G, sample_signal(SignalClass(6, 2), 0), 2, 1.0, 0)
    assert rep.draws == 0 and "vacuous" in rep.notes


def test_atomic_frequency_below_union_bound():
    G = sample_matrix(6, 8, Ensemble.DETERMINISTIC_NORMALIZED, rng_seed=7)
    x = sample_signal(SignalClass(8, 1), 0)
    sg = O.brute_sigma_min(G, 1)
    snr = 16 / sg ** 2 * 4
    rep = verify_superposition_containment(G, x, 1, 1.0, 20_000, rng_seed=1, snr=snr)
    ub = float(2 * 8 * O.gaussian_tail(sg * math.sqrt(snr) / 4))
    assert rep.union_bound_unit == pytest.approx(min(1.0, ub), rel=1e-6)
    se = math.sqrt(max(ub * (1 - ub), 1e-12) / rep.draws)
    assert rep.atomic_freq <= ub + 3 * se


def test_event_frequencies_below_certificates():
    G = sample_matrix(8, 10, rng_seed=3)
    x = sample_signal(SignalClass(10, 2), 1)
    for snr in (1.0, 100.0, 1e4, 1e6):
        chk = verify_event_bounds(G, x, 2, 1.0, 3000, rng_seed=5, snr=snr)
        assert chk.passes()
        assert chk.e1_freq <= chk.p_e1_ub + 1e-12
