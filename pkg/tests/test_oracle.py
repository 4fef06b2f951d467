import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_model
from oracles import example1_phi, example1_phi_prime
from qtldp.chain import (
    DriftModel,
    entropy_production_form,
    lln_mean,
    scalar_square_form,
    tilted_blocks,
    zero_form,
)
from qtldp.errors import DomainError, SizeError
from qtldp.hqt import assemble_q, boundary_matrix, bulk_log_det
from qtldp.oracle import finite_cgf, mc_cgf, mc_tail, xi_extremes_curve
from qtldp.scgf import phi_prime

SQ = scalar_square_form()
EX1 = DriftModel([[0.5]], [[1.0]])


def dense_eigen_cgf(model, form, lam, n):
    """``ln E exp(lam W)`` from the eigenvalues of ``A^T M A`` (no Cholesky of the tilted matrix)."""
    q0 = assemble_q(tilted_blocks(model, form, 0.0), n).real
    m = q0 - assemble_q(tilted_blocks(model, form, 1.0), n).real
    cov = np.linalg.inv(q0)
    xi = np.linalg.eigvals(cov @ m).real
    if np.any(1 - lam * xi <= 0):
        return np.inf
    return -0.5 * np.sum(np.log(1 - lam * xi))


def test_lambda_zero_is_exactly_zero():
    for model, form in ((EX1, SQ), (DriftModel([[0.2, 0.4], [-0.3, 0.1]]), None)):
        form = form or entropy_production_form(model)
        rep = finite_cgf(model, form, 0.0, 30)
        assert rep.value == 0.0 and rep.log_mgf == 0.0 and rep.min_eig > 0


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_normalization_determinant_identity(seed, d, stationary):
    # det(Sigma_n^{-1}) det(Sigma_o) = 1
    model = random_model(np.random.default_rng(seed), d, stationary)
    q0 = assemble_q(tilted_blocks(model, zero_form(d), 0.0), 10).real
    logdet = np.linalg.slogdet(q0)[1] + np.linalg.slogdet(model.sigma_o)[1]
    assert abs(logdet) < 1e-10
    assert abs(finite_cgf(model, entropy_production_form(model), 1e-14, 10).log_mgf) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans(), st.floats(-0.4, 0.1))
def test_matches_eigenvalue_formula(seed, d, stationary, lam):
    model = random_model(np.random.default_rng(seed), d, stationary)
    form = entropy_production_form(model)
    rep = finite_cgf(model, form, lam, 12)
    expected = dense_eigen_cgf(model, form, lam, 12)
    if np.isfinite(expected):
        assert rep.log_mgf == pytest.approx(expected, rel=1e-9, abs=1e-10)
    else:
        assert rep.value == np.inf


def test_value_finite_iff_pd():
    for lam in (0.05, 0.2, 0.5):
        rep = finite_cgf(EX1, SQ, lam, 150, extremes=False)
        assert np.isfinite(rep.value) == (rep.min_eig > 0)


def test_convergence_to_closed_form():
    target = example1_phi(0.5, 0.1)
    err = [abs(finite_cgf(EX1, SQ, 0.1, n, extremes=False).value - target) for n in (100, 200, 400, 800)]
    ratios = [a / b for a, b in zip(err, err[1:])]
    assert all(1.8 < r < 2.2 for r in ratios)


def test_divergence_beyond_endpoint():
    reps = {n: finite_cgf(EX1, SQ, 0.2, n, extremes=False) for n in (1, 10, 50, 100, 200, 400)}
    threshold = min(n for n, r in reps.items() if r.value == np.inf)
    assert all(reps[n].value == np.inf for n in reps if n >= threshold)
    assert threshold <= 200


def test_size_cap():
    with pytest.raises(SizeError):
        finite_cgf(EX1, SQ, 0.0, 5000)


def test_xi_extremes_examples():
    curve = xi_extremes_curve(EX1, zero_form(1), [5, 20])
    assert all(lo == hi == 0.0 for _, lo, hi in curve)
    curve = xi_extremes_curve(EX1, SQ, [100, 200, 800])
    gaps = [abs(hi - 8.0) for _, _, hi in curve]
    assert gaps[-1] < gaps[0] and gaps[-1] < 1e-3
    rep = finite_cgf(EX1, SQ, 0.05, 100)
    assert rep.xi_max == pytest.approx(curve[0][2])


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_convex_in_lambda(seed, d):
    model = random_model(np.random.default_rng(seed), d, stationary=False)
    form = entropy_production_form(model)
    lams = np.linspace(-0.2, 0.05, 9)
    vals = np.array([finite_cgf(model, form, x, 25, extremes=False).value for x in lams])
    finite = vals[np.isfinite(vals)]
    if finite.size >= 3:
        assert np.min(np.diff(finite, 2)) >= -1e-8


@pytest.mark.parametrize("seed,d,lam", [(0, 1, -0.2), (1, 2, 0.05), (2, 2, -0.6), (3, 3, -0.3)])
def test_central_difference_approximates_slope(seed, d, lam):
    model = random_model(np.random.default_rng(3000 + seed), d, stationary=seed % 2 == 1)
    form = entropy_production_form(model)
    h = 1e-3
    up = finite_cgf(model, form, lam + h, 400, extremes=False).value
    down = finite_cgf(model, form, lam - h, 400, extremes=False).value
    assert (up - down) / (2 * h) == pytest.approx(phi_prime(model, form, lam), abs=0.02)


def test_central_difference_example1():
    h = 1e-4
    up = finite_cgf(EX1, SQ, 0.05 + h, 400, extremes=False).value
    down = finite_cgf(EX1, SQ, 0.05 - h, 400, extremes=False).value
    assert (up - down) / (2 * h) == pytest.approx(example1_phi_prime(0.5, 0.05), abs=0.02)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.floats(-0.5, 0.05), st.integers(1, 20))
def test_dense_log_det_splits_structurally(seed, d, lam, n):
    model = random_model(np.random.default_rng(seed), d, stationary=False)
    form = entropy_production_form(model)
    blocks = tilted_blocks(model, form, lam)
    rep = finite_cgf(model, form, lam, n, extremes=False)
    if not np.isfinite(rep.value):
        return
    try:
        structural = bulk_log_det(blocks, n) + np.linalg.slogdet(boundary_matrix(blocks, n))[1]
    except DomainError:
        return
    dense = -2.0 * rep.log_mgf - np.linalg.slogdet(model.sigma_o)[1]
    assert structural == pytest.approx(dense, rel=1e-6)


# Monte Carlo ------------------------------------------------------------


def test_mc_cgf_zero_tilt():
    est = mc_cgf(EX1, SQ, 0.0, 50, 500, seed=1)
    assert est.estimate == 0.0 and est.std_error == 0.0 and est.samples == 500


def test_mc_cgf_agrees_with_exact():
    est = mc_cgf(EX1, SQ, 0.05, 500, 100_000, seed=1)
    exact = finite_cgf(EX1, SQ, 0.05, 498, extremes=False).value
    assert abs(est.estimate - exact) < 3 * est.std_error
    again = mc_cgf(EX1, SQ, 0.05, 500, 100_000, seed=1)
    assert again == est


def test_mc_cgf_reversible_is_zero():
    model = DriftModel([[0.7]])
    est = mc_cgf(model, entropy_production_form(model), 0.3, 40, 200, seed=2)
    assert est.estimate == pytest.approx(0.0, abs=1e-12)


def test_mc_cgf_no_overflow():
    # exp(lam W) with lam W ~ 1e3 overflows doubles without shifting
    est = mc_cgf(EX1, SQ, 0.12, 2000, 200, seed=3)
    assert np.isfinite(est.estimate) and est.std_error >= 0


def test_mc_validation():
    with pytest.raises(ValueError):
        mc_cgf(EX1, SQ, 0.0, 10, 50, seed=0)
    with pytest.raises(ValueError):
        mc_tail(EX1, SQ, 10, 500, (0, 1), seed=0)


def test_mc_tail_everything():
    est = mc_tail(EX1, SQ, 30, 2000, (-np.inf, np.inf), seed=0)
    assert est.probability == 1.0 and est.estimate == 0.0 and est.std_error == 0.0


def test_mc_tail_zero_count_upper_bound():
    est = mc_tail(EX1, SQ, 30, 2000, (-2.0, -1.0), seed=0)
    assert est.count == 0 and est.upper_bound
    assert est.probability == pytest.approx(1 - 0.05 ** (1 / 2000))


def test_mc_tail_typical_event_rate_vanishes():
    model = DriftModel([[0.3, 0.4], [-0.4, 0.3]])
    form = entropy_production_form(model)
    m = lln_mean(form, model)
    rates = [-mc_tail(model, form, n, 4000, (m - 0.25, m + 0.25), seed=n).estimate for n in (50, 400)]
    assert rates[1] < rates[0] and rates[1] < 1e-3
