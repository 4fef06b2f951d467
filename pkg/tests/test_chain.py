import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from conftest import random_model, random_spd
from qtldp.chain import (
    DriftModel,
    QuadraticForm,
    Trajectory,
    entropy_production_form,
    evaluate_w,
    form_blocks,
    lln_mean,
    sample_w,
    scalar_square_form,
    sigma_lower_bound,
    simulate,
    stationary_covariance,
    tilted_blocks,
    zero_form,
)
from qtldp.errors import DomainError
from qtldp.hqt import assemble_q, symbol_at
from qtldp.matcore import rayleigh_min

ROT = np.array([[0.0, 0.5], [-0.5, 0.0]])


def test_model_validation():
    with pytest.raises(DomainError):
        DriftModel([[1.0]])
    with pytest.raises(DomainError):
        DriftModel([[0.5]], [[-1.0]])
    with pytest.raises(ValueError):
        DriftModel([[0.5]], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        DriftModel(np.eye(2) * 0.5, [[1.0, 0.2], [0.0, 1.0]])


def test_form_validation():
    with pytest.raises(ValueError):
        QuadraticForm([[1.0, 1.0], [0.0, 1.0]], np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        QuadraticForm(np.eye(2), np.eye(2), np.eye(3), np.eye(2))


def test_stationary_covariance_examples():
    assert np.allclose(stationary_covariance(np.zeros((3, 3))), np.eye(3))
    assert stationary_covariance([[0.5]])[0, 0] == pytest.approx(4 / 3, abs=1e-14)
    assert np.allclose(stationary_covariance(ROT), 4 / 3 * np.eye(2), atol=1e-14)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_stationary_covariance_matches_lyapunov_solver(seed, d):
    model = random_model(np.random.default_rng(seed), d, stationary=True)
    oracle = scipy.linalg.solve_discrete_lyapunov(model.s, np.eye(d))
    assert np.allclose(model.sigma_s, oracle, rtol=1e-10, atol=1e-12)
    assert model.is_stationary


def test_stationary_covariance_near_unit_radius():
    sigma = stationary_covariance([[0.999]])
    assert sigma[0, 0] == pytest.approx(1 / (1 - 0.999**2), rel=1e-10)


def test_entropy_form_examples():
    rev = DriftModel([[0.5]])
    form = entropy_production_form(rev)
    assert form.is_zero or np.allclose([form.l_mat, form.u_mat, form.r_mat, form.v_mat], 0, atol=1e-14)
    form = entropy_production_form(DriftModel(ROT))
    assert np.allclose(form.l_mat, 0, atol=1e-14) and np.allclose(form.r_mat, 0, atol=1e-14)
    assert np.allclose(form.v_mat, [[0, 1], [-1, 0]])


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_entropy_form_r_is_minus_l(seed, d, stationary):
    model = random_model(np.random.default_rng(seed), d, stationary)
    form = entropy_production_form(model)
    assert np.array_equal(form.r_mat, -form.l_mat)
    assert not np.any(form.u_mat)


def test_lln_mean_examples():
    assert lln_mean(entropy_production_form(DriftModel([[0.7]], [[2.0]])), DriftModel([[0.7]], [[2.0]])) == 0.0
    assert lln_mean(QuadraticForm(np.eye(3), 2 * np.eye(3), np.eye(3), np.zeros((3, 3))),
                    DriftModel(np.zeros((3, 3)))) == pytest.approx(3.0)


def test_lln_mean_monte_carlo_rotation():
    model = DriftModel([[0.3, 0.4], [-0.4, 0.3]])
    form = entropy_production_form(model)
    n = 10_000
    w = sample_w(model, form, n, 400, seed=3) / n
    se = w.std(ddof=1) / np.sqrt(len(w))
    assert abs(w.mean() - lln_mean(form, model)) < 3 * se


def test_simulate_iid_covariance():
    model = DriftModel(np.zeros((2, 2)), np.eye(2))
    # one long path of an i.i.d. chain gives 1e5 independent standard normals
    traj = simulate(model, 100_000, seed=11)
    cov = np.cov(traj.points.T)
    assert np.all(np.abs(cov - np.eye(2)) < 3 / np.sqrt(1e5))


def test_simulate_deterministic():
    model = DriftModel(ROT)
    a, b = simulate(model, 50, seed=5), simulate(model, 50, seed=5)
    assert np.array_equal(a.points, b.points) and a.seed == 5
    assert not np.array_equal(a.points, simulate(model, 50, seed=6).points)


def test_simulate_ar1_autocorrelation():
    traj = simulate(DriftModel([[0.9]]), 1_000_000, seed=2)
    x = traj.points[:, 0]
    rho = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(rho - 0.9) < 0.01


def test_evaluate_w_examples():
    traj = Trajectory(np.array([[1.0], [2.0], [3.0]]))
    assert evaluate_w(scalar_square_form(), traj) == pytest.approx(14.0)
    assert evaluate_w(zero_form(1), traj) == 0.0
    rev = DriftModel([[0.4]])
    assert evaluate_w(entropy_production_form(rev), simulate(rev, 30, 1)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        evaluate_w(scalar_square_form(), np.array([[1.0]]))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(2, 40))
def test_evaluate_w_matches_dense_quadratic_form(seed, d, n):
    rng = np.random.default_rng(seed)
    model = random_model(rng, d, stationary=False)
    form = QuadraticForm(random_spd(rng, d), random_spd(rng, d), random_spd(rng, d),
                         rng.standard_normal((d, d)))
    x = simulate(model, n, seed).points
    if n >= 3:
        m = assemble_q(form_blocks(form), n - 2).real
        assert evaluate_w(form, x) == pytest.approx(0.5 * x.ravel() @ m @ x.ravel(), rel=1e-10, abs=1e-10)


def test_sample_w_matches_evaluate_w_and_threads():
    model = DriftModel(ROT, np.eye(2))
    form = entropy_production_form(model)
    a = sample_w(model, form, 20, 1000, seed=9, batch_size=300)
    b = sample_w(model, form, 20, 1000, seed=9, batch_size=300, threads=3)
    assert np.array_equal(a, b)
    # the batch streams are the same generator draws as simulate() on a 1-path batch
    one = sample_w(model, form, 20, 1, seed=4)
    rng = np.random.default_rng(np.random.SeedSequence(4).spawn(1)[0])
    x = [rng.standard_normal((1, 2)) @ model.sigma_o_chol.T]
    for _ in range(19):
        x.append(x[-1] @ model.s.T + rng.standard_normal((1, 2)))
    assert one[0] == pytest.approx(evaluate_w(form, np.vstack(x)), rel=1e-12)


def _log_density(model, x):
    """Forward path log-density of the chain."""
    out = multivariate_normal(np.zeros(model.dim), model.sigma_o).logpdf(x[0])
    for k in range(1, len(x)):
        out += multivariate_normal(model.s @ x[k - 1], np.eye(model.dim)).logpdf(x[k])
    return out


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans(), st.integers(2, 25))
def test_entropy_production_is_log_density_ratio(seed, d, stationary, n):
    model = random_model(np.random.default_rng(seed), d, stationary)
    x = simulate(model, n, seed).points
    ratio = _log_density(model, x) - _log_density(model, x[::-1])
    w = evaluate_w(entropy_production_form(model), x)
    assert w / n == pytest.approx(ratio / n, abs=1e-9)


def test_tilted_blocks_examples():
    model = DriftModel([[0.5]], [[2.0]])
    b = tilted_blocks(model, scalar_square_form(), 0.0)
    assert np.allclose([b.a, b.d, b.b, b.e], [[[0.75]], [[1.25]], [[1.0]], [[-0.5]]])
    b = tilted_blocks(DriftModel(np.zeros((2, 2)), np.eye(2)), zero_form(2), 3.7)
    assert np.allclose(b.a, np.eye(2)) and np.allclose(b.d, np.eye(2)) and np.allclose(b.e, 0)
    s, lam = 0.3, 0.07
    b = tilted_blocks(DriftModel([[s]]), scalar_square_form(), lam)
    assert b.d[0, 0] == pytest.approx(1 + s * s - 2 * lam) and b.e[0, 0] == -s


def test_lambda_zero_blocks_give_inverse_covariance():
    model = DriftModel(ROT * 1.2, [[2.0, 0.3], [0.3, 1.0]])
    n = 4
    q = assemble_q(tilted_blocks(model, zero_form(2), 0.0), n)
    # covariance of the stacked path, built from the recursion
    steps = n + 2
    cov = np.zeros((2 * steps, 2 * steps))
    powers = [np.linalg.matrix_power(model.s, k) for k in range(steps)]
    marg = [model.sigma_o]
    for _ in range(steps - 1):
        marg.append(model.s @ marg[-1] @ model.s.T + np.eye(2))
    for i in range(steps):
        for j in range(i + 1):
            block = powers[i - j] @ marg[j]
            cov[2 * i:2 * i + 2, 2 * j:2 * j + 2] = block
            cov[2 * j:2 * j + 2, 2 * i:2 * i + 2] = block.T
    assert np.allclose(q @ cov, np.eye(2 * steps), atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans(), st.floats(-2, 2))
def test_symbol_matches_factorized_form(seed, d, stationary, lam):
    rng = np.random.default_rng(seed)
    model = random_model(rng, d, stationary)
    form = entropy_production_form(model) if seed % 2 else QuadraticForm(
        random_spd(rng, d), random_spd(rng, d), random_spd(rng, d), rng.standard_normal((d, d)))
    blocks = tilted_blocks(model, form, lam)
    for theta in rng.uniform(0, 2 * np.pi, 5):
        z = np.exp(-1j * theta)
        eye = np.eye(d)
        expected = (eye - model.s.T * z.conjugate()) @ (eye - model.s * z) - lam * (
            form.u_mat + form.v_mat * z + form.v_mat.T * z.conjugate())
        assert np.max(np.abs(symbol_at(blocks, theta) - expected)) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans(), st.integers(1, 30))
def test_inverse_covariance_lower_bound(seed, d, stationary, n):
    model = random_model(np.random.default_rng(seed), d, stationary)
    q = assemble_q(tilted_blocks(model, zero_form(d), 0.0), n)
    assert rayleigh_min(q) >= sigma_lower_bound(model) - 1e-12
