"""Stable Gauss-Markov chains ``X_{n+1} = S X_n + G_n`` and quadratic functionals.

A quadratic functional of a path ``X_1, ..., X_N`` is

    W_N = <X_1, L X_1>/2 + sum_{n=2}^{N-1} <X_n, U X_n>/2 + <X_N, R X_N>/2
          + sum_{n=2}^{N} <X_n, V X_{n-1}>

with ``L``, ``U``, ``R`` symmetric. Matrices at this layer are real.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError
from .hqt import HqtBlocks
from .matcore import operator_norm, rayleigh_min, spectral_radius

__all__ = [
    "DriftModel",
    "QuadraticForm",
    "Trajectory",
    "stationary_covariance",
    "entropy_production_form",
    "scalar_square_form",
    "zero_form",
    "lln_mean",
    "simulate",
    "evaluate_w",
    "sample_w",
    "iter_w_batches",
    "tilted_blocks",
    "form_blocks",
    "sigma_lower_bound",
]


ROUNDOFF = 1e-12


def _real_square(m, name):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _symmetric(m, name, tol=1e-12):
    m = _real_square(m, name)
    if np.max(np.abs(m - m.T), initial=0.0) > tol * (1.0 + np.max(np.abs(m))):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class DriftModel:
    """Drift ``S`` (spectral radius < 1) and initial covariance ``sigma_o``.

    ``sigma_o=None`` starts the chain in its stationary law.
    """

    s: np.ndarray
    sigma_o: np.ndarray = None

    def __post_init__(self):
        s = _real_square(self.s, "S")
        object.__setattr__(self, "s", s)
        rho = spectral_radius(s)
        if not rho < 1.0:
            raise DomainError(f"drift matrix is unstable: spectral radius {rho:.6g} >= 1")
        if self.sigma_o is None:
            object.__setattr__(self, "sigma_o", stationary_covariance(s))
        sigma_o = _symmetric(self.sigma_o, "sigma_o")
        if sigma_o.shape != s.shape:
            raise ValueError("S and sigma_o must have the same shape")
        if not rayleigh_min(sigma_o) > 0:
            raise DomainError("sigma_o must be positive-definite")
        object.__setattr__(self, "sigma_o", sigma_o)

    @property
    def dim(self):
        return self.s.shape[0]

    @cached_property
    def sigma_o_chol(self):
        return np.linalg.cholesky(self.sigma_o)

    @cached_property
    def sigma_o_inv(self):
        return scipy.linalg.cho_solve((self.sigma_o_chol, True), np.eye(self.dim))

    @cached_property
    def sigma_s(self):
        return stationary_covariance(self.s)

    @property
    def is_stationary(self):
        return np.allclose(self.sigma_o, self.sigma_s, rtol=0, atol=1e-10)


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    l_mat: np.ndarray
    u_mat: np.ndarray
    r_mat: np.ndarray
    v_mat: np.ndarray

    def __post_init__(self):
        for name in ("l_mat", "u_mat", "r_mat"):
            object.__setattr__(self, name, _symmetric(getattr(self, name), name[0].upper()))
        object.__setattr__(self, "v_mat", _real_square(self.v_mat, "V"))
        if len({m.shape for m in (self.l_mat, self.u_mat, self.r_mat, self.v_mat)}) != 1:
            raise ValueError("L, U, R, V must share one shape")

    @property
    def dim(self):
        return self.v_mat.shape[0]

    @property
    def is_zero(self):
        return not any(np.any(m) for m in (self.l_mat, self.u_mat, self.r_mat, self.v_mat))


@dataclass(frozen=True, eq=False)
class Trajectory:
    points: np.ndarray
    seed: int = None

    @property
    def n(self):
        return self.points.shape[0]


def stationary_covariance(s, tol=1e-14, max_doublings=200):
    """Solve ``Sigma = S Sigma S^T + I`` by Smith doubling."""
    s = _real_square(s, "S")
    sigma = np.eye(s.shape[0])
    m = s.copy()
    for _ in range(max_doublings):
        step = m @ sigma @ m.T
        sigma = sigma + step
        m = m @ m
        if np.max(np.abs(step)) < tol * np.max(np.abs(sigma)):
            return 0.5 * (sigma + sigma.T)
    raise ConvergenceError("Smith doubling did not converge; is the drift stable?")


def entropy_production_form(model):
    """The form whose ``W_N`` is ``N`` times the entropy production rate."""
    eye = np.eye(model.dim)
    sts = model.s.T @ model.s
    l_mat = eye - model.sigma_o_inv - sts
    # cancellation leaves roundoff where the model is stationary; keep reversibility exact
    scale = 1.0 + np.max(np.abs(model.sigma_o_inv)) + np.max(np.abs(sts))
    l_mat[np.abs(l_mat) < ROUNDOFF * scale] = 0.0
    return QuadraticForm(l_mat, np.zeros_like(eye), -l_mat, model.s - model.s.T)


def scalar_square_form(dim=1):
    """``W_N = sum_n |X_n|^2``."""
    two = 2.0 * np.eye(dim)
    return QuadraticForm(two, two, two, np.zeros((dim, dim)))


def zero_form(dim):
    z = np.zeros((dim, dim))
    return QuadraticForm(z, z, z, z)


def lln_mean(form, model):
    """Almost-sure limit of ``W_N / N``."""
    s, v = model.s, form.v_mat
    return 0.5 * float(np.trace((form.u_mat + v.T @ s + s.T @ v) @ model.sigma_s))


def _stream(model, n, rng, count):
    """Yield ``X_1, ..., X_n`` for ``count`` independent paths, shape ``(count, d)``."""
    x = rng.standard_normal((count, model.dim)) @ model.sigma_o_chol.T
    yield x
    for _ in range(n - 1):
        x = x @ model.s.T + rng.standard_normal((count, model.dim))
        yield x


def simulate(model, n, seed):
    """One path of length ``n``; deterministic given ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return Trajectory(np.array(list(_stream(model, n, rng, 1)))[:, 0, :], seed)


def _quad(x, m):
    return np.einsum("ki,ij,kj->k", x, m, x)


def evaluate_w(form, traj):
    """``W_N`` along a trajectory (``points`` may also be a plain ``(N, d)`` array)."""
    x = np.asarray(getattr(traj, "points", traj), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("W_N needs a trajectory of length >= 2")
    w = 0.5 * _quad(x[:1], form.l_mat)[0] + 0.5 * _quad(x[-1:], form.r_mat)[0]
    w += 0.5 * np.sum(_quad(x[1:-1], form.u_mat))
    w += np.sum(np.einsum("ki,ij,kj->k", x[1:], form.v_mat, x[:-1]))
    return float(w)


def _w_batch(model, form, n, seed_seq, count):
    rng = np.random.default_rng(seed_seq)
    w = np.zeros(count)
    prev = None
    for k, x in enumerate(_stream(model, n, rng, count), start=1):
        if k == 1:
            w += 0.5 * _quad(x, form.l_mat)
        elif k == n:
            w += 0.5 * _quad(x, form.r_mat)
        else:
            w += 0.5 * _quad(x, form.u_mat)
        if prev is not None:
            w += np.einsum("ki,ij,kj->k", x, form.v_mat, prev)
        prev = x
    return w


def iter_w_batches(model, form, n, samples, seed, batch_size=50_000, threads=1):
    """Yield arrays of ``W_n`` for ``samples`` independent paths, batch by batch.

    Batch ``b`` draws from ``SeedSequence(seed).spawn(...)[b]``, so results
    depend on ``(seed, batch_size)`` but not on ``threads``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    sizes = [min(batch_size, samples - start) for start in range(0, samples, batch_size)]
    jobs = list(zip(np.random.SeedSequence(seed).spawn(len(sizes)), sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            yield from pool.map(lambda job: _w_batch(model, form, n, *job), jobs)
    else:
        for job in jobs:
            yield _w_batch(model, form, n, *job)


def sample_w(model, form, n, samples, seed, batch_size=50_000, threads=1):
    """``W_n`` for ``samples`` independent paths (see :func:`iter_w_batches`)."""
    return np.concatenate(list(iter_w_batches(model, form, n, samples, seed, batch_size, threads)))


def form_blocks(form):
    """HQT blocks of the coefficient matrix ``M_n`` of ``2 W``."""
    return HqtBlocks(form.l_mat, form.u_mat, form.r_mat, form.v_mat)


def tilted_blocks(model, form, lam):
    """Blocks of ``Sigma_n^{-1} - lam M_n``."""
    s = model.s
    sts = s.T @ s
    eye = np.eye(model.dim)
    return HqtBlocks(
        a=model.sigma_o_inv + sts - lam * form.l_mat,
        d=eye + sts - lam * form.u_mat,
        b=eye - lam * form.r_mat,
        e=-s - lam * form.v_mat,
    )


def sigma_lower_bound(model, horizon=10_000):
    """Explicit uniform lower bound on the smallest eigenvalue of ``Sigma_n^{-1}``.

    Uses ``||S^k|| <= c q^k`` with ``q = (1 + rho(S)) / 2`` and ``c`` the
    maximum of ``||S^k|| / q^k`` over ``k < horizon``.
    """
    q = 0.5 * (1.0 + spectral_radius(model.s))
    c, p = 1.0, np.eye(model.dim)
    for k in range(1, horizon):
        p = p @ model.s
        ratio = operator_norm(p) / q**k
        c = max(c, ratio)
        if ratio < 1e-3 * c:
            break
    return min(1.0, rayleigh_min(model.sigma_o_inv)) * (1.0 - q) ** 2 / c**2
