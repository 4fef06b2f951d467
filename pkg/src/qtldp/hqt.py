"""Hermitian block-tridiagonal quasi-Toeplitz (HQT) matrix sequences.

An HQT matrix ``Q_n`` of size ``(n + 2) d`` has ``A`` as first diagonal block,
``D`` on the ``n`` interior diagonal blocks, ``B`` as last diagonal block,
``E`` on the block sub-diagonal and ``E^H`` on the block super-diagonal. The
interior ``n x n`` block Toeplitz part ``T_n`` is the *bulk matrix*; its symbol
is ``F(theta) = E exp(-i theta) + D + E^H exp(i theta)``.

Integrals over ``theta`` use the periodic trapezoid rule. Passing
``n_theta=None`` selects the adaptive rule: start at :data:`DEFAULT_N_THETA`
nodes and double until two successive estimates agree to :data:`QUAD_TOL`
(relative to the size of the integral).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DomainError, SizeError
from .matcore import hermitian, operator_norm

__all__ = [
    "HqtBlocks",
    "LimitBoundary",
    "SymbolGrid",
    "symbol_at",
    "symbol_values",
    "symbol_grid",
    "symbol_infimum",
    "bulk_matrix",
    "assemble_q",
    "bulk_log_det",
    "boundary_matrix",
    "fourier_coefficient",
    "szego_log_det",
    "limit_boundary",
    "norm_bound",
    "periodic_mean",
]

DEFAULT_N_THETA = 2048
QUAD_TOL = 1e-10
MAX_N_THETA = 2**20
MAX_ROWS = 4096
COND_LIMIT = 1e12
_CHUNK = 2**16


@dataclass(frozen=True, eq=False)
class HqtBlocks:
    """Blocks ``(A, D, B, E)`` of an HQT sequence; ``A``, ``D``, ``B`` Hermitian."""

    a: np.ndarray
    d: np.ndarray
    b: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        for name in ("a", "d", "b"):
            object.__setattr__(self, name, hermitian(getattr(self, name)))
        e = np.atleast_2d(np.asarray(self.e))
        object.__setattr__(self, "e", e)
        dims = {self.a.shape, self.d.shape, self.b.shape, e.shape}
        if len(dims) != 1:
            raise ValueError(f"HQT blocks have inconsistent shapes {sorted(dims)}")
        if not np.all(np.isfinite(e)):
            raise ValueError("E block has non-finite entries")

    @property
    def dim(self):
        return self.d.shape[0]


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    thetas: np.ndarray
    values: np.ndarray
    min_eig: np.ndarray

    @property
    def n_theta(self):
        return len(self.thetas)


@dataclass(frozen=True, eq=False)
class LimitBoundary:
    """``H``, ``K`` and the limit boundary blocks ``(L, R)`` of an HQT sequence."""

    h: np.ndarray
    k: np.ndarray
    l_mat: np.ndarray
    r_mat: np.ndarray
    phi0: np.ndarray
    phi1: np.ndarray


# --------------------------------------------------------------------------
# symbol


def symbol_values(blocks, thetas):
    """Stack of symbol matrices ``F(theta)``, shape ``(len(thetas), d, d)``."""
    z = np.exp(-1j * np.asarray(thetas, dtype=float))[:, None, None]
    f = blocks.e * z + blocks.d + blocks.e.conj().T * z.conj()
    return 0.5 * (f + np.swapaxes(f, -1, -2).conj())


def symbol_at(blocks, theta):
    return symbol_values(blocks, [theta])[0]


def _min_eig(f):
    if f.shape[-1] == 1:
        return f[:, 0, 0].real
    return np.linalg.eigvalsh(f)[:, 0]


def symbol_grid(blocks, n_theta=DEFAULT_N_THETA):
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    values = symbol_values(blocks, thetas)
    return SymbolGrid(thetas, values, _min_eig(values))


def _golden_min(fun, lo, hi, tol):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fun(d)
    return min(fc, fd)


def symbol_infimum(blocks, n_theta=DEFAULT_N_THETA, refine_tol=1e-12, max_refine=8):
    """Infimum over ``theta`` of the smallest eigenvalue of ``F(theta)``.

    Grid scan, then golden-section refinement in a one-cell neighbourhood of
    the ``max_refine`` lowest grid-local minima. The eigenvalue curve may have
    kinks at eigenvalue crossings, hence a derivative-free refinement.
    """
    if n_theta < 64:
        raise ValueError("n_theta must be at least 64")
    grid = symbol_grid(blocks, n_theta)
    v = grid.min_eig
    best = float(v.min())
    local = np.flatnonzero((v <= np.roll(v, 1)) & (v <= np.roll(v, -1)))
    local = local[np.argsort(v[local], kind="stable")][:max_refine]
    h = 2.0 * np.pi / n_theta

    def curve(theta):
        return float(_min_eig(symbol_values(blocks, [theta]))[0])

    for k in local:
        t = grid.thetas[k]
        best = min(best, _golden_min(curve, t - h, t + h, refine_tol))
    return best


# --------------------------------------------------------------------------
# quadrature


def periodic_mean(integrand, n_theta=None, tol=QUAD_TOL, n_max=MAX_N_THETA):
    """Mean of a 2*pi-periodic array-valued ``integrand`` over ``[0, 2*pi)``.

    ``integrand`` maps a 1-d array of angles to an array whose first axis runs
    over the angles. With ``n_theta=None`` the node count doubles (re-using
    previous nodes) until successive means agree to ``tol * (1 + max|mean|)``.
    """

    def grid_sum(thetas):
        total = 0.0
        for start in range(0, len(thetas), _CHUNK):
            total = total + np.sum(integrand(thetas[start : start + _CHUNK]), axis=0)
        return total

    if n_theta is not None:
        return grid_sum(2.0 * np.pi * np.arange(n_theta) / n_theta) / n_theta

    n = DEFAULT_N_THETA
    mean = grid_sum(2.0 * np.pi * np.arange(n) / n) / n
    while True:
        odd = np.pi * (2.0 * np.arange(n) + 1.0) / n
        new = 0.5 * (mean + grid_sum(odd) / n)
        n *= 2
        diff = np.max(np.abs(new - mean))
        mean = new
        if diff <= tol * (1.0 + np.max(np.abs(mean))):
            return mean
        if n >= n_max:
            warnings.warn(
                f"periodic trapezoid not converged at {n} nodes (last change {diff:.2e})",
                RuntimeWarning,
                stacklevel=2,
            )
            return mean


def _cholesky_stack(blocks, thetas):
    f = symbol_values(blocks, thetas)
    try:
        return np.linalg.cholesky(f)
    except np.linalg.LinAlgError:
        raise DomainError("symbol is not positive-definite at some quadrature node") from None


def _inverse_symbol(blocks, thetas):
    if blocks.dim == 1:
        f = symbol_values(blocks, thetas).real
        if np.any(f <= 0):
            raise DomainError("symbol is not positive-definite at some quadrature node")
        return (1.0 / f).astype(complex)
    linv = np.linalg.inv(_cholesky_stack(blocks, thetas))
    return np.swapaxes(linv, -1, -2).conj() @ linv


def fourier_coefficients(blocks, orders, n_theta=None, tol=QUAD_TOL):
    """Fourier coefficients ``Phi(n)`` of ``F^{-1}`` for every ``n`` in ``orders``."""
    orders = np.asarray(orders)

    def integrand(thetas):
        phase = np.exp(-1j * np.outer(thetas, orders))[:, :, None, None]
        return _inverse_symbol(blocks, thetas)[:, None] * phase

    if n_theta is not None and np.any(4 * np.abs(orders) > n_theta):
        raise ValueError("Fourier order too large for the quadrature grid")
    return periodic_mean(integrand, n_theta, tol)


def fourier_coefficient(blocks, n, n_theta=None, tol=QUAD_TOL):
    """``Phi(n) = (1/2pi) int F^{-1}(theta) exp(-i n theta) dtheta``."""
    return fourier_coefficients(blocks, [n], n_theta, tol)[0]


def szego_log_det(blocks, n_theta=None, tol=QUAD_TOL):
    """``(1/2pi) int ln det F(theta) dtheta``, the limit of ``ln det T_n / n``."""

    def integrand(thetas):
        if blocks.dim == 1:
            f = symbol_values(blocks, thetas)[:, 0, 0].real
            if np.any(f <= 0):
                raise DomainError("symbol is not positive-definite at some quadrature node")
            return np.log(f)
        c = _cholesky_stack(blocks, thetas)
        return 2.0 * np.sum(np.log(np.diagonal(c, axis1=-2, axis2=-1).real), axis=-1)

    return float(periodic_mean(integrand, n_theta, tol))


def limit_boundary(blocks, n_theta=None, tol=QUAD_TOL):
    """Limit of the boundary matrices, ``S_n -> diag(L, R)``.

    ``H = I - E Phi(1)``, ``K = I - Phi(1) E``,
    ``L = A - E^H Phi(0) H^{-1} E`` and ``R = B - E K^{-1} Phi(0) E^H``.
    """
    phi0, phi1 = fourier_coefficients(blocks, [0, 1], n_theta, tol)
    eye = np.eye(blocks.dim)
    e, eh = blocks.e, blocks.e.conj().T
    h = eye - e @ phi1
    k = eye - phi1 @ e
    for name, m in (("H", h), ("K", k)):
        cond = np.linalg.cond(m)
        if not cond < COND_LIMIT:
            raise ConditioningError(f"{name} is numerically singular (condition {cond:.3e})")
    l_mat = blocks.a - eh @ phi0 @ np.linalg.solve(h, e)
    r_mat = blocks.b - e @ np.linalg.solve(k, phi0 @ eh)
    return LimitBoundary(h, k, hermitian(l_mat), hermitian(r_mat), phi0, phi1)


# --------------------------------------------------------------------------
# finite-size matrices


def _check_rows(rows, max_rows):
    if rows > max_rows:
        raise SizeError(f"dense assembly of {rows} rows exceeds cap {max_rows}")


def _dense(diag, e, n_blocks):
    d = e.shape[0]
    dtype = np.result_type(diag[0], e)
    m = np.zeros((n_blocks * d, n_blocks * d), dtype=dtype)
    eh = e.conj().T
    for k in range(n_blocks):
        m[k * d : (k + 1) * d, k * d : (k + 1) * d] = diag[k]
        if k + 1 < n_blocks:
            m[(k + 1) * d : (k + 2) * d, k * d : (k + 1) * d] = e
            m[k * d : (k + 1) * d, (k + 1) * d : (k + 2) * d] = eh
    return m


def bulk_matrix(blocks, n, max_rows=MAX_ROWS):
    """Dense ``T_n``: ``D`` on the diagonal, ``E`` below, ``E^H`` above."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_rows(n * blocks.dim, max_rows)
    return _dense([blocks.d] * n, blocks.e, n)


def assemble_q(blocks, n, max_rows=MAX_ROWS):
    """Dense ``Q_n`` of size ``(n + 2) d``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_rows((n + 2) * blocks.dim, max_rows)
    return _dense([blocks.a] + [blocks.d] * n + [blocks.b], blocks.e, n + 2)


def _bulk_banded(blocks, n):
    """Upper banded storage of ``T_n`` for LAPACK band routines."""
    d = blocks.dim
    size = n * d
    u = 2 * d - 1
    dtype = np.result_type(blocks.d, blocks.e)
    ab = np.zeros((u + 1, size), dtype=dtype)
    eh = blocks.e.conj().T
    for o in range(min(u, size - 1) + 1):
        j = np.arange(o, size)
        i = j - o
        bi, li = np.divmod(i, d)
        bj, lj = np.divmod(j, d)
        vals = np.where(bi == bj, blocks.d[li, lj], np.where(bj == bi + 1, eh[li, lj], 0))
        ab[u - o, o:] = vals
    return ab


def bulk_log_det(blocks, n, max_rows=MAX_ROWS):
    """``ln det T_n`` by banded Cholesky; raises :class:`DomainError` if not PD."""
    _check_rows(n * blocks.dim, max_rows)
    try:
        c = scipy.linalg.cholesky_banded(_bulk_banded(blocks, n))
    except np.linalg.LinAlgError:
        raise DomainError(f"bulk matrix T_{n} is not positive-definite") from None
    return float(2.0 * np.sum(np.log(c[-1].real)))


def boundary_matrix(blocks, n, max_rows=MAX_ROWS):
    """The ``2d x 2d`` Schur-complement boundary matrix ``S_n``.

    Only the first and last block columns of ``T_n^{-1}`` are needed; they come
    from one banded Cholesky solve with two block right-hand sides.
    """
    d = blocks.dim
    _check_rows(n * d, max_rows)
    rhs = np.zeros((n * d, 2 * d))
    rhs[:d, :d] = np.eye(d)
    rhs[-d:, d:] = np.eye(d)
    try:
        if n * d == 1:
            # LAPACK ptsv path in solveh_banded rejects a 1x1 system
            if not blocks.d[0, 0].real > 0:
                raise np.linalg.LinAlgError
            x = rhs / blocks.d[0, 0].real
        else:
            x = scipy.linalg.solveh_banded(_bulk_banded(blocks, n), rhs)
    except np.linalg.LinAlgError:
        raise DomainError(f"bulk matrix T_{n} is not positive-definite") from None
    first, last = x[:d], x[-d:]
    e, eh = blocks.e, blocks.e.conj().T
    top_left = blocks.a - eh @ first[:, :d] @ e
    top_right = -eh @ first[:, d:] @ eh
    bottom_left = -e @ last[:, :d] @ e
    bottom_right = blocks.b - e @ last[:, d:] @ eh
    return hermitian(np.block([[top_left, top_right], [bottom_left, bottom_right]]))


def norm_bound(blocks):
    """Uniform bound on the operator norm of every ``Q_n``."""
    a, d, b, e = (operator_norm(m) for m in (blocks.a, blocks.d, blocks.b, blocks.e))
    return float(np.sqrt(2 * a**2 + 3 * d**2 + 2 * b**2 + 6 * e**2))
