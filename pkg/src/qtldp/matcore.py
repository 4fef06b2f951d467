"""Dense kernels for small complex matrices.

Every routine here works on plain ``numpy`` arrays. Hermitian inputs are
passed through :func:`hermitian`, which symmetrizes roundoff-level asymmetry
and rejects anything larger.
"""

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError

__all__ = [
    "hermitian",
    "rayleigh_min",
    "is_positive_definite",
    "log_det_hermitian_pd",
    "spectral_radius",
    "operator_norm",
]

ASYMMETRY_TOL = 1e-8


def _square(m):
    m = np.asarray(m)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian(m, tol=ASYMMETRY_TOL):
    """Return ``(m + m^H) / 2`` after checking ``m`` is Hermitian up to ``tol``.

    The asymmetry is measured relative to ``1 + max|m_ij|``. Real input stays
    real.
    """
    m = _square(m)
    mh = m.conj().T
    scale = 1.0 + np.max(np.abs(m))
    asym = np.max(np.abs(m - mh))
    if asym > tol * scale:
        raise DomainError(f"matrix is not Hermitian: relative asymmetry {asym / scale:.3e}")
    return 0.5 * (m + mh)


def rayleigh_min(m):
    """Smallest eigenvalue of a Hermitian matrix."""
    m = hermitian(m)
    if m.shape[0] == 1:
        return float(m[0, 0].real)
    try:
        return float(scipy.linalg.eigvalsh(m, subset_by_index=[0, 0])[0])
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed on matrix\n{m}") from exc


def is_positive_definite(m, margin=0.0):
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return rayleigh_min(m) > margin


def log_det_hermitian_pd(m):
    """Log-determinant of a Hermitian positive-definite matrix via Cholesky."""
    m = hermitian(m)
    try:
        c = scipy.linalg.cholesky(m, lower=True)
    except np.linalg.LinAlgError:
        raise DomainError(
            f"matrix is not positive-definite (minimum eigenvalue {rayleigh_min(m):.6e})"
        ) from None
    return float(2.0 * np.sum(np.log(np.diag(c).real)))


def spectral_radius(m):
    m = _square(m)
    try:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed on matrix\n{m}") from exc


def operator_norm(m):
    """Largest singular value."""
    return float(np.linalg.norm(_square(m), 2))
