"""Asymptotic scaled cumulant generating function of a quadratic functional.

For a model/form pair and a tilt ``lam`` the symbol of ``Sigma_n^{-1} - lam M_n``
is

    F_lam(theta) = (I - S^T e^{i theta})(I - S e^{-i theta})
                   - lam (U + V e^{-i theta} + V^T e^{i theta}).

``phi(lam) = -(1/4pi) int ln det F_lam``. It is the limit of
``ln E[exp(lam W_N)] / N`` on the open interval ``(lambda_-, lambda_+)`` where
the symbol and both limit boundary blocks are positive-definite.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain import tilted_blocks
from .errors import DomainError
from .hqt import (
    DEFAULT_N_THETA,
    QUAD_TOL,
    limit_boundary,
    periodic_mean,
    symbol_infimum,
    symbol_values,
    szego_log_det,
)
from .matcore import rayleigh_min

__all__ = [
    "ScgfProfile",
    "NormalDriftProfile",
    "f_inf",
    "phi",
    "phi_prime",
    "domain_diagnostics",
    "lambda_in_domain",
    "domain_endpoints",
    "build_profile",
    "normal_drift_profile",
]

EDGE_OFFSETS = (1e-3, 1e-4, 1e-5, 1e-6)
DEFAULT_TOL = 1e-9
DEFAULT_CAP = 1e8


def f_inf(model, form, lam, n_theta=DEFAULT_N_THETA):
    """Infimum over ``theta`` of the smallest eigenvalue of ``F_lam(theta)``."""
    return symbol_infimum(tilted_blocks(model, form, lam), n_theta)


def _checked_blocks(model, form, lam):
    blocks = tilted_blocks(model, form, lam)
    f = symbol_infimum(blocks)
    if not f > 0:
        raise DomainError(f"symbol is not positive-definite at lambda={lam!r} (f={f:.3e})")
    return blocks


def phi(model, form, lam, n_theta=None, tol=QUAD_TOL):
    return -0.5 * szego_log_det(_checked_blocks(model, form, lam), n_theta, tol)


def phi_prime(model, form, lam, n_theta=None, tol=QUAD_TOL):
    """Derivative of ``phi``: ``(1/4pi) int tr[F^{-1} (U + V e^{-i t} + V^T e^{i t})]``."""
    blocks = _checked_blocks(model, form, lam)
    u, v = form.u_mat, form.v_mat
    if not (np.any(u) or np.any(v)):
        return 0.0

    def integrand(thetas):
        z = np.exp(-1j * thetas)[:, None, None]
        g = u + v * z + v.T * z.conj()
        f = symbol_values(blocks, thetas)
        if blocks.dim == 1:
            return (g[:, 0, 0] / f[:, 0, 0]).real
        return np.trace(np.linalg.solve(f, g), axis1=-2, axis2=-1).real

    return 0.5 * float(periodic_mean(integrand, n_theta, tol))


def domain_diagnostics(model, form, lam, n_theta=None):
    """``(f_lam, r(L_lam), r(R_lam))``; the last two are NaN when ``f_lam <= 0``.

    Very close to a symbol-limited edge the quadrature for ``Phi`` may stop at
    the node cap before converging; only the signs of the boundary blocks are
    used there, so the warning is suppressed.
    """
    blocks = tilted_blocks(model, form, lam)
    f = symbol_infimum(blocks)
    if not f > 0:
        return f, math.nan, math.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lb = limit_boundary(blocks, n_theta)
    return f, rayleigh_min(lb.l_mat), rayleigh_min(lb.r_mat)


def lambda_in_domain(model, form, lam, margin=0.0, n_theta=None):
    if margin < 0:
        raise ValueError("margin must be non-negative")
    f, l_min, r_min = domain_diagnostics(model, form, lam, n_theta)
    return f > margin and l_min > margin and r_min > margin


def domain_endpoints(model, form, tol=DEFAULT_TOL, cap=DEFAULT_CAP, start=0.25):
    """``(lambda_-, lambda_+)``, using that the admissible set is an interval around 0.

    Each side expands geometrically from 0 until a tilt leaves the domain
    (``|lam| > cap`` reports an infinite endpoint) and then bisects the bracket
    to width ``tol * (1 + |lam|)``. The midpoint of the final bracket is
    returned.
    """
    if tol <= 0 or cap < 1:
        raise ValueError("need tol > 0 and cap >= 1")

    def inside(lam):
        return lambda_in_domain(model, form, lam)

    def search(sign):
        good, step = 0.0, start
        while True:
            lam = sign * step
            if abs(lam) > cap:
                return sign * math.inf
            if not inside(lam):
                bad = lam
                break
            good, step = lam, 2.0 * step
        while abs(bad - good) > tol * (1.0 + abs(good)):
            mid = 0.5 * (good + bad)
            if inside(mid):
                good = mid
            else:
                bad = mid
        return 0.5 * (good + bad)

    return search(-1.0), search(1.0)


@dataclass(frozen=True, eq=False)
class ScgfProfile:
    """Domain, edge limits and an evaluator for ``phi`` and its derivative.

    ``phi_minus``/``phi_plus`` are ``None`` on a side whose endpoint is
    infinite. ``d_minus``/``d_plus`` are ``-inf``/``+inf`` when ``phi`` is steep
    at a finite endpoint. ``residuals`` records how far the last two edge
    extrapolations disagree.
    """

    model: object
    form: object
    lambda_minus: float
    lambda_plus: float
    phi_minus: float
    phi_plus: float
    d_minus: float
    d_plus: float
    steep_left: bool
    steep_right: bool
    tol: float = DEFAULT_TOL
    n_theta: int = None
    residuals: dict = field(default_factory=dict)

    def phi(self, lam):
        return phi(self.model, self.form, lam, self.n_theta)

    def phi_prime(self, lam):
        return phi_prime(self.model, self.form, lam, self.n_theta)

    def contains(self, lam):
        return self.lambda_minus < lam < self.lambda_plus

    @property
    def degenerate(self):
        """True when ``phi`` is linear on its whole domain."""
        if math.isinf(self.d_plus) or math.isinf(self.d_minus):
            return False
        return self.d_plus - self.d_minus <= 1e-10 * (1.0 + abs(self.d_plus))

    def summary(self):
        """Flat dict of the edge quantities with plain Python scalars."""
        out = {}
        for key in ("lambda_minus", "lambda_plus", "phi_minus", "phi_plus", "d_minus", "d_plus"):
            value = getattr(self, key)
            out[key] = None if value is None else float(value)
        out["steep_left"] = bool(self.steep_left)
        out["steep_right"] = bool(self.steep_right)
        out["degenerate"] = bool(self.degenerate)
        return out


def _extrapolate(x, y):
    """Linear extrapolation to ``x = 0`` through the last two samples."""
    return float(y[-1] + (y[-1] - y[-2]) * x[-1] / (x[-2] - x[-1]))


def _power_extrapolate(y):
    """Limit of samples at decade-spaced offsets, ``y ~ y0 + c eps^p`` with fitted ``p``."""
    d1, d2 = y[-2] - y[-3], y[-1] - y[-2]
    if d1 == 0 or d2 == 0 or d1 * d2 < 0:
        return float(y[-1])
    p = float(np.clip(np.log10(d1 / d2), 0.05, 2.0))
    return float(y[-1] + d2 / (10.0**p - 1.0))


def _edge_limits(model, form, edge, sign, n_theta):
    """``(phi_edge, d_edge, steep, residual)`` at a finite endpoint.

    ``sign`` is +1 for the right edge. ``phi'`` is evaluated at ``edge - sign*eps``
    for shrinking ``eps``; when its successive increments stop shrinking the
    derivative is declared divergent (steep edge). ``phi_edge`` is extrapolated
    linearly in ``eps`` at a non-steep edge and with a fitted power of ``eps``
    at a steep one.
    """
    scale = 1.0 + abs(edge)
    eps = np.array(EDGE_OFFSETS) * scale
    lams = edge - sign * eps
    phis = np.array([phi(model, form, lam, n_theta) for lam in lams])
    primes = np.array([phi_prime(model, form, lam, n_theta) for lam in lams])
    steps = sign * np.diff(primes)
    floor = 1e-8 * (1.0 + np.max(np.abs(primes)))
    steep = bool(np.all(steps > floor) and np.all(steps[1:] >= 0.9 * steps[:-1]))

    # a divergent slope makes phi approach its edge value like a power of eps below 1
    extrapolate = _power_extrapolate if steep else (lambda y: _extrapolate(eps[: len(y)], y))
    phi_edge = extrapolate(phis)
    residual = abs(phi_edge - extrapolate(phis[:-1]))
    d_edge = sign * math.inf if steep else _extrapolate(eps, primes)
    return phi_edge, d_edge, steep, residual


def _far_slope(model, form, sign, cap, n_theta):
    """Limit of ``phi'`` along an unbounded side, extrapolated in ``1/|lam|``."""
    far = min(1e6, cap)
    inv = np.array([10.0 / far, 1.0 / far])
    primes = [phi_prime(model, form, sign / x, n_theta) for x in inv]
    return _extrapolate(inv, primes)


def build_profile(model, form, tol=DEFAULT_TOL, cap=DEFAULT_CAP, n_theta=None):
    lam_minus, lam_plus = domain_endpoints(model, form, tol, cap)
    sides = {}
    residuals = {}
    for key, edge, sign in (("minus", lam_minus, -1.0), ("plus", lam_plus, 1.0)):
        if math.isinf(edge):
            sides[key] = (None, _far_slope(model, form, sign, cap, n_theta), False)
        else:
            phi_edge, d_edge, steep, res = _edge_limits(model, form, edge, sign, n_theta)
            sides[key] = (phi_edge, d_edge, steep)
            residuals[f"phi_{key}"] = res
    return ScgfProfile(
        model=model,
        form=form,
        lambda_minus=lam_minus,
        lambda_plus=lam_plus,
        phi_minus=sides["minus"][0],
        phi_plus=sides["plus"][0],
        d_minus=sides["minus"][1],
        d_plus=sides["plus"][1],
        steep_left=sides["minus"][2],
        steep_right=sides["plus"][2],
        tol=tol,
        n_theta=n_theta,
        residuals=residuals,
    )


# --------------------------------------------------------------------------
# normal drift, stationary start: closed forms


@dataclass(frozen=True, eq=False)
class NormalDriftProfile:
    """Closed-form entropy-production SCGF for a normal drift in its stationary law.

    ``alpha + i beta`` run over the eigenvalues of ``S``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    lambda_o: float

    @property
    def eigen_pairs(self):
        return list(zip(self.alpha.tolist(), self.beta.tolist()))

    @property
    def domain(self):
        return -self.lambda_o - 1.0, self.lambda_o

    def rho(self, lam):
        a2, b2 = self.alpha**2, self.beta**2
        return 2.0 * np.sqrt(a2 + (2.0 * lam + 1.0) ** 2 * b2) / (1.0 + a2 + b2)

    def f_inf(self, lam):
        return float(np.min((1.0 + self.alpha**2 + self.beta**2) * (1.0 - self.rho(lam))))

    def phi(self, lam):
        rho = self.rho(lam)
        if not np.max(rho) < 1.0:
            raise DomainError(f"lambda={lam!r} outside the closed-form domain")
        mod2 = 1.0 + self.alpha**2 + self.beta**2
        return float(
            -0.5 * np.sum(np.log(0.5 * (1.0 + np.sqrt(1.0 - rho**2))))
            - 0.5 * np.sum(np.log(mod2))
        )


def normal_drift_profile(model, tol=1e-10):
    s = model.s
    if np.max(np.abs(s.T @ s - s @ s.T)) > tol:
        raise DomainError("drift matrix is not normal")
    if np.max(np.abs(model.sigma_o - model.sigma_s)) > tol:
        raise DomainError("closed forms need the stationary initial covariance")
    eig = np.linalg.eigvals(s)
    alpha, beta = eig.real, eig.imag
    rotating = np.abs(beta) > 1e-12
    if not np.any(rotating):
        raise DomainError("drift has only real eigenvalues (symmetric case)")
    a, b = alpha[rotating], beta[rotating]
    lam_o = -0.5 + np.min(np.sqrt(((1 + a**2 + b**2) ** 2 - 4 * a**2) / (16 * b**2)))
    return NormalDriftProfile(alpha, beta, float(lam_o))

