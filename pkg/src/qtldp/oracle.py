"""Ground truth at finite ``N``: dense Gaussian integrals and Monte Carlo.

The dense path here shares no determinant code with :mod:`qtldp.hqt`'s
structural path (banded Cholesky, Szego integrals), so the two can check each
other.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import form_blocks, iter_w_batches, tilted_blocks
from .hqt import MAX_ROWS, assemble_q

__all__ = [
    "FiniteCgfReport",
    "McEstimate",
    "finite_cgf",
    "xi_extremes",
    "xi_extremes_curve",
    "mc_cgf",
    "mc_tail",
]


@dataclass(frozen=True)
class FiniteCgfReport:
    """``ln E[exp(lam W_{n+2})]`` and its per-step value ``log_mgf / (n + 2)``."""

    n: int
    lam: float
    value: float
    log_mgf: float
    min_eig: float
    xi_min: float = math.nan
    xi_max: float = math.nan

    @property
    def steps(self):
        return self.n + 2


@dataclass(frozen=True)
class McEstimate:
    n: int
    samples: int
    target: str
    estimate: float
    std_error: float
    seed: int
    probability: float = None
    count: int = None
    upper_bound: bool = False


def _precision_and_coefficients(model, form, n, max_rows):
    q0 = assemble_q(tilted_blocks(model, form, 0.0), n, max_rows).real
    m = assemble_q(form_blocks(form), n, max_rows).real
    return q0, m


def xi_extremes(q0, m):
    """Extreme eigenvalues of ``A^T M A`` where ``A A^T = q0^{-1}``."""
    c0 = scipy.linalg.cholesky(q0, lower=True)
    half = scipy.linalg.solve_triangular(c0, m, lower=True)
    sym = scipy.linalg.solve_triangular(c0, half.T, lower=True)
    eig = scipy.linalg.eigvalsh(0.5 * (sym + sym.T))
    return float(eig[0]), float(eig[-1])


def finite_cgf(model, form, lam, n, extremes=True, max_rows=MAX_ROWS):
    """Exact cumulant generating function of ``W_{n+2}`` from the dense precision matrix.

    ``ln E[exp(lam W)] = -ln det(Sigma_o)/2 - ln det(Sigma_n^{-1} - lam M_n)/2`` when
    the matrix is positive-definite, ``+inf`` otherwise.
    """
    q0, m = _precision_and_coefficients(model, form, n, max_rows)
    q = q0 - lam * m
    min_eig = float(scipy.linalg.eigvalsh(q, subset_by_index=[0, 0])[0])
    if lam == 0:
        log_mgf = 0.0
    else:
        try:
            c = scipy.linalg.cholesky(q, lower=True)
        except np.linalg.LinAlgError:
            log_mgf = math.inf
        else:
            logdet_q = 2.0 * np.sum(np.log(np.diag(c)))
            logdet_o = 2.0 * np.sum(np.log(np.diag(model.sigma_o_chol)))
            log_mgf = float(-0.5 * logdet_o - 0.5 * logdet_q)
    xi_min, xi_max = xi_extremes(q0, m) if extremes else (math.nan, math.nan)
    return FiniteCgfReport(n, lam, log_mgf / (n + 2), log_mgf, min_eig, xi_min, xi_max)


def xi_extremes_curve(model, form, n_list, max_rows=MAX_ROWS):
    out = []
    for n in n_list:
        q0, m = _precision_and_coefficients(model, form, n, max_rows)
        out.append((n, *xi_extremes(q0, m)))
    return out


def mc_cgf(model, form, lam, n, samples, seed, batch_size=50_000, threads=1):
    """Empirical ``(1/n) ln mean exp(lam W_n)`` with a delta-method standard error.

    Exponentials are accumulated relative to a running maximum so ``exp(lam W)``
    never overflows.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    shift, s1, s2 = -math.inf, 0.0, 0.0
    for w in iter_w_batches(model, form, n, samples, seed, batch_size, threads):
        x = lam * w
        top = float(np.max(x))
        if top > shift:
            s1 *= math.exp(shift - top)
            s2 *= math.exp(2.0 * (shift - top))
            shift = top
        y = np.exp(x - shift)
        s1 += float(np.sum(y))
        s2 += float(np.sum(y * y))
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    return McEstimate(
        n=n,
        samples=samples,
        target=f"(1/n) ln E[exp({lam!r} W_n)]",
        estimate=(shift + math.log(mean)) / n,
        std_error=math.sqrt(var / samples) / mean / n,
        seed=seed,
    )


def mc_tail(model, form, n, samples, interval, seed, batch_size=50_000, threads=1):
    """Empirical ``P[W_n / n in (a, b)]`` and its log-rate ``(1/n) ln P``.

    With no hits the one-sided 95% Clopper-Pearson bound ``1 - 0.05**(1/samples)``
    is reported instead and ``upper_bound`` is set.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    lo, hi = interval
    count = 0
    for w in iter_w_batches(model, form, n, samples, seed, batch_size, threads):
        r = w / n
        count += int(np.count_nonzero((r > lo) & (r < hi)))
    target = f"P[W_n/n in ({lo!r}, {hi!r})]"
    if count == 0:
        p = 1.0 - 0.05 ** (1.0 / samples)
        return McEstimate(n, samples, target, math.log(p) / n, math.inf, seed, p, 0, True)
    p = count / samples
    se_p = math.sqrt(p * (1.0 - p) / samples)
    return McEstimate(n, samples, target, math.log(p) / n, se_p / p / n, seed, p, count)
