"""Legendre-transform rate function ``I(w) = sup_lam {w lam - phi(lam)}``.

Inside ``(d_-, d_+)`` the supremum is attained where ``phi'(lam) = w``. Beyond
a finite non-steep endpoint the rate function continues as an affine stretch,
``w lambda_+ - phi_+`` on the right and ``w lambda_- - phi_-`` on the left;
beyond an infinite endpoint it is ``+inf``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .chain import entropy_production_form
from .scgf import DEFAULT_CAP, build_profile

__all__ = ["INTERIOR", "AFFINE_LEFT", "AFFINE_RIGHT", "INFINITE", "RateCurve",
           "rate_at", "rate_curve", "gc_defect"]

INTERIOR = "interior"
AFFINE_LEFT = "affine-left"
AFFINE_RIGHT = "affine-right"
INFINITE = "infinite"


@dataclass(frozen=True, eq=False)
class RateCurve:
    w: np.ndarray
    values: np.ndarray
    branches: list
    profile: object

    @property
    def samples(self):
        return list(zip(self.w.tolist(), self.values.tolist(), self.branches))


def _beyond(profile, w, side):
    if side > 0:
        if math.isinf(profile.lambda_plus):
            return math.inf, INFINITE
        return w * profile.lambda_plus - profile.phi_plus, AFFINE_RIGHT
    if math.isinf(profile.lambda_minus):
        return math.inf, INFINITE
    return w * profile.lambda_minus - profile.phi_minus, AFFINE_LEFT


def _inner_edge(profile, side, tol):
    edge = profile.lambda_plus if side > 0 else profile.lambda_minus
    return edge - side * 10.0 * tol * (1.0 + abs(edge))


def _bracket_towards_edge(g, profile, side, tol):
    """First of a sequence of tilts approaching a finite edge where ``g`` changes sign.

    Offsets from the edge shrink by decades down to the shrunken edge, so the
    nearly singular symbol right at the edge is only evaluated when needed.
    Returns ``None`` if even the shrunken edge does not bracket the root.
    """
    edge = profile.lambda_plus if side > 0 else profile.lambda_minus
    inner = _inner_edge(profile, side, tol)
    scale = 1.0 + abs(edge)
    offset = 0.1 * scale
    while offset > abs(edge - inner):
        lam = edge - side * offset
        if side * lam > 0 and side * g(lam) >= 0:
            return lam
        offset *= 0.1
    return inner if side * g(inner) >= 0 else None


def rate_at(profile, w, tol=None, cap=DEFAULT_CAP):
    """``(I(w), branch)`` for a built :class:`~qtldp.scgf.ScgfProfile`.

    ``w`` equal to ``d_+`` (or ``d_-``) is assigned to the affine branch.
    """
    tol = profile.tol if tol is None else tol
    d_minus, d_plus = profile.d_minus, profile.d_plus
    if profile.degenerate and abs(w - d_plus) <= 1e-10 * (1.0 + abs(d_plus)):
        return 0.0, INTERIOR
    if w >= d_plus:
        return _beyond(profile, w, +1)
    if w <= d_minus:
        return _beyond(profile, w, -1)

    def g(lam):
        return profile.phi_prime(lam) - w

    g0 = g(0.0)
    if g0 == 0.0:
        return 0.0, INTERIOR
    side = 1.0 if g0 < 0 else -1.0
    edge = profile.lambda_plus if side > 0 else profile.lambda_minus
    if math.isinf(edge):
        far = side
        while side * g(far) < 0:
            far *= 2.0
            if abs(far) > cap:
                return _beyond(profile, w, side)
    else:
        far = _bracket_towards_edge(g, profile, side, tol)
        if far is None:
            # w sits between phi' at the shrunken edge and d_+/-
            return _beyond(profile, w, side)
    lo, hi = sorted((0.0, far))
    lam = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return w * lam - profile.phi(lam), INTERIOR


def rate_curve(profile, w_min, w_max, n_points):
    if not w_min < w_max or n_points < 2:
        raise ValueError("need w_min < w_max and n_points >= 2")
    w = np.linspace(w_min, w_max, n_points)
    pairs = [rate_at(profile, x) for x in w]
    return RateCurve(w, np.array([p[0] for p in pairs]), [p[1] for p in pairs], profile)


def gc_defect(model, w_grid, profile=None):
    """``I(-w) - I(w) - w`` for the entropy production; NaN where either side is infinite."""
    if profile is None:
        profile = build_profile(model, entropy_production_form(model))
    out = []
    for w in w_grid:
        right, _ = rate_at(profile, w)
        left, _ = rate_at(profile, -w)
        out.append(left - right - w if math.isfinite(left) and math.isfinite(right) else math.nan)
    return np.array(out)
