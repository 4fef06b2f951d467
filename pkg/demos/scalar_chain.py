"""Sum of squares of a scalar autoregressive chain.

X_{n+1} = s X_n + G_n, W_N = sum_n X_n^2. Starting from the stationary law the
rate function is smooth; a wide initial law cuts the domain of the cumulant
generating function short and the rate function picks up a straight stretch.
"""

import numpy as np

from qtldp.chain import DriftModel, scalar_square_form
from qtldp.rate import rate_at
from qtldp.scgf import build_profile

s = 0.5
form = scalar_square_form()


def closed_form_phi(lam):
    a = 1 + s * s - 2 * lam
    return -0.5 * np.log((a + np.sqrt(a * a - 4 * s * s)) / 2)


for sigma_o in (1.0, 4.0):
    prof = build_profile(DriftModel([[s]], [[sigma_o]]), form)
    print(f"\nsigma_o = {sigma_o}")
    print(f"  domain      ({prof.lambda_minus:.6g}, {prof.lambda_plus:.10f})")
    print(f"  steep edge  {prof.steep_right}   d+ = {prof.d_plus:.6g}")
    lam = 0.5 * prof.lambda_plus
    print(f"  phi({lam:.4f}) = {prof.phi(lam):.12f}  (closed form {closed_form_phi(lam):.12f})")
    print("      w        I(w)      branch")
    for w in (0.5, 1.0, 4 / 3, 2.0, 3.0, 4.0):
        value, branch = rate_at(prof, w)
        print(f"  {w:7.3f}  {value:10.6f}  {branch}")
