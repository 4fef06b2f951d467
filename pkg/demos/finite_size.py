"""From finite paths to the limit.

The exact cumulant generating function of W_N is a Gaussian integral over the
whole path. Its per-step value approaches the Szego-type limit at rate 1/N, the
determinant factorizes into bulk and boundary pieces, and beyond the edge of the
domain it blows up at a finite N.
"""

import numpy as np

from qtldp.chain import DriftModel, scalar_square_form, tilted_blocks
from qtldp.hqt import assemble_q, boundary_matrix, bulk_log_det
from qtldp.oracle import finite_cgf, xi_extremes_curve
from qtldp.scgf import phi

model = DriftModel([[0.5]], [[1.0]])
form = scalar_square_form()
lam = 0.1
limit = phi(model, form, lam)
print(f"phi({lam}) = {limit:.10f}")
print("     N    finite-N value   error     N * error")
for n in (50, 100, 200, 400, 800):
    value = finite_cgf(model, form, lam, n - 2, extremes=False).value
    print(f"  {n:4d}   {value:.10f}   {value - limit:.2e}   {n * (value - limit):.4f}")

blocks = tilted_blocks(model, form, lam)
n = 30
dense = np.linalg.slogdet(assemble_q(blocks, n))[1]
split = bulk_log_det(blocks, n) + np.linalg.slogdet(boundary_matrix(blocks, n))[1]
print(f"\nln det Q = {dense:.12f}, bulk + boundary = {split:.12f}")

print("\nlargest eigenvalue xi of the quadratic form in whitened coordinates (-> 1/lambda+ = 8)")
for n, lo, hi in xi_extremes_curve(model, form, [25, 100, 400]):
    print(f"  n={n:4d}  xi_min={lo:.6f}  xi_max={hi:.6f}")

beyond = 0.175
first_inf = next(n for n in range(1, 400) if np.isinf(finite_cgf(model, form, beyond, n, extremes=False).value))
print(f"\nat lambda={beyond} the path integral diverges from n = {first_inf} on")
