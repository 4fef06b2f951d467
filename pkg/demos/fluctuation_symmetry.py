"""Entropy production of a rotating chain and the fluctuation symmetry.

The drift turns the plane by a quarter turn and shrinks by 1/2, so the chain is
not reversible and produces entropy at a positive rate. The rate function of the
entropy production satisfies I(-w) = I(w) + w; a Monte Carlo histogram is set
against it.
"""

import numpy as np

from qtldp.chain import DriftModel, entropy_production_form, lln_mean, sample_w
from qtldp.rate import gc_defect, rate_at
from qtldp.scgf import build_profile, normal_drift_profile

model = DriftModel([[0.0, -0.5], [0.5, 0.0]])
form = entropy_production_form(model)
prof = build_profile(model, form)
closed = normal_drift_profile(model)

print("domain (numerical):   ", (round(prof.lambda_minus, 9), round(prof.lambda_plus, 9)))
print("domain (closed form): ", closed.domain)
print("mean entropy production:", lln_mean(form, model))

w = np.linspace(0.0, 1.5, 7)
print("\nsymmetry defect I(-w) - I(w) - w:")
for x, d in zip(w, gc_defect(model, w, prof)):
    print(f"  w={x:4.2f}  {d: .2e}")

n, samples = 100, 100_000
ratios = sample_w(model, form, n, samples, seed=1) / n
counts, edges = np.histogram(ratios, bins=12, range=(-0.5, 2.5))
print(f"\nempirical -(1/n) ln P vs I at bin centres (n={n}, {samples} paths)")
for c, a, b in zip(counts, edges, edges[1:]):
    mid = 0.5 * (a + b)
    emp = -np.log(c / samples) / n if c else np.inf
    print(f"  {mid:5.2f}  {emp:7.4f}  {rate_at(prof, mid)[0]:7.4f}")
