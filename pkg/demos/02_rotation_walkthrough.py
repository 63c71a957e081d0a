# What the rotation does for one subgroup.
import numpy as np

from rotatest import build_bundle, build_U_m1_closed_form, get_model
from rotatest.rotation import build_reference_basis, bundle_residuals

model = get_model("logistic")

# a single trial: two outcomes, one parameter
b = build_bundle(model, [0.7], 1.0)
print("p   =", b.p.round(4))
print("U   =\n", b.U.round(4))

# the general construction and the explicit 2x2 formula act the same way on
# the reference vectors
p0, dp0 = b.p[0], b.M[0, 0] * b.p[0]
U1 = build_U_m1_closed_form(p0, dp0)
B = build_reference_basis(1).B
print(np.abs(U1 @ (b.ell[:, None] * B) - b.U @ (b.ell[:, None] * B)).max())

# three trials: eight outcomes
b3 = build_bundle(model, [0.2, 1.1, 1.9], 1.0)
print("8 outcome probabilities:", b3.p.round(4), "sum", b3.p.sum())

# U is unitary for the p-weighted inner product and sends ell * b onto
# the normalised score basis; all residuals are rounding error
for k, v in bundle_residuals(b3).items():
    print(f"{k:20s} {v:.1e}")

# skipping the information normalisation breaks this
bad = build_bundle(model, [0.2, 1.1, 1.9], 1.0, normalize=False)
print("unitarity without normalisation:", bundle_residuals(bad)["unitarity"])
