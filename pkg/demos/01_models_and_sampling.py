# Failure-probability models and grouped trial data.
import numpy as np

from rotatest import get_model, generate_sample, encode_lex, fit_mle
from rotatest.models import BUILTIN_ORDER

x = np.linspace(0, 2, 5)
for name in BUILTIN_ORDER:
    model = get_model(name)
    p = model.failure_prob(x, model.theta0)
    print(f"{name:12s} theta0={model.theta0:<4}  p(x) at 0, .5, 1, 1.5, 2: {np.round(p, 3)}")

# 96 trials in subgroups of 3.  Covariates are uniform on [0, 2];
# outcome 0 is a failure.
rng = np.random.default_rng(1)
model = get_model("normal")
s = generate_sample(model, model.theta0, 32, 3, rng)
print(s.covariates[:3].round(3))
print(s.outcomes[:3])

# each subgroup's outcome vector is one of 2**3 codes, 000 -> 1 ... 111 -> 8
print("codes:", s.z[:10])
print(encode_lex([1, 0, 1]))

fit = fit_mle(model, s)
print(f"theta_hat = {fit.theta_hat:.4f} (true {model.theta0}), at boundary: {fit.at_boundary}")
