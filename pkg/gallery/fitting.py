"""Fit the model families to a curve.

The curve is a LogGamma theory curve with a little noise; each family is
fitted and ranked by RMSE, and LogGamma recovers its natural parameters.
"""
import numpy as np

from renyisphere import Family, ModelSpec, RenyiCurve, fit_family, renyi_T

q = np.round(np.arange(1.0, 2.0001, 0.02), 12)
truth = ModelSpec(Family.LOGGAMMA, b=3.0, lam=40.0, beta=2.0)
T = renyi_T(truth, q) + np.random.default_rng(2).normal(0.0, 1e-6, q.size)
curve = RenyiCurve(q, T)

fits = [fit_family(curve, fam, starts=4, b=3.0)
        for fam in (Family.LOGNORMAL, Family.CHISQUARE, Family.LOGGAMMA, Family.LOGNEGINVGAMMA)]
for fit in sorted(fits, key=lambda f: f.rmse):
    params = ", ".join(f"{k}={v:.5g}" for k, v in fit.params.items())
    print(f"{fit.family.value:15s} rmse={fit.rmse:.2e}  {params}")
best = min(fits, key=lambda f: f.rmse)
print("natural parameters of the best fit:", {k: round(v, 4) for k, v in best.natural_params.items()
                                             if isinstance(v, float)})
