"""Validity of the cascade construction for a few parameter choices.

Each report lists the family-specific checks on the scaling factor b and
whether all of them hold.
"""
from renyisphere import Family, ModelSpec, check_conditions

cases = [
    ModelSpec(Family.LOGNORMAL, b=3.0, sigma2_Y=2.0),
    ModelSpec(Family.LOGNORMAL, b=1.5, sigma2_Y=2.0),
    ModelSpec(Family.LOGGAMMA, b=2.0, lam=2.0, beta=2.0),
    ModelSpec(Family.CHISQUARE, b=2.0),
    ModelSpec(Family.CHISQUAREK, b=1.15, k=4),
]
for spec in cases:
    report = check_conditions(spec, C=1.0, gamma=1.0)
    print(spec.describe(), "->", "satisfied" if report.satisfied else "violated")
    for check in report.checks:
        print(f"    {check.name}: {'ok' if check.passed else 'fails'} (bound {check.bound:.4g}, actual {check.actual:.4g})")
