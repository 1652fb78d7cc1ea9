"""Regression of theoretical Rényi families on (empirical) Rényi curves.

Every family is fitted to the centred curve ``y(q) = T(q) - q + 1`` through a
reparameterization in which it is either linear or low-dimensional:

============== =================================================== ==========================
family         model for y(q)                                      parameters
============== =================================================== ==========================
lognormal      a (q - q^2)                                         a = sigma2_Y / (4 ln b)
chisquare      A log2(2^q Gamma(q + 1/2) / sqrt(pi))               A = -1 / (2 log2 b)
loggamma       (ln(1 - B q) - q ln(1 - B)) / A                     A = 2 ln b / beta, B = 1/lambda
logneginvgamma -A ln(E Lambda^q) with beta = B, lambda = C^2       A = 1 / (2 ln b)
evenpower      A log2(E Y^(2kq)),  k continuous                    A = -1 / (2 log2 b)
chisquarek     -A log2(E Lambda^q), k continuous                   A = 1 / (2 log2 b)
============== =================================================== ==========================

Linear families are solved in closed form; the others go through
:func:`levenberg_marquardt` with finite-difference Jacobians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import FitError
from .models import Family, RenyiCurve

__all__ = [
    "FitResult",
    "LMResult",
    "NONLINEAR_DEFAULTS",
    "fit_family",
    "fit_linear_family",
    "fit_nonlinear_family",
    "levenberg_marquardt",
    "linear_regressor",
    "model_curve",
    "numeric_jacobian",
]

LN2 = math.log(2.0)
_CBRT_EPS = float(np.finfo(float).eps ** (1 / 3))
LN_PI = math.log(math.pi)

LINEAR = (Family.LOGNORMAL, Family.CHISQUARE)
NONLINEAR = (Family.LOGGAMMA, Family.LOGNEGINVGAMMA, Family.EVENPOWER, Family.CHISQUAREK)

PARAM_NAMES = {
    Family.LOGNORMAL: ("a",),
    Family.CHISQUARE: ("A",),
    Family.LOGGAMMA: ("A", "B"),
    Family.LOGNEGINVGAMMA: ("A", "B", "C"),
    Family.EVENPOWER: ("A", "k"),
    Family.CHISQUAREK: ("A", "k"),
}

# starting values near the magnitudes met when fitting CMB-like, weakly multifractal curves
NONLINEAR_DEFAULTS = {
    Family.LOGGAMMA: (0.03, 0.005),
    Family.LOGNEGINVGAMMA: (0.25, 5.0, 0.4),
}


@dataclass
class FitResult:
    family: Family
    params: dict
    natural_params: dict
    rmse: float
    residuals: np.ndarray
    converged: bool
    iterations: int
    verbatim: bool = False
    grad_norm: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": {k: float(v) for k, v in self.params.items()},
            "natural_params": {k: float(v) for k, v in self.natural_params.items()},
            "rmse": float(self.rmse),
            "residuals": [float(r) for r in self.residuals],
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "verbatim": bool(self.verbatim),
            "grad_norm": float(self.grad_norm),
            **({"extra": self.extra} if self.extra else {}),
        }


# ---------------------------------------------------------------------------
# Levenberg-Marquardt

@dataclass
class LMResult:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    message: str

    @property
    def cost(self) -> float:
        return float(self.residuals @ self.residuals)


def numeric_jacobian(fun, x, r0, lower, upper, rel_step=_CBRT_EPS):
    """Central-difference Jacobian; one-sided next to a bound.

    The step is ``rel_step * max(|x_j|, 1)``, which balances truncation and
    rounding error for central differences.
    """
    J = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        up = x[j] + h < upper[j]
        down = x[j] - h > lower[j]
        if not down and not up:
            h = 0.5 * min(upper[j] - x[j], x[j] - lower[j])
            up = down = True
        xp = x.copy()
        xm = x.copy()
        if up and down:
            xp[j] += h
            xm[j] -= h
            J[:, j] = (np.asarray(fun(xp), dtype=float) - np.asarray(fun(xm), dtype=float)) / (2 * h)
        elif up:
            xp[j] += h
            J[:, j] = (np.asarray(fun(xp), dtype=float) - r0) / h
        else:
            xm[j] -= h
            J[:, j] = (r0 - np.asarray(fun(xm), dtype=float)) / h
    return J


def _trust_step(s, ur, vt, radius):
    """Scaled LM step of length <= radius from the SVD of the scaled Jacobian."""
    keep = s > s.max() * 1e-13 if s.size else s > 0
    s, ur, vt = s[keep], ur[keep], vt[keep]
    gn = -(ur / s) @ vt
    if np.linalg.norm(gn) <= radius:
        return gn
    su = s * ur

    def excess(lam):
        return np.linalg.norm(su / (s * s + lam)) - radius

    hi = np.linalg.norm(su) / radius
    lam = optimize.brentq(excess, 0.0, hi, rtol=1e-6, xtol=1e-300)
    return -(su / (s * s + lam)) @ vt


def _max_cosine(grad, cols, r):
    """Largest |cos| of the angle between the residual and a Jacobian column."""
    denom = cols * np.linalg.norm(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, np.abs(grad) / denom, 0.0)
    return float(cos.max())


def levenberg_marquardt(residual_map, init, bounds=None, max_iter=200, xtol=1e-10, gtol=1e-10,
                        rel_step=_CBRT_EPS, factor=100.0) -> LMResult:
    """Minimize ``sum(residual_map(p)**2)`` with a trust-region Levenberg-Marquardt method.

    Variables are scaled by running maxima of the Jacobian column norms and the
    damping is chosen so the scaled step fits the trust radius. ``bounds`` is a
    pair ``(lower, upper)``; strict bounds are respected by keeping trial points
    a relative ``1e-12`` inside. Iteration stops when the relative step falls
    below ``xtol``, when the residual is orthogonal to every Jacobian column
    to within a cosine of ``gtol``, or after
    ``max_iter`` Jacobian evaluations. Non-finite residuals at trial points
    shrink the trust region; if that stalls the result is marked not converged.
    """
    x = np.array(init, dtype=float).reshape(-1)
    n = x.size
    if bounds is None:
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
    else:
        lower = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n,)).copy()
    if np.any(x <= lower) or np.any(x >= upper):
        raise FitError("initial parameters lie outside the bounds")
    with np.errstate(invalid="ignore"):
        margin_lo = 1e-12 * np.maximum(np.abs(lower), 1e-12)
        margin_hi = 1e-12 * np.maximum(np.abs(upper), 1e-12)
        lo = np.where(np.isfinite(lower), lower + margin_lo, lower)
        hi = np.where(np.isfinite(upper), upper - margin_hi, upper)

    r = np.asarray(residual_map(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the initial parameters")

    diag = None
    radius = None
    J = numeric_jacobian(residual_map, x, r, lower, upper, rel_step)
    message = "maximum iterations reached"
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if not np.all(np.isfinite(J)):
            message = "non-finite Jacobian"
            break
        grad = J.T @ r
        cols = np.linalg.norm(J, axis=0)
        if not r.any() or _max_cosine(grad, cols, r) <= gtol:
            converged, message = True, "residual orthogonal to Jacobian"
            break
        diag = cols if diag is None else np.maximum(diag, cols)
        diag = np.where(diag > 0, diag, 1.0)
        if radius is None:
            radius = factor * np.linalg.norm(diag * x) or factor
        u, s, vt = np.linalg.svd(J / diag, full_matrices=False)
        ur = u.T @ r
        rr = r @ r
        accepted = False
        while radius > 1e-300:
            dx = _trust_step(s, ur, vt, radius) / diag
            x_new = np.clip(x + dx, lo, hi)
            dx = x_new - x
            step_len = np.linalg.norm(diag * dx)
            if step_len == 0.0:
                break
            lin = r + J @ dx
            predicted = rr - lin @ lin
            r_new = np.asarray(residual_map(x_new), dtype=float)
            if np.all(np.isfinite(r_new)) and predicted > 0:
                ratio = (rr - r_new @ r_new) / predicted
            else:
                ratio = -1.0
            if ratio < 0.25:
                radius = 0.5 * min(radius, step_len)
            elif ratio > 0.75:
                radius = max(radius, 2.0 * step_len)
            if ratio > 1e-4:
                accepted = True
                break
        if not accepted:
            message = "trust region collapsed"
            break
        small_step = np.linalg.norm(dx) <= xtol * (np.linalg.norm(x) + xtol)
        x, r = x_new, r_new
        J = numeric_jacobian(residual_map, x, r, lower, upper, rel_step)
        if small_step:
            converged, message = True, "relative step below tolerance"
            break
    grad_norm = float(np.max(np.abs(J.T @ r))) if np.all(np.isfinite(J)) else math.inf
    return LMResult(x, r, J, iterations, converged, grad_norm, message)


# ---------------------------------------------------------------------------
# family models in reparameterized form

def linear_regressor(family, q):
    """Regressor multiplying the single parameter of a linear family."""
    family = Family(family)
    q = np.asarray(q, dtype=float)
    if family is Family.LOGNORMAL:
        return q - q * q
    if family is Family.CHISQUARE:
        return (q * LN2 + special.gammaln(q + 0.5) - 0.5 * LN_PI) / LN2
    raise FitError(f"{family} is not a linear family")


def _evenpower_log2_moment(q, k, verbatim):
    if verbatim:
        return (k * q * LN2 + special.gammaln(k * q + 0.5) - 0.5 * LN_PI) / LN2
    return (special.gammaln(k * q + 0.5) - q * special.gammaln(k + 0.5) + 0.5 * (q - 1.0) * LN_PI) / LN2


def _chisquarek_log2_moment(q, k, verbatim):
    chi = q * LN2 + special.gammaln(q + 0.5 * k) - special.gammaln(0.5 * k)
    shift = math.log(2.0 / k) if verbatim else -math.log(k)
    return (chi + q * shift) / LN2


def _neginvgamma_ln_moment(q, beta, c):
    log_k = np.log(special.kve(beta, 2.0 * c * np.sqrt(q))) - 2.0 * c * np.sqrt(q)
    log_k1 = math.log(special.kve(beta, 2.0 * c)) - 2.0 * c
    return ((1.0 - q) * (LN2 + beta * math.log(c) - special.gammaln(beta))
            + 0.5 * beta * np.log(q) + log_k - q * log_k1)


def model_curve(family, params, q, verbatim: bool = False) -> np.ndarray:
    """Centred Rényi function ``T(q) - q + 1`` of a family in its fitting parameters."""
    family = Family(family)
    q = np.asarray(q, dtype=float)
    p = [float(v) for v in params]
    if family in LINEAR:
        return p[0] * linear_regressor(family, q)
    if family is Family.LOGGAMMA:
        A, B = p
        return (np.log1p(-B * q) - q * math.log1p(-B)) / A
    if family is Family.LOGNEGINVGAMMA:
        A, B, C = p
        return -A * _neginvgamma_ln_moment(q, B, C)
    if family is Family.EVENPOWER:
        A, k = p
        return A * _evenpower_log2_moment(q, k, verbatim)
    if family is Family.CHISQUAREK:
        A, k = p
        return -A * _chisquarek_log2_moment(q, k, verbatim)
    raise FitError(f"no fitting model for {family}")


def _exp(x):
    # a near-zero slope maps to an astronomically large b; report inf rather than overflow
    return math.exp(x) if x < 709.0 else math.inf


def _natural(family, params, b):
    p = params
    out = {}
    if family is Family.LOGNORMAL:
        out["sigma2_Y_over_ln_b"] = 4.0 * p["a"]
        if b is not None:
            out["sigma2_Y"] = 4.0 * p["a"] * math.log(b)
    elif family in (Family.CHISQUARE, Family.EVENPOWER):
        if p["A"] < 0:
            out["b"] = _exp(-math.log(2.0) / (2.0 * p["A"]))
    elif family is Family.CHISQUAREK:
        if p["A"] > 0:
            out["b"] = _exp(math.log(2.0) / (2.0 * p["A"]))
    elif family is Family.LOGGAMMA:
        if p["B"] > 0:
            out["lam"] = 1.0 / p["B"]
        if p["A"] != 0:
            out["beta_over_ln_b"] = 2.0 / p["A"]
            if b is not None:
                out["beta"] = 2.0 * math.log(b) / p["A"]
    elif family is Family.LOGNEGINVGAMMA:
        out["b"] = _exp(1.0 / (2.0 * p["A"])) if p["A"] > 0 else math.nan
        out["beta"] = p["B"]
        out["lam"] = p["C"] ** 2
    if family in (Family.EVENPOWER, Family.CHISQUAREK):
        out["k"] = p["k"]
        out["k_nearest"] = float(max(1, round(p["k"])))
    return out


def _centred(curve: RenyiCurve):
    q = np.asarray(curve.q, dtype=float)
    y = np.asarray(curve.T, dtype=float) - q + 1.0
    if q.size < 2:
        raise FitError("at least two curve points are needed")
    return q, y


def fit_linear_family(curve: RenyiCurve, family, b: float | None = None) -> FitResult:
    """No-intercept least squares for the lognormal or chi-square family.

    If the scaling factor ``b`` is known, ``sigma2_Y`` is recovered as well.
    """
    family = Family(family)
    q, y = _centred(curve)
    x = linear_regressor(family, q)
    if not np.all(np.isfinite(x)):
        raise FitError("regressor is not finite on the q grid")
    xx = x @ x
    if xx == 0.0:
        raise FitError("degenerate (all-zero) regressor")
    coef = (x @ y) / xx
    resid = y - coef * x
    name = PARAM_NAMES[family][0]
    params = {name: float(coef)}
    rmse = float(np.sqrt(np.mean(resid**2)))
    return FitResult(family, params, _natural(family, params, b), rmse, resid, True, 0,
                     grad_norm=float(abs(x @ resid)))


def _nonlinear_setup(family, q, y, verbatim):
    """Bounds and a data-driven starting point for the families fitted by LM."""
    if family is Family.LOGGAMMA:
        bounds = ([-np.inf, 0.0], [np.inf, 1.0 / q.max()])
        return bounds, NONLINEAR_DEFAULTS[family]
    if family is Family.LOGNEGINVGAMMA:
        return ([0.0, 0.0, 0.0], [np.inf, np.inf, np.inf]), NONLINEAR_DEFAULTS[family]
    # one-parameter regression at k = 1 gives the scale of A
    reg = (_evenpower_log2_moment(q, 1.0, verbatim) if family is Family.EVENPOWER
           else -_chisquarek_log2_moment(q, 1.0, verbatim))
    a0 = float((reg @ y) / (reg @ reg)) if reg @ reg > 0 else 0.0
    if a0 == 0.0:
        a0 = -0.5 if family is Family.EVENPOWER else 0.5
    return ([-np.inf, 1e-6], [np.inf, np.inf]), (a0, 1.0)


def _starts(family, init, count, bounds):
    """Log-spaced multi-start values around ``init`` kept inside ``bounds``."""
    init = np.asarray(init, dtype=float)
    if count <= 1:
        return [init]
    out = [init]
    for f in np.logspace(-1, 1, count - 1):
        cand = init * f
        lower, upper = (np.asarray(v, dtype=float) for v in bounds)
        cand = np.where(cand >= upper, 0.5 * (init + upper) if np.all(np.isfinite(upper)) else cand, cand)
        cand = np.minimum(cand, np.where(np.isfinite(upper), upper * (1 - 1e-3), np.inf))
        cand = np.maximum(cand, np.where(np.isfinite(lower), lower + 1e-9, -np.inf))
        out.append(cand)
    return out


def fit_nonlinear_family(curve: RenyiCurve, family, init=None, verbatim: bool = False,
                         starts: int = 1, b: float | None = None, **lm_options) -> FitResult:
    """Fit a non-linear family by Levenberg-Marquardt, keeping the best of ``starts`` runs.

    Different starting values can land in different local minima; with
    ``starts > 1`` the default (or given) start is scaled by log-spaced
    factors in [0.1, 10] and the lowest-RMSE run is returned.
    """
    family = Family(family)
    if family not in NONLINEAR:
        raise FitError(f"{family} is not fitted by non-linear regression")
    if verbatim and family not in (Family.EVENPOWER, Family.CHISQUAREK):
        raise FitError("verbatim mode only applies to evenpower and chisquarek")
    q, y = _centred(curve)
    bounds, default = _nonlinear_setup(family, q, y, verbatim)
    init = default if init is None else init

    def residual_map(p):
        with np.errstate(all="ignore"):
            return model_curve(family, p, q, verbatim) - y

    best = None
    for start in _starts(family, init, starts, bounds):
        try:
            res = levenberg_marquardt(residual_map, start, bounds, **lm_options)
        except FitError:
            if best is None and starts <= 1:
                raise
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("no starting point lies inside the family's domain")
    params = dict(zip(PARAM_NAMES[family], (float(v) for v in best.x)))
    resid = -best.residuals  # data minus model
    rmse = float(np.sqrt(np.mean(resid**2)))
    return FitResult(family, params, _natural(family, params, b), rmse, resid, best.converged,
                     best.iterations, verbatim, best.grad_norm, {"message": best.message})


def fit_family(curve: RenyiCurve, family, **kwargs) -> FitResult:
    """Dispatch to the linear or non-linear fitter."""
    family = Family(family)
    if family in LINEAR:
        kwargs.pop("starts", None)
        kwargs.pop("init", None)
        kwargs.pop("verbatim", None)
        return fit_linear_family(curve, family, **kwargs)
    return fit_nonlinear_family(curve, family, **kwargs)
