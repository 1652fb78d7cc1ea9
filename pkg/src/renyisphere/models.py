"""Closed-form Rényi functions and multifractal spectra of cascade models.

Every family is described by the log-moment ``M(q) = log_b E Lambda^q`` of its
mother field. The Rényi function of the limit measure on the sphere is then

    T(q) = q - 1 - M(q) / 2,

the singularity exponent is ``alpha(q) = T'(q)`` (computed from the analytic
derivative of ``M``) and the spectrum is ``f = q * alpha - T``.

Families
--------
``lognormal``       Lambda = exp(Y - sigma2_Y / 2), Y Gaussian
``loggamma``        Lambda = exp(Z - c_Z), Z gamma(beta, rate lambda)
``logneginvgamma``  Lambda = exp(-1/Z - c_U), Z gamma(beta, rate lambda)
``chisquare``       Lambda = Y**2, Y unit Gaussian
``chisquareeps``    Lambda = (1 - eps) Y**2 + eps
``evenpower``       Lambda = Y**(2k)
``chisquarek``      Lambda proportional to a chi-square(k) field

``evenpower`` and ``chisquarek`` come in two renderings. The default
(``verbatim=False``) rescales the mother field so that E Lambda = 1:
Y has variance ``(sqrt(pi) / (2**k Gamma(k + 1/2)))**(1/k)`` for ``evenpower``
and Lambda = W / k for ``chisquarek``. With ``verbatim=True`` the published
closed forms are reproduced literally (unit-variance Y, Lambda = 2 W / k),
which gives T(1) != 0 for ``chisquarek``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate, special

from .errors import DomainError, MomentDomainError
from .specfun import bessel_k, digamma, ln_gamma

__all__ = [
    "Check",
    "Family",
    "ModelSpec",
    "RenyiCurve",
    "SpectrumCurve",
    "ValidityReport",
    "check_conditions",
    "evaluate_curves",
    "mother_variance",
    "moment_log",
    "moment_log_derivative",
    "renyi_T",
    "spectrum_point",
]

LN_PI = math.log(math.pi)
LN2 = math.log(2.0)
# below this argument K_beta(z) is replaced by its leading small-z term
_BESSEL_SMALL_Z = 1e-6


class Family(str, Enum):
    LOGNORMAL = "lognormal"
    LOGGAMMA = "loggamma"
    LOGNEGINVGAMMA = "logneginvgamma"
    CHISQUARE = "chisquare"
    EVENPOWER = "evenpower"
    CHISQUAREK = "chisquarek"
    CHISQUAREEPS = "chisquareeps"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModelSpec:
    """A model family with its parameters and the scaling factor ``b``."""

    family: Family
    b: float = 2.0
    sigma2_Y: float | None = None
    lam: float | None = None
    beta: float | None = None
    k: float | None = None
    eps: float | None = None
    verbatim: bool = False

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if not self.b > 1:
            raise DomainError("scaling factor b must exceed 1")
        need = {
            Family.LOGNORMAL: ("sigma2_Y",),
            Family.LOGGAMMA: ("lam", "beta"),
            Family.LOGNEGINVGAMMA: ("lam", "beta"),
            Family.CHISQUARE: (),
            Family.EVENPOWER: ("k",),
            Family.CHISQUAREK: ("k",),
            Family.CHISQUAREEPS: ("eps",),
        }[family]
        for name in need:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise DomainError(f"{family} requires a positive {name}")
        if family is Family.LOGGAMMA and not self.lam > 1:
            # c_Z = -beta ln(1 - 1/lambda) needs lambda > 1
            raise DomainError("loggamma requires lambda > 1 for E Lambda to exist")
        if family is Family.CHISQUAREEPS and not self.eps < 1:
            raise DomainError("chisquareeps requires eps in (0, 1)")
        if self.verbatim and family not in (Family.EVENPOWER, Family.CHISQUAREK):
            raise DomainError("verbatim mode only applies to evenpower and chisquarek")

    # convenience constructors -------------------------------------------------
    @classmethod
    def lognormal(cls, b=2.0, sigma2_Y=1.0):
        return cls(Family.LOGNORMAL, b, sigma2_Y=sigma2_Y)

    @classmethod
    def loggamma(cls, b=2.0, lam=3.0, beta=2.0):
        return cls(Family.LOGGAMMA, b, lam=lam, beta=beta)

    @classmethod
    def logneginvgamma(cls, b=2.0, lam=3.0, beta=2.0):
        return cls(Family.LOGNEGINVGAMMA, b, lam=lam, beta=beta)

    @classmethod
    def chisquare(cls, b=2.0):
        return cls(Family.CHISQUARE, b)

    @classmethod
    def evenpower(cls, b=2.0, k=2, verbatim=False):
        return cls(Family.EVENPOWER, b, k=k, verbatim=verbatim)

    @classmethod
    def chisquarek(cls, b=2.0, k=2, verbatim=False):
        return cls(Family.CHISQUAREK, b, k=k, verbatim=verbatim)

    @classmethod
    def chisquareeps(cls, b=2.0, eps=0.5):
        return cls(Family.CHISQUAREEPS, b, eps=eps)

    # derived constants --------------------------------------------------------
    @property
    def ln_b(self) -> float:
        return math.log(self.b)

    @property
    def c_Z(self) -> float:
        """Centering constant of the log-gamma mother field."""
        return -self.beta * math.log1p(-1.0 / self.lam)

    @property
    def c_U(self) -> float:
        """Centering constant of the log-negative-inverse-gamma mother field."""
        z = 2.0 * math.sqrt(self.lam)
        return (LN2 + 0.5 * self.beta * math.log(self.lam) + _log_bessel_k(self.beta, z)
                - ln_gamma(self.beta))

    @property
    def gaussian_variance(self) -> float:
        """Variance of the Gaussian field underlying a simulable mother."""
        if self.family is Family.LOGNORMAL:
            return float(self.sigma2_Y)
        if self.family is Family.EVENPOWER and not self.verbatim:
            k = self.k
            return math.exp((0.5 * LN_PI - k * LN2 - ln_gamma(k + 0.5)) / k)
        if self.family in (Family.LOGGAMMA, Family.LOGNEGINVGAMMA):
            raise DomainError(f"{self.family} is not built from a Gaussian field")
        return 1.0

    def describe(self) -> dict:
        out = {"family": self.family.value, "b": self.b}
        for name in ("sigma2_Y", "lam", "beta", "k", "eps"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.family in (Family.EVENPOWER, Family.CHISQUAREK):
            out["verbatim"] = self.verbatim
        return out


@dataclass(frozen=True)
class RenyiCurve:
    q: np.ndarray
    T: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if q.shape != T.shape or q.ndim != 1:
            raise ValueError("q and T must be 1-d arrays of equal length")
        if q.size > 1 and np.any(np.diff(q) <= 0):
            raise ValueError("q grid must be strictly increasing")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "T", T)


@dataclass(frozen=True)
class SpectrumCurve:
    q: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.q, self.alpha, self.f)]
        if len({a.shape for a in arrays}) != 1:
            raise ValueError("q, alpha and f must have equal length")
        for name, a in zip(("q", "alpha", "f"), arrays):
            object.__setattr__(self, name, a)


# ---------------------------------------------------------------------------
# log-moments in natural-log units

def _log_bessel_k(nu, z):
    z = np.asarray(z, dtype=float)
    out = np.log(special.kve(nu, z)) - z
    return float(out) if out.ndim == 0 else out


def _neginvgamma_log_mgf(lam, beta, q):
    """ln E exp(-q / Z) for Z ~ gamma(beta, rate lam), q >= 0."""
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    z = 2.0 * np.sqrt(q * lam)
    big = z >= _BESSEL_SMALL_Z
    if np.any(big):
        zb = z[big]
        out[big] = (LN2 + 0.5 * beta * np.log(q[big] * lam) + _log_bessel_k(beta, zb)
                    - ln_gamma(beta))
    small = (~big) & (q > 0)
    if np.any(small):
        # K_beta(z) ~ Gamma(beta) (z/2)^-beta / 2 (beta > 0); next term is O(z^2) or O(z^(2 beta))
        zs = z[small]
        log_k = ln_gamma(beta) - LN2 - beta * np.log(zs / 2)
        out[small] = LN2 + 0.5 * beta * np.log(q[small] * lam) + log_k - ln_gamma(beta)
    return out


def _neginvgamma_log_mgf_deriv(lam, beta, q):
    q = np.asarray(q, dtype=float)
    z = 2.0 * np.sqrt(q * lam)
    ratio = (special.kve(abs(beta - 1.0), z) + special.kve(beta + 1.0, z)) / special.kve(beta, z)
    # d/dq ln K_beta(z) = K'(z)/K(z) * dz/dq with dz/dq = sqrt(lam / q)
    return 0.5 * beta / q - 0.5 * np.sqrt(lam / q) * ratio


def _eps_log_moment(eps, q):
    """ln E((1 - eps) Y^2 + eps)^q, Y ~ N(0, 1)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return np.array([math.log(_eps_expect(eps, qq, 0)) for qq in q])


def _eps_expect(eps, q, log_power):
    """E[X^q (ln X)^log_power] for X = (1 - eps) Y^2 + eps by adaptive quadrature."""
    def integrand(y):
        x = (1.0 - eps) * y * y + eps
        return x**q * math.log(x) ** log_power * math.exp(-0.5 * y * y)

    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, 8.0), (8.0, np.inf)):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return 2.0 * total / math.sqrt(2.0 * math.pi)


def _eps_log_moment_deriv(eps, q):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return np.array([_eps_expect(eps, qq, 1) / _eps_expect(eps, qq, 0) for qq in q])


def _check_domain(spec: ModelSpec, q: np.ndarray) -> None:
    fam = spec.family
    if fam is Family.LOGGAMMA and np.any(q >= spec.lam):
        raise MomentDomainError(f"loggamma moments require q < lambda = {spec.lam}")
    if fam is Family.LOGNEGINVGAMMA and np.any(q < 0):
        raise MomentDomainError("logneginvgamma moments require q >= 0")
    if fam is Family.CHISQUARE and np.any(q <= -0.5):
        raise MomentDomainError("chisquare moments require q > -1/2")
    if fam is Family.EVENPOWER and np.any(spec.k * q <= -0.5):
        raise MomentDomainError("evenpower moments require k q > -1/2")
    if fam is Family.CHISQUAREK and np.any(q <= -0.5 * spec.k):
        raise MomentDomainError("chisquarek moments require q > -k/2")
    if not np.all(np.isfinite(q)):
        raise MomentDomainError("q must be finite")


def _ln_moment(spec: ModelSpec, q: np.ndarray) -> np.ndarray:
    fam = spec.family
    if fam is Family.LOGNORMAL:
        return 0.5 * spec.sigma2_Y * (q * q - q)
    if fam is Family.LOGGAMMA:
        return -q * spec.c_Z - spec.beta * np.log1p(-q / spec.lam)
    if fam is Family.LOGNEGINVGAMMA:
        return -q * spec.c_U + _neginvgamma_log_mgf(spec.lam, spec.beta, q)
    if fam is Family.CHISQUARE:
        return q * LN2 + special.gammaln(q + 0.5) - 0.5 * LN_PI
    if fam is Family.EVENPOWER:
        k = spec.k
        if spec.verbatim:
            return k * q * LN2 + special.gammaln(k * q + 0.5) - 0.5 * LN_PI
        return special.gammaln(k * q + 0.5) - q * ln_gamma(k + 0.5) + 0.5 * (q - 1.0) * LN_PI
    if fam is Family.CHISQUAREK:
        k = spec.k
        chi = q * LN2 + special.gammaln(q + 0.5 * k) - ln_gamma(0.5 * k)
        return chi + q * (math.log(2.0 / k) if spec.verbatim else -math.log(k))
    if fam is Family.CHISQUAREEPS:
        return _eps_log_moment(spec.eps, q)
    raise AssertionError(fam)


def _ln_moment_deriv(spec: ModelSpec, q: np.ndarray) -> np.ndarray:
    fam = spec.family
    if fam is Family.LOGNORMAL:
        return 0.5 * spec.sigma2_Y * (2.0 * q - 1.0)
    if fam is Family.LOGGAMMA:
        return -spec.c_Z + spec.beta / (spec.lam - q)
    if fam is Family.LOGNEGINVGAMMA:
        return -spec.c_U + _neginvgamma_log_mgf_deriv(spec.lam, spec.beta, q)
    if fam is Family.CHISQUARE:
        return LN2 + special.psi(q + 0.5)
    if fam is Family.EVENPOWER:
        k = spec.k
        if spec.verbatim:
            return k * LN2 + k * special.psi(k * q + 0.5)
        return k * special.psi(k * q + 0.5) - ln_gamma(k + 0.5) + 0.5 * LN_PI
    if fam is Family.CHISQUAREK:
        k = spec.k
        shift = math.log(2.0 / k) if spec.verbatim else -math.log(k)
        return LN2 + special.psi(q + 0.5 * k) + shift
    if fam is Family.CHISQUAREEPS:
        return _eps_log_moment_deriv(spec.eps, q)
    raise AssertionError(fam)


def _out(value, scalar):
    value = np.asarray(value, dtype=float)
    return float(value.reshape(-1)[0]) if scalar else value


def moment_log(spec: ModelSpec, q):
    """``log_b E Lambda^q`` of the mother field, vectorized over ``q``."""
    q_arr = np.asarray(q, dtype=float)
    scalar = q_arr.ndim == 0
    q_arr = np.atleast_1d(q_arr)
    _check_domain(spec, q_arr)
    value = np.where(q_arr == 0, 0.0, _ln_moment(spec, q_arr) / spec.ln_b)
    return _out(value, scalar)


def moment_log_derivative(spec: ModelSpec, q):
    """d/dq ``log_b E Lambda^q``."""
    q_arr = np.asarray(q, dtype=float)
    scalar = q_arr.ndim == 0
    q_arr = np.atleast_1d(q_arr)
    _check_domain(spec, q_arr)
    if spec.family is Family.LOGNEGINVGAMMA and np.any(q_arr <= 0):
        raise MomentDomainError("logneginvgamma exponent requires q > 0")
    return _out(_ln_moment_deriv(spec, q_arr) / spec.ln_b, scalar)


def renyi_T(spec: ModelSpec, q):
    """Rényi function ``T(q) = q - 1 - moment_log(q) / 2``."""
    T = np.asarray(q, dtype=float) - 1.0 - 0.5 * np.asarray(moment_log(spec, q))
    return float(T) if T.ndim == 0 else T


def spectrum_point(spec: ModelSpec, q):
    """Singularity exponent ``alpha = T'(q)`` and spectrum ``f = q alpha - T``."""
    alpha = 1.0 - 0.5 * np.asarray(moment_log_derivative(spec, q))
    T = np.asarray(renyi_T(spec, q))
    f = np.asarray(q, dtype=float) * alpha - T
    if alpha.ndim == 0:
        return float(alpha), float(f)
    return alpha, f


def evaluate_curves(spec: ModelSpec, q_grid) -> tuple[RenyiCurve, SpectrumCurve]:
    q = np.asarray(q_grid, dtype=float)
    T = np.atleast_1d(renyi_T(spec, q))
    alpha, f = spectrum_point(spec, q)
    prov = {"kind": "theoretical", "model": spec.describe()}
    return (RenyiCurve(q, T, prov),
            SpectrumCurve(q, np.atleast_1d(alpha), np.atleast_1d(f), prov))


# ---------------------------------------------------------------------------
# convergence conditions

@dataclass(frozen=True)
class Check:
    name: str
    bound: float
    actual: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ValidityReport:
    family: Family
    checks: tuple[Check, ...]

    @property
    def satisfied(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "satisfied": self.satisfied,
            "checks": [
                {"name": c.name, "bound": c.bound, "actual": c.actual, "passed": c.passed, "note": c.note}
                for c in self.checks
            ],
        }


def mother_variance(spec: ModelSpec) -> float:
    """Variance of the mean-one mother field.

    ``evenpower`` and ``chisquarek`` always use the mean-one rescaling, since
    the convergence conditions presuppose E Lambda = 1.
    """
    fam = spec.family
    if fam is Family.LOGNORMAL:
        return math.expm1(spec.sigma2_Y)
    if fam is Family.LOGGAMMA:
        lam, beta = spec.lam, spec.beta
        if lam <= 2:
            return math.inf
        return math.exp(2 * beta * math.log1p(-1 / lam) - beta * math.log1p(-2 / lam)) - 1.0
    if fam is Family.LOGNEGINVGAMMA:
        return math.exp(-2 * spec.c_U + float(_neginvgamma_log_mgf(spec.lam, spec.beta, 2.0))) - 1.0
    if fam is Family.CHISQUARE:
        return 2.0
    if fam is Family.CHISQUAREEPS:
        return 2.0 * (1.0 - spec.eps) ** 2
    if fam is Family.EVENPOWER:
        k = spec.k
        return math.exp(0.5 * LN_PI + ln_gamma(2 * k + 0.5) - 2 * ln_gamma(k + 0.5)) - 1.0
    if fam is Family.CHISQUAREK:
        return 2.0 / spec.k
    raise AssertionError(fam)


def check_conditions(spec: ModelSpec, C: float = 1.0, gamma: float = 1.0,
                     extended: bool = False) -> ValidityReport:
    """Evaluate the sufficient conditions for convergence of the cascade measures.

    ``C`` and ``gamma`` are the constants of the covariance bound
    ``|rho(r)| <= C exp(-gamma r)``. With ``extended=True`` the chi-square
    family also gets the stronger scaling bound that secures moments for
    q in [1, 4]. Failures are reported, never raised.
    """
    fam = spec.family
    b = spec.b
    checks = [Check("covariance_constants_positive", 0.0, float(min(C, gamma)), C > 0 and gamma > 0,
                    "C and gamma of |rho(r)| <= C exp(-gamma r)")]

    if fam is Family.LOGNORMAL:
        bound = math.exp(spec.sigma2_Y / 3.0)
        checks.append(Check("lognormal_scaling", bound, b, b > bound, "b > exp(sigma2_Y / 3)"))
    elif fam in (Family.LOGGAMMA, Family.LOGNEGINVGAMMA):
        lam, beta = spec.lam, spec.beta
        checks.append(Check("lambda_gt_2", 2.0, lam, lam > 2, "lambda > 2"))
        if lam > 2:
            bound = (1.0 + lam**-2 / (1.0 - 2.0 / lam)) ** (beta / 2.0)
        else:
            bound = math.inf
        checks.append(Check("gamma_parameter_set", bound, b, b > bound,
                            "b > (1 + lambda^-2 / (1 - 2/lambda))^(beta/2)"))
        if fam is Family.LOGNEGINVGAMMA:
            log_arg = (ln_gamma(beta) + (beta / 2 - 1) * LN2 + _log_bessel_k(beta, 2 * math.sqrt(2 * lam))
                       - 0.5 * beta * math.log(lam) - 2 * _log_bessel_k(beta, 2 * math.sqrt(lam)))
            bound = math.exp(0.5 * log_arg)
            checks.append(Check("bessel_scaling", bound, b, b > bound,
                                "b > (Gamma(beta) 2^(beta/2-1) K(2 sqrt(2 lam)) / (lam^(beta/2) K(2 sqrt(lam))^2))^(1/2)"))
    else:
        s2 = mother_variance(spec)
        bound = max((1.0 + s2) ** (1.0 / 3.0), math.exp(s2 * C / 3.0))
        checks.append(Check("moment_scaling", bound, b, b > bound,
                            f"b > max((1 + var)^(1/3), exp(var C / 3)), var = {s2:.12g}"))
        if extended and fam is Family.CHISQUARE:
            # printed exponent carries a stray leading sigma; the derivation gives max(.,1)^4 / 3
            bound = math.exp(max(math.sqrt(s2) * C, 1.0) ** 4 / 3.0)
            checks.append(Check("fourth_moment_scaling", bound, b, b > bound,
                                "q in [1, 4] extension: b > exp(max(sigma_Lambda C, 1)^4 / 3)"))
    return ValidityReport(fam, tuple(checks))
