"""Special functions and random streams used by the model formulas.

The gamma, digamma and Bessel-K evaluations delegate to :mod:`scipy.special`
(AMOS / Cephes) behind argument checks; the accuracy contracts are pinned by
the recurrence and closed-form tests in ``tests/test_specfun.py``.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "RandomStream",
    "bessel_k",
    "bessel_k_prime",
    "digamma",
    "ln_gamma",
    "normal_sample",
]


def _as_output(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def ln_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("ln_gamma requires x > 0")
    return _as_output(special.gammaln(x))


def digamma(x):
    """Logarithmic derivative of the gamma function for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("digamma requires x > 0")
    return _as_output(special.psi(x))


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, K_nu(x).

    Negative orders are rejected rather than folded: callers that need
    K_{-nu} should pass ``abs(nu)``.
    """
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(nu >= 0)):
        raise DomainError("bessel_k requires nu >= 0; use K_{-nu} = K_nu")
    if np.any(~(x > 0)):
        raise DomainError("bessel_k requires x > 0")
    return _as_output(special.kv(nu, x))


def bessel_k_prime(nu, x):
    """d/dx K_nu(x) = -(K_{nu-1}(x) + K_{nu+1}(x)) / 2."""
    nu = np.asarray(nu, dtype=float)
    lower = bessel_k(np.abs(nu - 1.0), x)
    upper = bessel_k(nu + 1.0, x)
    return _as_output(-0.5 * (np.asarray(lower) + np.asarray(upper)))


class RandomStream:
    """Seeded, splittable source of normal variates.

    Backed by a PCG64 bit generator seeded through :class:`numpy.random.SeedSequence`,
    so sub-streams obtained with :meth:`spawn` are independent by construction
    and reproducible from the root seed alone.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            seed = int(seed)
            if not 0 <= seed < 2**64:
                raise DomainError("seed must be a 64-bit unsigned integer")
            self._seq = np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self) -> int:
        return int(self._seq.entropy)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, n: int) -> list["RandomStream"]:
        """Return ``n`` independent child streams.

        Children depend only on the root seed and the spawn order, not on how
        many variates were drawn from the parent.
        """
        return [RandomStream(child) for child in self._seq.spawn(n)]

    def normal(self, n: int) -> np.ndarray:
        return normal_sample(self, n)


def normal_sample(stream: RandomStream, n: int) -> np.ndarray:
    """Draw ``n`` standard normal variates, advancing ``stream``."""
    n = int(n)
    if n < 1:
        raise DomainError("normal_sample requires n >= 1")
    return stream.generator.standard_normal(n)
