"""Finite-support offspring laws and their derived scalar constants.

An offspring law is a probability vector (p_0, ..., p_d) over family
sizes with mean m > 1 (supercritical).  From it this module derives the
constants that organize everything else in the library:

* q      -- extinction probability, the smallest fixed point of the
            generating function f on [0, 1);
* gamma  -- f'(q), the geometric contraction rate of f-iterates at q;
* alpha  -- the Schroeder constant, the solution of gamma = m**-alpha
            (infinite when gamma = 0);
* j0     -- the minimal family size; j0 >= 2 iff alpha is infinite
            (the Boettcher case), in which case beta = log j0 / log m.

The regime tag (sub/critical/super Schroeder, or Boettcher) is decided
by the sign of gamma*m - 1, which is equivalent to alpha vs 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateError,
    MassSumToleranceError,
    NegativeMassError,
    OutsideUnitDiscError,
    SubcriticalError,
)

__all__ = [
    "Regime",
    "OffspringLaw",
    "Classification",
    "make_law",
    "pgf",
    "pgf_derivative",
    "pgf_second_derivative",
    "pgf_iterate",
    "extinction_probability",
    "classify",
]

# Input masses may come from config files with rounding; deviations of the
# total mass up to this are renormalized away, anything larger is rejected.
MASS_SUM_TOL = 1e-9
_DISC_TOL = 1e-12
_CRITICAL_TOL = 1e-12


class Regime(str, enum.Enum):
    SCHROEDER_SUB = "SchroederSub"            # alpha < 1
    SCHROEDER_CRITICAL = "SchroederCritical"  # alpha = 1
    SCHROEDER_SUPER = "SchroederSuper"        # 1 < alpha < inf
    BOETTCHER = "Boettcher"                   # alpha = inf (j0 >= 2)


@dataclass(frozen=True)
class OffspringLaw:
    """Validated, normalized offspring distribution. Immutable.

    ``probs[j]`` is the probability of a family of size j; trailing zeros
    are stripped so ``probs[-1] > 0``.
    """

    probs: np.ndarray

    def __post_init__(self):
        self.probs.flags.writeable = False

    @property
    def d(self) -> int:
        """Maximal family size."""
        return len(self.probs) - 1

    @property
    def mean(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)

    @property
    def support_min(self) -> int:
        """Smallest family size with positive probability (may be 0)."""
        return int(np.flatnonzero(self.probs)[0])

    def key(self) -> bytes:
        """Stable hashable identity, used for internal memoization."""
        return self.probs.tobytes()


@dataclass(frozen=True)
class Classification:
    """Scalar constants of a supercritical law.

    ``beta`` is only meaningful in the Boettcher regime and is ``None``
    otherwise.  ``alpha`` is ``math.inf`` exactly when ``gamma == 0``.
    """

    m: float
    q: float
    gamma: float
    alpha: float
    j0: int
    beta: float | None
    regime: Regime


def make_law(masses) -> OffspringLaw:
    """Validate and normalize a mass vector into an OffspringLaw.

    Raises NegativeMassError, MassSumToleranceError (|sum - 1| > 1e-9),
    DegenerateError (all mass at 0) or SubcriticalError (mean <= 1).
    """
    probs = np.asarray(masses, dtype=float).copy()
    if probs.ndim != 1 or len(probs) == 0:
        raise DegenerateError("mass vector must be a nonempty 1-d sequence")
    if np.any(probs < 0):
        raise NegativeMassError(f"negative mass at index {int(np.argmax(probs < 0))}")
    total = probs.sum()
    if abs(total - 1.0) > MASS_SUM_TOL:
        raise MassSumToleranceError(f"masses sum to {total!r}, beyond tolerance {MASS_SUM_TOL}")
    probs /= total
    # strip trailing zeros
    nz = np.flatnonzero(probs)
    if len(nz) == 0 or nz[-1] == 0:
        raise DegenerateError("all mass at family size 0")
    probs = probs[: nz[-1] + 1]
    mean = float(np.arange(len(probs)) @ probs)
    if mean <= 1.0:
        raise SubcriticalError(f"offspring mean {mean} <= 1; law must be supercritical")
    return OffspringLaw(probs)


def _check_disc(s) -> None:
    if abs(s) > 1.0 + _DISC_TOL:
        raise OutsideUnitDiscError(f"|s| = {abs(s)!r} > 1")


def _horner(probs: np.ndarray, s):
    """Evaluate sum_j probs[j] s^j without any domain check.

    Works for real or complex scalars and for numpy arrays of either.
    """
    acc = probs[-1] * (1.0 if not isinstance(s, np.ndarray) else np.ones_like(s))
    for p in probs[-2::-1]:
        acc = acc * s + p
    return acc


def pgf(law: OffspringLaw, s):
    """f(s) = sum_j p_j s^j for |s| <= 1 (real or complex)."""
    _check_disc(s)
    return _horner(law.probs, s)


def pgf_derivative(law: OffspringLaw, s):
    """f'(s) = sum_j j p_j s^(j-1) for |s| <= 1."""
    _check_disc(s)
    dcoef = law.probs[1:] * np.arange(1, len(law.probs))
    return _horner(dcoef, s)


def pgf_second_derivative(law: OffspringLaw, s):
    """f''(s); f''(1) enters the variance of the martingale limit W."""
    _check_disc(s)
    j = np.arange(2, len(law.probs))
    d2 = law.probs[2:] * j * (j - 1)
    if len(d2) == 0:
        return 0.0 * s
    return _horner(d2, s)


def pgf_iterate(law: OffspringLaw, n: int, s):
    """n-th functional iterate f_n(s), the generating function of Z_n.

    f_0 is the identity; scalar composition, O(n*d) work.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_disc(s)
    x = s
    for _ in range(n):
        x = _horner(law.probs, x)
    return x


def extinction_probability(law: OffspringLaw) -> float:
    """Smallest fixed point q of f on [0, 1).

    Monotone iteration from 0 (f is increasing and convex, so the iterates
    increase to q) followed by one Newton polish.  Always converges for a
    valid supercritical law.
    """
    if law.probs[0] == 0.0:
        return 0.0
    q = 0.0
    for _ in range(20000):
        nxt = float(_horner(law.probs, q))
        if nxt - q < 1e-14:
            q = nxt
            break
        q = nxt
    # one Newton step; f'(q) < 1 at the smallest fixed point so this is safe
    deriv = float(_horner(law.probs[1:] * np.arange(1, len(law.probs)), q))
    denom = deriv - 1.0
    if denom != 0.0:
        q = q - (float(_horner(law.probs, q)) - q) / denom
    return min(max(q, 0.0), 1.0)


def classify(law: OffspringLaw) -> Classification:
    """Derive (m, q, gamma, alpha, j0, beta, regime) for a law.

    alpha = -log(gamma)/log(m) when gamma > 0, else infinity; the regime
    boundary alpha = 1 is decided by |gamma*m - 1| <= 1e-12, equivalent to
    comparing gamma*m with 1.
    """
    m = law.mean
    q = extinction_probability(law)
    gamma = float(pgf_derivative(law, q))
    j0 = law.support_min
    if gamma == 0.0:
        # no mass at family sizes 0 or 1: Boettcher case, j0 >= 2
        alpha = math.inf
        beta = math.log(j0) / math.log(m)
        regime = Regime.BOETTCHER
    else:
        alpha = -math.log(gamma) / math.log(m)
        beta = None
        gm = gamma * m
        if abs(gm - 1.0) <= _CRITICAL_TOL:
            regime = Regime.SCHROEDER_CRITICAL
        elif gm > 1.0:
            regime = Regime.SCHROEDER_SUB
        else:
            regime = Regime.SCHROEDER_SUPER
    return Classification(m=m, q=q, gamma=gamma, alpha=alpha, j0=j0, beta=beta, regime=regime)
