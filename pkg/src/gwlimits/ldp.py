"""Cramer transforms and conditional large-deviation rate functions.

The raw ingredients are two cumulant generating functions and their
convex conjugates:

* Lambda(theta) = log E exp(theta Z_1), a finite smooth convex function
  for finite-support laws, conjugated by a safeguarded Newton solve of
  Lambda'(theta) = x (Lambda' is strictly increasing from the minimal to
  the maximal family size);
* Lambda_W(theta) = log E exp(theta W) for the martingale limit W:
  for theta <= 0 this is log phi(-theta); for theta > 0 it is computed
  by running the Abel equation upward, chi(theta) = f_n(chi(theta m^-n))
  from a quadratic seed, declaring +infinity once iterates blow past a
  guard (theta beyond the convergence abscissa).  Its conjugate is a
  bounded concave maximization with theta capped at the detected
  abscissa; values for x beyond Lambda_W'(abscissa-) are lower bounds.

The conditional rates then compose a caller-supplied inner rate with the
generating-function geometry of the conditioning lag k:

* Schroeder laws:  -log f_k(e^-I(x)) + b*B for linear growth,
  -log f_k(e^-I(x)) for the b = 0 form, the constant B for the
  remaining regime, with B = -log gamma when alpha <= 1 and log m when
  alpha > 1;
* Boettcher laws:  -b*G(f_k(e^-I(x))) and, for b = 0, -log f_k(e^-I(x)).

Growth regimes and b are always caller-supplied, never inferred from a
v_n sequence: limits along different subsequences may differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .asymptotics import _auto_depth, boettcher_G, w_laplace, w_second_moment
from .errors import BoettcherLawError, SchroederLawError
from .offspring import Classification, OffspringLaw, Regime, _horner, classify, pgf_iterate

__all__ = [
    "RateRegime",
    "RateTable",
    "make_regime",
    "cumulant",
    "cumulant_derivatives",
    "legendre",
    "rate_conditional",
    "w_cumulant",
    "w_cumulant_abscissa",
    "w_legendre",
    "rate_conditional_w",
    "rate_boettcher",
    "path_rate",
    "rate_table",
]

GROWTH_LINEAR = "linear"
GROWTH_SUBLINEAR = "sublinear"
GROWTH_SUPERLINEAR = "superlinear"

_DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class RateRegime:
    """Conditioning lag k, growth tag and the regime constants.

    ``b`` is the linear-growth coefficient of the Schroeder forms;
    ``boettcher_b`` the multiplicative coefficient of the Boettcher form
    (b = lim j0^n / v_n there).  ``B`` is -log gamma when alpha <= 1 and
    log m otherwise.
    """

    k: int
    growth: str
    B: float
    b: float = 0.0
    boettcher_b: float = 0.0

    def __post_init__(self):
        if self.growth not in (GROWTH_LINEAR, GROWTH_SUBLINEAR, GROWTH_SUPERLINEAR):
            raise ValueError(f"unknown growth tag {self.growth!r}")
        if self.b < 0 or self.boettcher_b < 0:
            raise ValueError("b must be >= 0")
        if not self.B > 0:
            raise ValueError("B must be > 0")


@dataclass(frozen=True)
class RateTable:
    """Rates on a grid of arguments; kind in {offspring, w-limit, boettcher}."""

    xs: np.ndarray
    rates: np.ndarray
    regime: RateRegime
    kind: str

    def __post_init__(self):
        self.xs.flags.writeable = False
        self.rates.flags.writeable = False


def make_regime(
    cls: Classification, k: int, growth: str, b: float = 0.0, boettcher_b: float = 0.0
) -> RateRegime:
    """Build a RateRegime with B derived from the classification."""
    if cls.regime in (Regime.SCHROEDER_SUB, Regime.SCHROEDER_CRITICAL):
        B = -math.log(cls.gamma)
    else:
        B = math.log(cls.m)
    return RateRegime(k=k, growth=growth, B=B, b=b, boettcher_b=boettcher_b)


def cumulant(law: OffspringLaw, theta: float) -> float:
    """Lambda(theta) = log sum_j p_j e^(theta j); finite for all real theta."""
    j = np.flatnonzero(law.probs)
    ell = theta * j + np.log(law.probs[j])
    mx = ell.max()
    return float(mx + math.log(np.exp(ell - mx).sum()))


def cumulant_derivatives(law: OffspringLaw, theta: float) -> tuple[float, float, float]:
    """(Lambda, Lambda', Lambda'') at theta, via tilted weights."""
    j = np.flatnonzero(law.probs).astype(float)
    ell = theta * j + np.log(law.probs[j.astype(int)])
    mx = ell.max()
    w = np.exp(ell - mx)
    z = w.sum()
    mean = float((j * w).sum() / z)
    var = float((j * j * w).sum() / z - mean * mean)
    return float(mx + math.log(z)), mean, var


def legendre(law: OffspringLaw, x: float, tol: float = 1e-12) -> float:
    """Lambda*(x) = sup_theta (theta x - Lambda(theta)).

    +infinity outside the support hull [j_min, d]; -log p at the
    endpoints; safeguarded Newton on Lambda'(theta) = x inside.  The
    result is clamped at 0 (theta = 0 always achieves 0).
    """
    lo_pt, hi_pt = law.support_min, law.d
    if x < lo_pt or x > hi_pt:
        return math.inf
    if x == lo_pt:
        return -math.log(float(law.probs[lo_pt]))
    if x == hi_pt:
        return -math.log(float(law.probs[hi_pt]))
    theta = 0.0
    lo, hi = -math.inf, math.inf
    for _ in range(200):
        lam, d1, d2 = cumulant_derivatives(law, theta)
        err = d1 - x
        if abs(err) < tol:
            break
        if err > 0:
            hi = theta
        else:
            lo = theta
        step = err / d2 if d2 > 0 else math.copysign(1.0, err)
        nxt = theta - step
        if not (lo < nxt < hi):
            # bisect within the bracket, expanding an open side geometrically
            if math.isinf(lo):
                nxt = min(hi, theta) - max(1.0, 2 * abs(theta))
            elif math.isinf(hi):
                nxt = max(lo, theta) + max(1.0, 2 * abs(theta))
            else:
                nxt = 0.5 * (lo + hi)
        theta = nxt
    lam = cumulant(law, theta)
    return max(theta * x - lam, 0.0)


def _f_k_of_exp_neg(law: OffspringLaw, k: int, inner: float) -> float:
    """f_k(e^-inner) with the inner rate possibly infinite."""
    s = math.exp(-inner) if inner < math.inf else 0.0
    return pgf_iterate(law, k, s)


def rate_conditional(
    law: OffspringLaw,
    cls: Classification,
    regime: RateRegime,
    inner_rate: Callable[[float], float],
    x: float,
) -> float:
    """Conditional rate for a Schroeder law, per the growth tag.

    linear:      -log f_k(e^-I(x)) + b B
    sublinear:   -log f_k(e^-I(x))
    superlinear: B (constant in x)
    """
    if cls.regime is Regime.BOETTCHER:
        raise BoettcherLawError("use rate_boettcher for Boettcher laws")
    if regime.growth == GROWTH_SUPERLINEAR:
        return regime.B
    val = _f_k_of_exp_neg(law, regime.k, inner_rate(x))
    base = -math.log(val) if val > 0.0 else math.inf
    if regime.growth == GROWTH_LINEAR:
        return base + regime.b * regime.B
    return base


_EW2_CACHE: dict[bytes, float] = {}
_ABSCISSA_CACHE: dict[bytes, float] = {}


def w_cumulant(law: OffspringLaw, theta: float, n_levels: int | None = None) -> float:
    """Lambda_W(theta) = log E exp(theta W); +infinity past the abscissa.

    theta <= 0 goes through the Laplace transform; theta > 0 runs the
    Abel iteration upward from the two-term expansion
    chi(u) ~ 1 + u + u^2 E(W^2)/2 at u = theta m^-n and declares
    divergence once an iterate exceeds 1e12.
    """
    if theta == 0.0:
        return 0.0
    if theta < 0.0:
        return math.log(w_laplace(law, -theta, n_levels))
    m = law.mean
    n = n_levels if n_levels is not None else _auto_depth(m)
    key = law.key()
    ew2 = _EW2_CACHE.get(key)
    if ew2 is None:
        ew2 = _EW2_CACHE[key] = w_second_moment(law)
    u = theta * m**-n
    x = 1.0 + u + 0.5 * u * u * ew2
    for _ in range(n):
        x = float(_horner(law.probs, x))
        if x > _DIVERGENCE_GUARD:
            return math.inf
    return math.log(x)


def w_cumulant_abscissa(law: OffspringLaw, hi_start: float = 1.0) -> float:
    """Largest theta with Lambda_W(theta) < infinity, located by bisection.

    Detected, not precomputed: doubles until divergence then bisects to
    ~1e-9 relative.  Memoized per law.
    """
    key = law.key()
    cached = _ABSCISSA_CACHE.get(key)
    if cached is not None:
        return cached
    hi = hi_start
    for _ in range(200):
        if math.isinf(w_cumulant(law, hi)):
            break
        hi *= 2.0
    else:
        raise RuntimeError("no divergence found; unexpected for finite-support laws")
    lo = hi / 2.0 if hi > hi_start else 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if math.isinf(w_cumulant(law, mid)):
            hi = mid
        else:
            lo = mid
    _ABSCISSA_CACHE[key] = lo
    return lo


def w_legendre(law: OffspringLaw, x: float, cls: Classification | None = None) -> float:
    """Lambda_W*(x) = sup_theta (theta x - Lambda_W(theta)).

    W >= 0 with P(W = 0) = q, so x < 0 gives +infinity and x = 0 gives
    -log q (infinite when q = 0).  For x > 0 the concave objective is
    maximized over theta in [lo, abscissa]; beyond the abscissa's slope
    the returned value is a lower bound of the true conjugate.
    """
    cls = cls or classify(law)
    if x < 0.0:
        return math.inf
    if x == 0.0:
        return -math.log(cls.q) if cls.q > 0.0 else math.inf
    theta_max = w_cumulant_abscissa(law)

    def neg_obj(theta: float) -> float:
        return w_cumulant(law, theta) - theta * x

    lo = -1.0
    while neg_obj(2 * lo) < neg_obj(lo) and lo > -2.0**40:
        lo *= 2.0
    res = minimize_scalar(neg_obj, bounds=(2 * lo, theta_max), method="bounded",
                          options={"xatol": 1e-10})
    return max(-float(res.fun), 0.0)


def rate_conditional_w(
    law: OffspringLaw, cls: Classification, regime: RateRegime, x: float
) -> float:
    """Conditional rate for W/W_n: rate_conditional with inner rate Lambda_W*."""
    if cls.regime is Regime.BOETTCHER:
        raise BoettcherLawError("use rate_boettcher for Boettcher laws")
    return rate_conditional(law, cls, regime, lambda y: w_legendre(law, y, cls), x)


def rate_boettcher(
    law: OffspringLaw,
    cls: Classification,
    k: int,
    b: float,
    inner_rate: Callable[[float], float],
    x: float,
) -> float:
    """Boettcher conditional rate: -b G(f_k(e^-I(x))), or -log f_k(e^-I(x)) when b = 0.

    G is only defined on (0, 1]; an infinite inner rate sends f_k(e^-I)
    to 0 (p_0 = 0 here), where the rate is +infinity.
    """
    if cls.regime is not Regime.BOETTCHER:
        raise SchroederLawError("rate_boettcher requires a Boettcher law")
    if b < 0:
        raise ValueError("b must be >= 0")
    val = _f_k_of_exp_neg(law, k, inner_rate(x))
    if val <= 0.0:
        return math.inf
    if b == 0.0:
        return -math.log(val)
    return -b * boettcher_G(law, val, cls=cls).value


def path_rate(
    law: OffspringLaw,
    cls: Classification,
    regime: RateRegime,
    breakpoints,
) -> float:
    """Action of a piecewise-linear path on [0, 1]: sum of length * rate(slope).

    ``breakpoints`` is a sequence of (t, y) pairs with increasing t
    covering [0, 1]; a path not anchored at y(0) = 0 costs +infinity.
    The integrand is the linear-growth conditional rate with inner rate
    Lambda* (the +bB sign convention of the one-point rates is kept).
    """
    pts = sorted((float(t), float(y)) for t, y in breakpoints)
    if not pts or pts[0][0] != 0.0 or pts[-1][0] != 1.0:
        raise ValueError("breakpoints must span t = 0 to t = 1")
    if pts[0][1] != 0.0:
        return math.inf
    total = 0.0
    for (t0, y0), (t1, y1) in zip(pts, pts[1:]):
        dt = t1 - t0
        if dt <= 0:
            raise ValueError("breakpoint times must be strictly increasing")
        slope = (y1 - y0) / dt
        seg = rate_conditional(law, cls, regime, lambda v: legendre(law, v), slope)
        if math.isinf(seg):
            return math.inf
        total += dt * seg
    return total


def rate_table(
    law: OffspringLaw,
    cls: Classification,
    regime: RateRegime,
    kind: str,
    xs,
) -> RateTable:
    """Evaluate one of the named rate functions on a grid.

    kind: "offspring" (inner Lambda*), "w" (inner Lambda_W*), or
    "boettcher" (inner Lambda*, Boettcher composition using
    regime.boettcher_b).
    """
    xs = np.asarray(xs, dtype=float)
    if kind == "offspring":
        vals = [rate_conditional(law, cls, regime, lambda v: legendre(law, v), x) for x in xs]
    elif kind == "w":
        vals = [rate_conditional_w(law, cls, regime, x) for x in xs]
    elif kind == "boettcher":
        vals = [
            rate_boettcher(law, cls, regime.k, regime.boettcher_b, lambda v: legendre(law, v), x)
            for x in xs
        ]
    else:
        raise ValueError(f"unknown rate kind {kind!r}")
    return RateTable(xs=xs, rates=np.array(vals), regime=regime, kind=kind)
