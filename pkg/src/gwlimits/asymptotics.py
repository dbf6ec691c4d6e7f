"""Asymptotic functionals of a supercritical law.

Schroeder side (gamma > 0):

* Q_n(s) = (f_n(s) - q) / gamma^n and its limit Q, which satisfies the
  functional equation Q(f(s)) = gamma Q(s) with Q(q) = 0;
* the power-series coefficients q_j of Q, recovered as the limits of
  P(Z_n = j) / gamma^n;
* the local-limit scale sequence A_n of the point probabilities
  P(Z_n = v_n):  gamma^n v^(alpha-1) below criticality, k_n gamma^n at
  criticality (k_n = floor(n - log v / log m + 1)), m^-n above;
* the Karlin-McGregor diagnostic K(s) = s^alpha Q(phi(s)).

Both sides:

* phi(u) = E exp(-u W), the Laplace transform of the martingale limit,
  computed by running the Abel equation phi(m u) = f(phi(u)) downward:
  phi(u) = f_n(seed(u m^-n)) with a quadratic Taylor seed
  seed(v) = 1 - v + v^2 E(W^2)/2.  The seed makes the truncation error
  O(m^-2n) instead of O(m^-n), and the depth is chosen so m^n ~ 3e6,
  away from both the truncation floor and the float-quantization wall
  near s = 1 (an exp(-u m^-n) seed at a fixed depth of 40 silently
  collapses to the fixed point 1 once m^-n approaches machine epsilon).

Boettcher side (minimal family size j0 >= 2):

* the growth function G(s) = lim j0^-n log f_n(s), computed from the
  telescoped series
      G(s) = log s + sum_{i>=0} j0^-(i+1) * h(f_i(s)),
      h(t) = log p_{j0} + log(1 + sum_{j>j0} (p_j/p_{j0}) t^(j-j0)),
  which follows from log f(t) = j0 log t + h(t).  The series converges
  geometrically and the residual tail is closed analytically.
* a log-space iterator for log f_n(s), usable far past the underflow
  point of f_n(s) itself (needed as the independent oracle for G).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoettcherLawError,
    NoConvergenceError,
    SAtOrBeyondOneError,
    SOutOfRangeError,
    SchroederLawError,
    VBeyondCapError,
    VTooLargeError,
)
from .gen_dist import GenerationPmf, zn_pmf_compose
from .offspring import (
    Classification,
    OffspringLaw,
    Regime,
    _horner,
    classify,
    pgf_second_derivative,
)

__all__ = [
    "QEvaluation",
    "QCoefficients",
    "ScaleSequence",
    "GSeriesEval",
    "q_n",
    "q_limit",
    "q_coefficients",
    "a_scale",
    "theorem2_scale",
    "local_limit_ratio",
    "sup_tail_local",
    "scale_sequence",
    "w_second_moment",
    "w_laplace",
    "km_function",
    "boettcher_G",
    "log_pgf_iterate",
]

# floor(x) with a one-sided nudge so exact-power arguments like
# log(32)/log(2) land on the intended integer despite float rounding
_FLOOR_NUDGE = 1e-9


@dataclass(frozen=True)
class QEvaluation:
    """A value of Q_n or of the limit Q at one point."""

    s: float
    value: float
    n_used: int
    residual: float


@dataclass(frozen=True)
class QCoefficients:
    """q_1..q_J estimated at depth n, with the change from depth n-1."""

    values: np.ndarray           # values[j-1] ~ q_j
    n: int
    diagnostic: float            # max |q_j(n) - q_j(n-1)|

    def __post_init__(self):
        self.values.flags.writeable = False


@dataclass(frozen=True)
class ScaleSequence:
    """Rows (n, v_n, A_n, k_n); k_n is None outside the critical regime."""

    regime: Regime
    entries: tuple


@dataclass(frozen=True)
class GSeriesEval:
    s: float
    value: float
    terms_used: int
    truncation_bound: float


def _require_schroeder(cls: Classification, what: str) -> None:
    if cls.gamma == 0.0:
        raise BoettcherLawError(f"{what} requires a Schroeder law (gamma > 0)")


def _require_boettcher(cls: Classification, what: str) -> None:
    if cls.gamma != 0.0:
        raise SchroederLawError(f"{what} requires a Boettcher law (no mass at sizes 0, 1)")


def q_n(law: OffspringLaw, n: int, s: float, cls: Classification | None = None) -> QEvaluation:
    """Q_n(s) = (f_n(s) - q) / gamma^n for 0 <= s < 1."""
    cls = cls or classify(law)
    _require_schroeder(cls, "q_n")
    if not 0.0 <= s < 1.0:
        raise SAtOrBeyondOneError(f"s = {s} not in [0, 1)")
    x = s
    for _ in range(n):
        x = _horner(law.probs, x)
    return QEvaluation(s=s, value=(x - cls.q) / cls.gamma**n, n_used=n, residual=math.nan)


def q_limit(
    law: OffspringLaw,
    s: float,
    tol: float = 1e-12,
    n_max: int = 400,
    cls: Classification | None = None,
) -> QEvaluation:
    """Q(s) = lim Q_n(s), iterated until the successive change drops below tol.

    The n-th iterate costs one extra f evaluation; the orbit and the power
    gamma^n are carried along.  Raises NoConvergenceError if n_max is hit
    while the residual is still above tol (reported, never guessed).
    """
    cls = cls or classify(law)
    _require_schroeder(cls, "q_limit")
    if not 0.0 <= s < 1.0:
        raise SAtOrBeyondOneError(f"s = {s} not in [0, 1)")
    x = s
    gpow = 1.0
    prev = x - cls.q
    for n in range(1, n_max + 1):
        x = _horner(law.probs, x)
        gpow *= cls.gamma
        cur = (x - cls.q) / gpow
        resid = abs(cur - prev)
        if resid < tol:
            return QEvaluation(s=s, value=cur, n_used=n, residual=resid)
        prev = cur
    raise NoConvergenceError(f"Q({s}) residual {resid!r} above {tol} after {n_max} iterations")


def q_coefficients(law: OffspringLaw, J: int, n: int, cls: Classification | None = None) -> QCoefficients:
    """q_j ~ P(Z_n = j) / gamma^n for j = 1..J.

    gamma^n is accumulated by repeated multiplication, matching the order
    in which the composition path accumulates P(Z_n = 1) = p_1^n; for
    p_0 = 0 laws this makes q_1 == 1 bit-exactly.
    """
    cls = cls or classify(law)
    _require_schroeder(cls, "q_coefficients")
    if n < 1 or J < 1:
        raise ValueError("need n >= 1 and J >= 1")
    pm_prev = zn_pmf_compose(law, n - 1, J, warn_tail=False)
    pm = zn_pmf_compose(law, n, J, warn_tail=False)
    gpow_prev = 1.0
    for _ in range(n - 1):
        gpow_prev *= cls.gamma
    gpow = gpow_prev * cls.gamma
    values = pm.coeffs[1 : J + 1] / gpow
    prev = pm_prev.coeffs[1 : J + 1] / gpow_prev
    return QCoefficients(values=values, n=n, diagnostic=float(np.max(np.abs(values - prev))))


def a_scale(cls: Classification, n: int, v: int) -> float:
    """Local-limit scale A_n for P(Z_n = v), per regime.

    Theorem-1 scales with the gamma substitution applied uniformly when
    p_0 > 0.  Requires 1 <= v <= m^n (up to 1e-9 relative slack).
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    if v > cls.m**n * (1.0 + 1e-9):
        raise VTooLargeError(f"v = {v} exceeds m^n = {cls.m**n:.6g}")
    if cls.regime in (Regime.SCHROEDER_SUPER, Regime.BOETTCHER):
        return cls.m**-n
    if cls.regime is Regime.SCHROEDER_SUB:
        return cls.gamma**n * v ** (cls.alpha - 1.0)
    k_n = math.floor(n - math.log(v) / math.log(cls.m) + 1.0 + _FLOOR_NUDGE)
    return k_n * cls.gamma**n


def critical_k(cls: Classification, n: int, v: int) -> int:
    """k_n = floor(n - log v / log m + 1), the alpha = 1 scale multiplier."""
    return math.floor(n - math.log(v) / math.log(cls.m) + 1.0 + _FLOOR_NUDGE)


def theorem2_scale(cls: Classification, n: int, v: int) -> float:
    """Scale for the sup bounds: gamma^n, k_n gamma^n (k_n without the +1), or m^-n."""
    if cls.regime in (Regime.SCHROEDER_SUPER, Regime.BOETTCHER):
        return cls.m**-n
    if cls.regime is Regime.SCHROEDER_SUB:
        return cls.gamma**n
    k_n = math.floor(n - math.log(v) / math.log(cls.m) + _FLOOR_NUDGE)
    return max(k_n, 1) * cls.gamma**n


def local_limit_ratio(
    law: OffspringLaw,
    n: int,
    v: int,
    cls: Classification | None = None,
    pmf: GenerationPmf | None = None,
) -> float:
    """P(Z_n = v) / A_n; Theorem 1 asserts this stays in a positive band."""
    cls = cls or classify(law)
    scale = a_scale(cls, n, v)
    pmf = pmf or zn_pmf_compose(law, n)
    if v > pmf.cap:
        raise VBeyondCapError(f"v = {v} beyond cap {pmf.cap}")
    return float(pmf.coeffs[v]) / scale


def sup_tail_local(
    law: OffspringLaw,
    n: int,
    v: int,
    cls: Classification | None = None,
    pmf: GenerationPmf | None = None,
) -> tuple[int, float]:
    """(argmax j, sup) of the regime-weighted pmf over j in [v, cap].

    Weight j^(alpha-1) below criticality; plain sup otherwise.
    """
    cls = cls or classify(law)
    pmf = pmf or zn_pmf_compose(law, n)
    if v > pmf.cap:
        raise VBeyondCapError(f"v = {v} beyond cap {pmf.cap}")
    block = pmf.coeffs[v:]
    if cls.regime is Regime.SCHROEDER_SUB:
        j = np.arange(v, pmf.cap + 1, dtype=float)
        j[0] = max(j[0], 1.0)  # v = 0 would otherwise divide by zero
        block = block * j ** (cls.alpha - 1.0)
    idx = int(np.argmax(block))
    return v + idx, float(block[idx])


def scale_sequence(cls: Classification, pairs) -> ScaleSequence:
    """Tabulate (n, v, A_n, k_n) rows for a list of (n, v) pairs."""
    rows = []
    for n, v in pairs:
        k_n = critical_k(cls, n, v) if cls.regime is Regime.SCHROEDER_CRITICAL else None
        rows.append((n, v, a_scale(cls, n, v), k_n))
    return ScaleSequence(regime=cls.regime, entries=tuple(rows))


def w_second_moment(law: OffspringLaw) -> float:
    """E(W^2) = f''(1) / (m^2 - m), from the one-step recursion of W.

    W = m^-1 sum_{i <= Z_1} W^(i) with the W^(i) iid copies gives
    m^2 E W^2 = m E W^2 + E Z_1(Z_1 - 1), and E Z_1(Z_1 - 1) = f''(1).
    """
    m = law.mean
    return float(pgf_second_derivative(law, 1.0)) / (m * m - m)


def _auto_depth(m: float) -> int:
    # m^depth ~ 1e6 balances the O(m^-2n) seed truncation against the
    # eps * m^n roundoff amplification; both land near 1e-11
    return max(8, math.ceil(math.log(1e6) / math.log(m)))


def w_laplace(law: OffspringLaw, u: float, n_levels: int | None = None) -> float:
    """phi(u) = E exp(-u W) for u >= 0.

    Downward Abel iteration with the quadratic seed (see module
    docstring).  Depth defaults to the m-dependent optimum; convergence is
    accepted when depths n and n-1 agree within 1e-10, else
    NoConvergenceError.
    """
    if u < 0:
        raise ValueError("u must be >= 0")
    if u == 0.0:
        return 1.0
    m = law.mean
    n = n_levels if n_levels is not None else _auto_depth(m)
    ew2 = w_second_moment(law)

    def level(depth: int) -> float:
        v = u * m**-depth
        x = 1.0 - v + 0.5 * v * v * ew2
        for _ in range(depth):
            x = _horner(law.probs, x)
        return x

    cur, prev = level(n), level(n - 1)
    if abs(cur - prev) >= 1e-10:
        raise NoConvergenceError(f"phi({u}) levels {n - 1},{n} differ by {abs(cur - prev):.3g}")
    return cur


def km_function(law: OffspringLaw, s: float, cls: Classification | None = None) -> float:
    """Karlin-McGregor diagnostic K(s) = s^alpha Q(phi(s)), s in (0, 1).

    Constancy of K over s is conjecturally equivalent to embeddability of
    the discrete-time process into a continuous-time one; this function
    only evaluates, it never decides.
    """
    cls = cls or classify(law)
    _require_schroeder(cls, "km_function")
    if not 0.0 < s < 1.0:
        raise SOutOfRangeError(f"s = {s} not in (0, 1)")
    phi = w_laplace(law, s)
    return s**cls.alpha * q_limit(law, phi, cls=cls).value


def _boettcher_ratio_coeffs(law: OffspringLaw) -> tuple[int, float, np.ndarray]:
    """(j0, p_{j0}, ratio polynomial r) with r(t) = sum_{j>j0} (p_j/p_{j0}) t^(j-j0).

    log f(t) = j0 log t + log p_{j0} + log1p(r(t)) for t > 0.
    """
    j0 = law.support_min
    pj0 = float(law.probs[j0])
    ratio = law.probs[j0 + 1 :] / pj0
    return j0, pj0, ratio


def _r_eval(ratio: np.ndarray, t: float) -> float:
    if len(ratio) == 0 or t == 0.0:
        return 0.0
    return float(_horner(ratio, t)) * t


def boettcher_G(
    law: OffspringLaw, s: float, tol: float = 1e-12, cls: Classification | None = None
) -> GSeriesEval:
    """G(s) = lim j0^-n log f_n(s) on (0, 1], by the telescoped series.

    Terms are summed until the geometric bound on the remainder drops
    below tol; the remaining pure-log-p_{j0} tail is then added in closed
    form, so the reported truncation_bound covers only the residual
    r(f_i(s)) contributions.
    """
    cls = cls or classify(law)
    _require_boettcher(cls, "boettcher_G")
    if not 0.0 < s <= 1.0:
        raise SOutOfRangeError(f"s = {s} not in (0, 1]")
    j0, pj0, ratio = _boettcher_ratio_coeffs(law)
    log_pj0 = math.log(pj0)
    total = math.log(s)
    t = s
    i = 0
    while True:
        total += j0 ** -(i + 1) * (log_pj0 + math.log1p(_r_eval(ratio, t)))
        t = float(_horner(law.probs, t))
        i += 1
        # remaining terms i, i+1, ...: each log1p factor is at most the
        # current one (f contracts toward 0 on (0,1)), giving this bound
        bound = math.log1p(_r_eval(ratio, t)) * j0**-i / (j0 - 1)
        if bound < tol or i >= 1000:
            total += log_pj0 * j0**-i / (j0 - 1)  # closed-form log p_{j0} tail
            return GSeriesEval(s=s, value=total, terms_used=i, truncation_bound=bound)


def log_pgf_iterate(law: OffspringLaw, n: int, s: float) -> float:
    """log f_n(s) for 0 < s <= 1, stable far below the underflow of f_n(s).

    Uses log f(t) = j0 log t + log p_{j0} + log1p(r(t)); once t underflows
    to 0 the correction term vanishes exactly.  Requires p_0 = 0 (the
    factoring needs f(0) = 0); j0 = 1 laws are fine.
    """
    if law.probs[0] != 0.0:
        raise SOutOfRangeError("log_pgf_iterate requires p_0 = 0")
    if not 0.0 < s <= 1.0:
        raise SOutOfRangeError(f"s = {s} not in (0, 1]")
    j0, pj0, ratio = _boettcher_ratio_coeffs(law)
    log_pj0 = math.log(pj0)
    lv = math.log(s)
    for _ in range(n):
        t = math.exp(lv) if lv > -707.0 else 0.0
        lv = j0 * lv + log_pj0 + math.log1p(_r_eval(ratio, t))
    return lv
