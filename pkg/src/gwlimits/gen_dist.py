"""Exact distribution of the generation sizes Z_n, two independent ways.

The primary path composes truncated power series: the generating
function of Z_{n+1} is f applied to the generating function of Z_n, and
because every coefficient involved is nonnegative, coefficient k of the
composition depends only on coefficients 0..k of the inner series.
Truncating at degree K therefore yields the *exact* first K+1
probabilities P(Z_n = 0..K), up to float roundoff.

The cross-check path never touches series arithmetic: it iterates f
pointwise at the N-th roots of unity and inverts with a DFT.  Mass at
states >= N wraps around (aliasing); a Markov bound m^n / N on the
wrapped mass is reported alongside.

Also here: the exact conditional Laplace transform
E(exp(-theta Z_n) | Z_{n-k} >= v), computed from the identity
sum_{j>=v} f_k(e^-theta)^j P(Z_{n-k}=j) / P(Z_{n-k} >= v).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyConditioningEventError,
    NotPowerOfTwoError,
    SeriesConsistencyError,
    VBeyondCapError,
)
from .offspring import OffspringLaw, _horner, pgf_iterate

__all__ = [
    "TruncSeries",
    "GenerationPmf",
    "default_cap",
    "series_mul",
    "compose_poly",
    "zn_pmf_compose",
    "zn_pmf_dft",
    "tail_probability",
    "conditional_laplace",
]

# Products with both factors at most this long use schoolbook convolution;
# longer ones go through the FFT.  Schoolbook keeps roundoff relative to the
# coefficient products, which matters when coefficients span many orders of
# magnitude (e.g. q_j extraction at gamma^n scale).
SCHOOLBOOK_MAX = 64

# Negative coefficients larger than this in magnitude indicate a bug, not
# roundoff; smaller ones are clamped to zero.
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class TruncSeries:
    """Power series truncated to degree ``cap`` (coeffs has cap+1 entries)."""

    coeffs: np.ndarray
    cap: int

    def __post_init__(self):
        self.coeffs.flags.writeable = False


@dataclass(frozen=True)
class GenerationPmf:
    """P(Z_n = k) for k = 0..cap, with the unaccounted tail mass tracked.

    ``method`` records which computation path produced it.  ``cap_warning``
    is set when more than half the mass lies beyond the cap (results are
    still returned).  ``alias_bound`` is the Markov bound on wrapped mass
    for the DFT path, None for the composition path.
    """

    n: int
    coeffs: np.ndarray
    tail_mass: float
    method: str
    cap_warning: bool = False
    alias_bound: float | None = None

    def __post_init__(self):
        self.coeffs.flags.writeable = False

    @property
    def cap(self) -> int:
        return len(self.coeffs) - 1


def default_cap(law: OffspringLaw, n: int) -> int:
    """Truncation cap keeping the tail negligible at desk scale: 8 mean multiples."""
    return int(min(2**16, max(math.ceil(8 * law.mean**n), law.d + 1, 2)))


def _clamp_nonnegative(coeffs: np.ndarray, context: str) -> np.ndarray:
    worst = coeffs.min(initial=0.0)
    if worst < -_NEG_TOL:
        raise SeriesConsistencyError(f"{context}: coefficient {worst!r} below roundoff tolerance")
    return np.maximum(coeffs, 0.0)


def series_mul(a: TruncSeries, b: TruncSeries, K: int) -> TruncSeries:
    """Product of two truncated series, truncated to degree K.

    Schoolbook below SCHOOLBOOK_MAX, FFT convolution above; the two agree
    to ~1e-12 relative for probability-scale coefficients.
    """
    ca, cb = a.coeffs, b.coeffs
    out = _mul_arrays(ca, cb, K)
    return TruncSeries(out, K)


def _mul_arrays(ca: np.ndarray, cb: np.ndarray, K: int) -> np.ndarray:
    la, lb = len(ca), len(cb)
    full = la + lb - 1
    if min(la, lb) <= SCHOOLBOOK_MAX:
        out = np.convolve(ca, cb)
    else:
        nfft = 1 << (full - 1).bit_length()
        out = np.fft.irfft(np.fft.rfft(ca, nfft) * np.fft.rfft(cb, nfft), nfft)[:full]
    return out[: K + 1]


def compose_poly(outer: OffspringLaw, inner: TruncSeries, K: int) -> TruncSeries:
    """Coefficients of f(inner(s)) to degree K, by Horner over series.

    Since all coefficients are nonnegative, the first K+1 output
    coefficients are exact (no truncation error, only roundoff).
    """
    probs = outer.probs
    inner_c = inner.coeffs[: K + 1]
    acc = np.array([probs[-1]])
    for j in range(len(probs) - 2, -1, -1):
        acc = _mul_arrays(acc, inner_c, K)
        acc[0] += probs[j]
    out = _clamp_nonnegative(acc, "compose_poly")
    if len(out) < K + 1:
        out = np.pad(out, (0, K + 1 - len(out)))
    return TruncSeries(out, K)


def zn_pmf_compose(
    law: OffspringLaw, n: int, K: int | None = None, warn_tail: bool = True
) -> GenerationPmf:
    """Exact P(Z_n = k) for k <= K by n-fold composition from the identity.

    ``warn_tail=False`` silences the large-tail warning for callers that
    deliberately truncate low (coefficient extraction).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if K is None:
        K = default_cap(law, n)
    if K < 1:
        raise ValueError("K must be >= 1")
    series = np.zeros(K + 1)
    series[1] = 1.0
    cur = TruncSeries(series, K)
    for _ in range(n):
        cur = compose_poly(law, cur, K)
    coeffs = cur.coeffs
    tail = max(0.0, 1.0 - float(coeffs.sum()))
    warn = tail > 0.5
    if warn and warn_tail:
        warnings.warn(f"cap {K} leaves tail mass {tail:.3g} for Z_{n}", stacklevel=2)
    return GenerationPmf(n=n, coeffs=coeffs, tail_mass=tail, method="compose", cap_warning=warn)


def zn_pmf_dft(law: OffspringLaw, n: int, N: int) -> GenerationPmf:
    """P(Z_n = k), k < N, by evaluating f_n at the N-th roots of unity.

    Independent of the composition machinery by construction: f is
    iterated as a scalar (vectorized) map on the unit circle, then a
    single inverse DFT recovers the probabilities.  Exact up to aliasing
    (mass at k >= N wraps around mod N) and roundoff.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if N < 2 or (N & (N - 1)) != 0:
        raise NotPowerOfTwoError(f"N = {N} is not a power of two >= 2")
    vals = np.exp(2j * np.pi * np.arange(N) / N)
    for _ in range(n):
        vals = _horner(law.probs, vals)
    coeffs = np.fft.fft(vals).real / N
    coeffs = _clamp_nonnegative(coeffs, "zn_pmf_dft")
    tail = max(0.0, 1.0 - float(coeffs.sum()))
    return GenerationPmf(
        n=n,
        coeffs=coeffs,
        tail_mass=tail,
        method="dft",
        alias_bound=min(1.0, law.mean**n / N),
    )


def tail_probability(pmf: GenerationPmf, v: int) -> float:
    """P(Z_n >= v) from a truncated pmf; mass beyond the cap counts as >= v."""
    if v < 0:
        raise ValueError("v must be >= 0")
    if v > pmf.cap:
        raise VBeyondCapError(f"v = {v} beyond cap {pmf.cap}")
    return float(pmf.coeffs[v:].sum()) + pmf.tail_mass


def conditional_laplace(
    law: OffspringLaw, n: int, k: int, v: int, theta: float, cap: int | None = None
) -> float:
    """E(exp(-theta Z_n) | Z_{n-k} >= v), exactly.

    Conditioning the generation-n transform on the lagged event factors
    through the generation n-k distribution:
    sum_{j>=v} x^j P(Z_{n-k}=j) / P(Z_{n-k} >= v) with x = f_k(e^-theta).
    Mass beyond the cap contributes at most x^cap * tail and is dropped
    from the numerator (x < 1 for theta > 0); it is kept in the
    denominator, where it counts fully toward the conditioning event.
    """
    if not (n > k >= 0):
        raise ValueError("need n > k >= 0")
    if theta <= 0:
        raise ValueError("theta must be > 0")
    pmf = zn_pmf_compose(law, n - k, cap)
    if v > pmf.cap:
        raise VBeyondCapError(f"v = {v} beyond cap {pmf.cap}")
    denom = tail_probability(pmf, v)
    if denom <= 0.0:
        raise EmptyConditioningEventError(f"P(Z_{n - k} >= {v}) = 0")
    x = pgf_iterate(law, k, math.exp(-theta))
    j = np.arange(v, pmf.cap + 1, dtype=float)
    with np.errstate(divide="ignore"):
        logx = math.log(x) if x > 0 else -math.inf
    if not math.isfinite(logx):
        num = 0.0
    else:
        num = float(np.exp(j * logx) @ pmf.coeffs[v:])
    return num / denom
