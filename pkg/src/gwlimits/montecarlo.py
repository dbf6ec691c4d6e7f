"""Seeded Monte Carlo verification harness.

Determinism contract
--------------------
Replicates are processed in fixed-size batches (``BATCH_SIZE`` each).
Batch i draws from its own generator seeded by SeedSequence((seed, i)),
and batch results are reduced in batch order.  Worker processes only
decide *who* computes a batch, never *what* it computes, so estimates
are bit-identical for any worker count and repeatable across runs with
the same seed.

Offspring are drawn with a Walker alias table (O(1) per birth, two
uniforms per draw), vectorized over all births of a generation within a
batch; per-replicate sums are recovered with a segmented reduction.
Trajectories whose generation size exceeds the population cap are
dropped from estimates but counted, never resampled (resampling would
bias conditional estimates).

The exact small-n oracle ``exact_rn_tail`` shares no randomness with the
samplers: it combines the exact generation pmf with running
self-convolutions of the offspring law.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    AcceptanceTooLowError,
    CapExceededError,
    CapTooSmallError,
    NoHitsError,
    NoSurvivorsError,
)
from .gen_dist import zn_pmf_compose
from .offspring import OffspringLaw, classify

__all__ = [
    "SimConfig",
    "McEstimate",
    "AliasTable",
    "simulate_trajectory",
    "estimate_rn_tail",
    "exact_rn_tail",
    "estimate_conditional_ldp",
    "empirical_conditional_pmf",
    "empirical_ak",
    "empirical_w",
    "WSample",
    "sample_rn_path",
]

# Replicates per RNG stream.  Fixed so that results never depend on worker
# scheduling; small enough that per-generation draw arrays stay modest.
BATCH_SIZE = 1024


@dataclass(frozen=True)
class SimConfig:
    """Simulation envelope: seed, replicate count, cap, parallelism.

    ``n`` is an optional default horizon used by the CLI; library
    estimators take their horizon explicitly.
    """

    seed: int
    replicates: int
    n: int | None = None
    population_cap: int = 10**7
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.population_cap < 1:
            raise ValueError("population_cap must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    """Point estimate with binomial standard error and provenance."""

    value: float
    stderr: float
    hits: int
    trials: int
    seed: int
    acceptance_rate: float | None = None
    cap_discards: int = 0


class AliasTable:
    """Walker alias table for a finite discrete law; O(1) per draw."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        k = len(probs)
        self.size = k
        scaled = probs * k
        self.accept = np.ones(k)
        self.alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            self.accept[i] = 1.0

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.size, size=count)
        keep = rng.random(count) < self.accept[idx]
        return np.where(keep, idx, self.alias[idx])


def _batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, batch_index)))


def _advance(alias: AliasTable, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One generation for a vector of populations (zeros stay zero)."""
    live = np.flatnonzero(state)
    out = np.zeros_like(state)
    if len(live) == 0:
        return out
    sizes = state[live]
    total = int(sizes.sum())
    draws = alias.sample(total, rng)
    starts = np.cumsum(sizes) - sizes
    out[live] = np.add.reduceat(draws, starts)
    return out


def _simulate_batch(
    law_probs: np.ndarray,
    horizon: int,
    rng: np.random.Generator,
    cap: int,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Trajectory matrix (count, horizon+1) plus a capped-trajectory mask.

    Capped trajectories stop evolving (their rows freeze at the last valid
    generation) and must be excluded from estimates by the caller.
    """
    alias = AliasTable(law_probs)
    traj = np.zeros((count, horizon + 1), dtype=np.int64)
    traj[:, 0] = 1
    capped = np.zeros(count, dtype=bool)
    state = traj[:, 0].copy()
    for g in range(1, horizon + 1):
        state = _advance(alias, state, rng)
        over = state > cap
        if over.any():
            capped |= over
            state[over] = 0
        traj[:, g] = state
    return traj, capped


def simulate_trajectory(law: OffspringLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """One trajectory (Z_0, ..., Z_n); Z_0 = 1.

    Raises CapExceededError if any generation exceeds 10^7 individuals.
    """
    traj, capped = _simulate_batch(law.probs, n, rng, 10**7, 1)
    if capped[0]:
        raise CapExceededError("generation size exceeded the population cap")
    return traj[0]


# ---------------------------------------------------------------------------
# batch kernels (top-level so they pickle for the process pool)

def _kernel(args) -> tuple:
    task, probs, horizon, params, seed, b_idx, b_size, cap = args
    rng = _batch_rng(seed, b_idx)
    traj, capped = _simulate_batch(np.asarray(probs), horizon, rng, cap, b_size)
    ok = ~capped
    n = params["n"]
    if task == "rn-tail":
        zn, znext = traj[:, n], traj[:, n + 1]
        surv = ok & (zn > 0)
        hits = int(((znext > params["a"] * zn) & surv).sum())
        return hits, int(surv.sum()), int(capped.sum())
    if task == "cond-ldp":
        k, v = params["k"], params["v"]
        accepted = ok & (traj[:, n - k] >= v)
        zn, znext = traj[:, n], traj[:, n + 1]
        a = params["a"]
        if math.isinf(a):  # pmf-only use: no ratio event to count
            hits = 0
        else:
            hits = int(((znext > a * zn) & accepted & (zn > 0)).sum())
        zn_acc = zn[accepted]
        counts = np.bincount(zn_acc) if len(zn_acc) else np.zeros(1, dtype=np.int64)
        return hits, int(accepted.sum()), int(capped.sum()), counts
    if task == "ak":
        zn, znext = traj[:, n], traj[:, n + 1]
        sel = ok & (zn > 0) & (znext >= params["a"] * zn)
        counts = np.bincount(zn[sel]) if sel.any() else np.zeros(1, dtype=np.int64)
        return int(sel.sum()), int((ok & (zn > 0)).sum()), int(capped.sum()), counts
    if task == "w":
        zn = traj[:, n]
        return int(capped.sum()), zn[ok].astype(float)
    raise ValueError(f"unknown task {task!r}")


def _run_batches(task: str, law: OffspringLaw, horizon: int, params: dict, cfg: SimConfig):
    nb = math.ceil(cfg.replicates / BATCH_SIZE)
    jobs = []
    remaining = cfg.replicates
    for i in range(nb):
        size = min(BATCH_SIZE, remaining)
        remaining -= size
        jobs.append((task, law.probs, horizon, params, cfg.seed, i, size, cfg.population_cap))
    if cfg.workers <= 1:
        return [_kernel(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_kernel, jobs, chunksize=max(1, nb // (4 * cfg.workers))))


def _merge_counts(counts_list) -> np.ndarray:
    width = max(len(c) for c in counts_list)
    out = np.zeros(width, dtype=np.int64)
    for c in counts_list:
        out[: len(c)] += c
    return out


def estimate_rn_tail(law: OffspringLaw, n: int, a: float, cfg: SimConfig) -> McEstimate:
    """P(R_n > a | Z_n > 0) with R_n = Z_{n+1} / Z_n, by direct simulation."""
    if not a > law.mean:
        raise ValueError("a must exceed the offspring mean")
    results = _run_batches("rn-tail", law, n + 1, {"n": n, "a": a}, cfg)
    hits = sum(r[0] for r in results)
    trials = sum(r[1] for r in results)
    discards = sum(r[2] for r in results)
    if trials == 0:
        raise NoSurvivorsError("no surviving trajectories")
    p = hits / trials
    return McEstimate(
        value=p,
        stderr=math.sqrt(p * (1.0 - p) / trials),
        hits=hits,
        trials=trials,
        seed=cfg.seed,
        cap_discards=discards,
    )


def exact_rn_tail(law: OffspringLaw, n: int, a: float, tail_tol: float = 1e-6) -> float:
    """P(R_n > a | Z_n > 0) exactly: sum_j P(Z_n = j) P(mean of j draws > a).

    The inner tails reuse a running self-convolution of the offspring law
    (S_{j+1} = S_j * law).  Intended for small n; raises CapTooSmallError
    if the generation pmf truncation leaves more than tail_tol of mass.
    """
    pmf = zn_pmf_compose(law, n)
    if pmf.tail_mass > tail_tol:
        raise CapTooSmallError(
            f"tail mass {pmf.tail_mass:.3g} at n = {n}; exact oracle needs n small"
        )
    coeffs = pmf.coeffs
    total = 0.0
    conv = np.array([1.0])
    for j in range(1, len(coeffs)):
        conv = np.convolve(conv, law.probs)
        if coeffs[j] > 0.0:
            thr = math.floor(a * j) + 1  # S_j > a j for integer S_j
            tail = float(conv[thr:].sum()) if thr < len(conv) else 0.0
            total += coeffs[j] * tail
    survive = 1.0 - float(coeffs[0])
    return total / survive


def estimate_conditional_ldp(
    law: OffspringLaw, n: int, k: int, v: int, a: float, cfg: SimConfig
) -> McEstimate:
    """P(R_n > a | Z_{n-k} >= v) by rejection sampling.

    Trajectories failing the conditioning event are discarded (their
    later generations are still simulated but ignored).  Raises
    AcceptanceTooLowError below an acceptance rate of 1e-4.
    """
    if not n > k >= 0:
        raise ValueError("need n > k >= 0")
    results = _run_batches("cond-ldp", law, n + 1, {"n": n, "k": k, "v": v, "a": a}, cfg)
    hits = sum(r[0] for r in results)
    accepted = sum(r[1] for r in results)
    discards = sum(r[2] for r in results)
    acc_rate = accepted / cfg.replicates
    if acc_rate < 1e-4:
        raise AcceptanceTooLowError(f"acceptance rate {acc_rate:.2e}; lower v")
    p = hits / accepted
    return McEstimate(
        value=p,
        stderr=math.sqrt(p * (1.0 - p) / accepted),
        hits=hits,
        trials=accepted,
        seed=cfg.seed,
        acceptance_rate=acc_rate,
        cap_discards=discards,
    )


def empirical_conditional_pmf(
    law: OffspringLaw, n: int, k: int, v: int, cfg: SimConfig
) -> tuple[np.ndarray, int]:
    """Rejection-sampled pmf of Z_n given Z_{n-k} >= v; (pmf, accepted count)."""
    results = _run_batches("cond-ldp", law, n + 1, {"n": n, "k": k, "v": v, "a": math.inf}, cfg)
    accepted = sum(r[1] for r in results)
    if accepted == 0:
        raise NoHitsError("conditioning event never occurred")
    counts = _merge_counts([r[3] for r in results])
    return counts / accepted, accepted


def empirical_ak(law: OffspringLaw, n: int, a: float, cfg: SimConfig) -> tuple[np.ndarray, int]:
    """Histogram of Z_n among surviving trajectories with R_n >= a.

    Returns (pmf over k = 0..max observed, number of hits); this is the
    empirical view of the conditional law a(k) = lim P(Z_n = k | R_n >= a).
    """
    if not a > law.mean:
        raise ValueError("a must exceed the offspring mean")
    results = _run_batches("ak", law, n + 1, {"n": n, "a": a}, cfg)
    hits = sum(r[0] for r in results)
    if hits == 0:
        raise NoHitsError("no trajectory satisfied R_n >= a")
    counts = _merge_counts([r[3] for r in results])
    return counts / hits, hits


@dataclass(frozen=True)
class WSample:
    """Replicate sample of W_n = Z_n / m^n with summary statistics.

    ``tail_slope`` is only set for Boettcher laws: the regression slope of
    -log P(W_n <= x) against x^(-beta/(1-beta)) over the empirical lower
    decile, the finite-n view of the doubly-exponential left tail of W.
    """

    n: int
    samples: np.ndarray
    mean: float
    stderr: float
    cap_discards: int
    tail_slope: float | None = None

    def __post_init__(self):
        self.samples.flags.writeable = False


def empirical_w(law: OffspringLaw, n: int, cfg: SimConfig) -> WSample:
    """Samples of W_n = Z_n / m^n (extinct trajectories contribute 0)."""
    results = _run_batches("w", law, n, {"n": n}, cfg)
    discards = sum(r[0] for r in results)
    samples = np.concatenate([r[1] for r in results]) / law.mean**n
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(len(samples)))
    cls = classify(law)
    slope = None
    if cls.beta is not None:
        slope = _boettcher_tail_slope(samples, cls.beta)
    return WSample(
        n=n, samples=samples, mean=mean, stderr=stderr, cap_discards=discards, tail_slope=slope
    )


def _boettcher_tail_slope(samples: np.ndarray, beta: float) -> float:
    """Least-squares slope of -log P(W_n <= x) vs x^(-beta/(1-beta)), lower decile."""
    srt = np.sort(samples)
    npts = len(srt)
    lo = srt[0]
    hi = np.quantile(srt, 0.10)
    if hi <= lo:
        return math.nan
    xs = np.linspace(lo, hi, 9)[1:]  # skip the minimum itself (P would be ~1/n)
    cdf = np.searchsorted(srt, xs, side="right") / npts
    keep = cdf > 0
    if keep.sum() < 2:
        return math.nan
    y = -np.log(cdf[keep])
    t = xs[keep] ** (-beta / (1.0 - beta))
    slope, _ = np.polyfit(t, y, 1)
    return float(slope)


def sample_rn_path(
    law: OffspringLaw, n: int, grid_points, rng: np.random.Generator, max_retries: int = 10000
) -> tuple[np.ndarray, np.ndarray]:
    """One sample of the partial-sum path R_n(t) = Z_n^-1 sum_{i<=tZ_n} xi_i.

    Returns (t grid, path values); R_n(0) = 0 and R_n(1) = Z_{n+1}/Z_n.
    Extinct trajectories (possible when p_0 > 0) are rejected and redrawn
    from the same stream, which realizes the law conditioned on Z_n > 0.
    """
    grid = np.asarray(grid_points, dtype=float)
    if np.any(grid < 0) or np.any(grid > 1):
        raise ValueError("grid points must lie in [0, 1]")
    alias = AliasTable(law.probs)
    for _ in range(max_retries):
        traj, capped = _simulate_batch(law.probs, n, rng, 10**7, 1)
        if capped[0]:
            raise CapExceededError("generation size exceeded the population cap")
        zn = int(traj[0, n])
        if zn > 0:
            break
    else:
        raise NoSurvivorsError(f"no surviving trajectory in {max_retries} attempts")
    offspring = alias.sample(zn, rng)
    partial = np.concatenate([[0], np.cumsum(offspring)])
    idx = np.floor(grid * zn).astype(int)
    return grid, partial[idx] / zn
