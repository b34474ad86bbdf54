"""Matched stratified bootstrap and BCa intervals.

Within every stratum the bootstrap draws the same number of Low and High
posts, ``m = min(n_low, n_high)``, with replacement. The per-iteration
statistic is the difference between the pooled Low and High draw means, both
in impressions and as a percentage of the High mean.

Iteration ``i`` draws from its own random stream, seeded by ``(seed, i)``,
so results do not depend on how iterations are spread over workers.

References
----------
Bradley Efron and Robert J. Tibshirani, "An Introduction to the Bootstrap".
Chapman & Hall, 1993. Chapter 14.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AnalysisError, ConfigError
from .normal import norm_cdf, norm_ppf
from .strata import StratumKey

__all__ = [
    "BcaInterval",
    "BootstrapConfig",
    "BootstrapRun",
    "DegenerateResample",
    "Resample",
    "ResamplePlan",
    "ResampleStatistic",
    "bca_interval",
    "iteration_rng",
    "jackknife_statistics",
    "mean_pct_diff",
    "observed_statistic",
    "run_bootstrap",
    "stratified_resample",
]

MIN_BCA_DRAWS = 100


@dataclass(frozen=True)
class BootstrapConfig:
    """Resampling settings.

    ``workers`` only bounds parallelism; it never changes results.
    """

    iterations: int = 1000
    seed: int = 0
    confidence: float = 0.95
    min_stratum_size: int = 2
    weighting: str = "size"
    jackknife: str = "stratum"
    jackknife_blocks: int = 20
    workers: int = 1

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError(f"iterations must be a positive integer, got {self.iterations!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError(f"confidence must lie in (0, 1), got {self.confidence!r}")
        if self.min_stratum_size < 1:
            raise ConfigError("min_stratum_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.weighting not in ("size", "equal"):
            raise ConfigError(f"weighting must be 'size' or 'equal', got {self.weighting!r}")
        if self.jackknife not in ("stratum", "block"):
            raise ConfigError(f"jackknife must be 'stratum' or 'block', got {self.jackknife!r}")
        if self.jackknife_blocks < 2:
            raise ConfigError("jackknife_blocks must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "seed": self.seed,
            "confidence": self.confidence,
            "min_stratum_size": self.min_stratum_size,
            "weighting": self.weighting,
            "jackknife": self.jackknife,
            "jackknife_blocks": self.jackknife_blocks,
        }


@dataclass(frozen=True)
class ResampleStatistic:
    iteration: int
    mean_low: float
    mean_high: float
    abs_diff: float
    pct_diff: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "mean_low": self.mean_low,
            "mean_high": self.mean_high,
            "abs_diff": self.abs_diff,
            "pct_diff": self.pct_diff,
        }


@dataclass(frozen=True)
class BcaInterval:
    point_estimate: float
    lower: float
    upper: float
    z0: float
    accel: float
    level: float
    alpha_lower: float
    alpha_upper: float

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "point_estimate": self.point_estimate,
            "lower": self.lower,
            "upper": self.upper,
            "z0": self.z0,
            "accel": self.accel,
            "level": self.level,
            "alpha_lower": self.alpha_lower,
            "alpha_upper": self.alpha_upper,
        }


class DegenerateResample(AnalysisError):
    """A resample whose High draws have zero mean impressions."""


# ---------------------------------------------------------------- plan


@dataclass
class ResamplePlan:
    """Strata that pass the size floor, flattened for fast drawing.

    Values of stratum ``s`` occupy ``low_values[low_start[s]:low_start[s] +
    n_low[s]]`` (likewise for High).
    """

    keys: list[StratumKey]
    low_values: np.ndarray
    high_values: np.ndarray
    low_start: np.ndarray
    high_start: np.ndarray
    n_low: np.ndarray
    n_high: np.ndarray
    m: np.ndarray
    skipped: list[dict] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        strata: Mapping[StratumKey, tuple[Sequence[float], Sequence[float]]],
        min_stratum_size: int = 2,
    ) -> ResamplePlan:
        keys, lows, highs, skipped = [], [], [], []
        for key in sorted(strata):
            low, high = (np.asarray(v, dtype=np.float64) for v in strata[key])
            if low.size < min_stratum_size or high.size < min_stratum_size:
                skipped.append({"key": key, "n_low": int(low.size), "n_high": int(high.size)})
                continue
            keys.append(key)
            lows.append(low)
            highs.append(high)
        n_low = np.array([a.size for a in lows], dtype=np.int64)
        n_high = np.array([a.size for a in highs], dtype=np.int64)

        def starts(sizes):
            return np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)

        return cls(
            keys=keys,
            low_values=np.concatenate(lows) if lows else np.empty(0),
            high_values=np.concatenate(highs) if highs else np.empty(0),
            low_start=starts(n_low) if keys else np.empty(0, np.int64),
            high_start=starts(n_high) if keys else np.empty(0, np.int64),
            n_low=n_low,
            n_high=n_high,
            m=np.minimum(n_low, n_high),
            skipped=skipped,
        )

    @property
    def n_strata(self) -> int:
        return len(self.keys)

    @property
    def total_draws(self) -> int:
        return int(self.m.sum())

    def population_means(self) -> tuple[np.ndarray, np.ndarray]:
        ends_l = self.low_start + self.n_low
        ends_h = self.high_start + self.n_high
        low = np.array([self.low_values[a:b].mean() for a, b in zip(self.low_start, ends_l)])
        high = np.array([self.high_values[a:b].mean() for a, b in zip(self.high_start, ends_h)])
        return low, high


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Independent random stream for one bootstrap iteration."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(iteration,))))


# ---------------------------------------------------------------- one resample


@dataclass
class Resample:
    """Draws for one iteration, grouped by stratum in plan order."""

    plan: ResamplePlan
    low: np.ndarray
    high: np.ndarray

    def _segments(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.plan.m)[:-1]))

    def stratum_sums(self) -> tuple[np.ndarray, np.ndarray]:
        seg = self._segments()
        return np.add.reduceat(self.low, seg), np.add.reduceat(self.high, seg)

    def stratum_means(self) -> tuple[np.ndarray, np.ndarray]:
        low, high = self.stratum_sums()
        return low / self.plan.m, high / self.plan.m

    def by_stratum(self) -> dict[StratumKey, tuple[np.ndarray, np.ndarray]]:
        bounds = np.cumsum(self.plan.m)[:-1]
        return {
            k: (lo, hi)
            for k, lo, hi in zip(self.plan.keys, np.split(self.low, bounds), np.split(self.high, bounds))
        }


def stratified_resample(plan: ResamplePlan, rng: np.random.Generator) -> Resample:
    """Draw ``m_s`` Low and ``m_s`` High posts with replacement from every stratum.

    Low draws for all strata are taken first, then High draws, each in plan
    order.
    """
    if plan.n_strata == 0:
        raise AnalysisError("every stratum was skipped; nothing to resample")
    reps = plan.m
    low_idx = np.repeat(plan.low_start, reps) + rng.integers(0, np.repeat(plan.n_low, reps))
    high_idx = np.repeat(plan.high_start, reps) + rng.integers(0, np.repeat(plan.n_high, reps))
    return Resample(plan, plan.low_values[low_idx], plan.high_values[high_idx])


def _combine(low_means, high_means, weights, weighting) -> tuple[float, float]:
    if weighting == "size":
        total = weights.sum()
        return float((weights * low_means).sum() / total), float((weights * high_means).sum() / total)
    return float(low_means.mean()), float(high_means.mean())


def mean_pct_diff(resample: Resample, weighting: str = "size", iteration: int = 0) -> ResampleStatistic:
    """Pooled mean difference of one resample.

    With ``weighting="size"`` the means pool every draw, so stratum ``s``
    weighs in proportion to ``m_s``; ``"equal"`` averages the stratum means.

    Raises
    ------
    DegenerateResample
        If the High mean is zero, which leaves the percentage undefined.
    """
    low_sums, high_sums = resample.stratum_sums()
    m = resample.plan.m
    if weighting == "size":
        total = m.sum()
        mean_low = float(low_sums.sum() / total)
        mean_high = float(high_sums.sum() / total)
    else:
        mean_low, mean_high = _combine(low_sums / m, high_sums / m, m, weighting)
    if mean_high <= 0.0:
        raise DegenerateResample(f"iteration {iteration}: zero mean High impressions")
    diff = mean_low - mean_high
    return ResampleStatistic(iteration, mean_low, mean_high, diff, 100.0 * diff / mean_high)


# ---------------------------------------------------------------- full run


@dataclass
class BootstrapRun:
    """Output of :func:`run_bootstrap`.

    ``stratum_low_means[r, s]`` is the Low draw mean of stratum ``s`` in the
    ``r``-th retained iteration; rows line up with ``statistics``.
    """

    plan: ResamplePlan
    config: BootstrapConfig
    statistics: list[ResampleStatistic]
    stratum_low_means: np.ndarray
    stratum_high_means: np.ndarray
    degenerate_iterations: list[int]

    def __len__(self) -> int:
        return len(self.statistics)

    @property
    def pct_diff(self) -> np.ndarray:
        return np.array([s.pct_diff for s in self.statistics])

    @property
    def abs_diff(self) -> np.ndarray:
        return np.array([s.abs_diff for s in self.statistics])

    @property
    def skipped(self) -> list[dict]:
        return self.plan.skipped


def _run_one(plan: ResamplePlan, config: BootstrapConfig, i: int):
    rng = iteration_rng(config.seed, i)
    for _attempt in range(2):
        res = stratified_resample(plan, rng)
        try:
            stat = mean_pct_diff(res, config.weighting, iteration=i)
        except DegenerateResample:
            continue
        low, high = res.stratum_means()
        return stat, low, high
    return None


def run_bootstrap(
    strata: Mapping[StratumKey, tuple[Sequence[float], Sequence[float]]] | ResamplePlan,
    config: BootstrapConfig | None = None,
) -> BootstrapRun:
    """Run ``config.iterations`` matched resamples.

    An iteration whose High mean is zero is redrawn once from the same
    stream; if the redraw is also degenerate the iteration is dropped and
    listed in ``degenerate_iterations``.

    Parameters
    ----------
    strata : mapping or ResamplePlan
        Stratum key -> (Low impressions, High impressions).
    config : BootstrapConfig, optional

    Raises
    ------
    AnalysisError
        If every stratum falls below ``config.min_stratum_size``.
    """
    config = config or BootstrapConfig()
    plan = strata if isinstance(strata, ResamplePlan) else ResamplePlan.build(strata, config.min_stratum_size)
    if plan.n_strata == 0:
        raise AnalysisError(
            f"all {len(plan.skipped)} strata have fewer than {config.min_stratum_size} "
            "posts in one credibility group"
        )

    n = config.iterations
    results: list = [None] * n

    def work(indices):
        for i in indices:
            results[i] = _run_one(plan, config, i)

    if config.workers == 1 or n == 1:
        work(range(n))
    else:
        chunks = [range(w, n, config.workers) for w in range(config.workers)]
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for fut in [pool.submit(work, c) for c in chunks]:
                fut.result()

    kept = [r for r in results if r is not None]
    degenerate = [i for i, r in enumerate(results) if r is None]
    s = plan.n_strata
    return BootstrapRun(
        plan=plan,
        config=config,
        statistics=[r[0] for r in kept],
        stratum_low_means=np.array([r[1] for r in kept]).reshape(-1, s),
        stratum_high_means=np.array([r[2] for r in kept]).reshape(-1, s),
        degenerate_iterations=degenerate,
    )


# ---------------------------------------------------------------- plug-in and jackknife


def _stat_from_means(low_means, high_means, m, weighting) -> tuple[float, float]:
    mean_low, mean_high = _combine(low_means, high_means, m, weighting)
    diff = mean_low - mean_high
    pct = 100.0 * diff / mean_high if mean_high > 0 else math.nan
    return diff, pct


def observed_statistic(plan: ResamplePlan, weighting: str = "size") -> tuple[float, float]:
    """Plug-in (abs_diff, pct_diff) from the population means of each stratum.

    Strata carry the same weights the bootstrap uses, so this is the value
    the resampled statistics scatter around.
    """
    low, high = plan.population_means()
    return _stat_from_means(low, high, plan.m, weighting)


def jackknife_statistics(
    plan: ResamplePlan, weighting: str = "size", mode: str = "stratum", blocks: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """Jackknife replicates of the plug-in statistic.

    ``mode="stratum"`` leaves out one stratum at a time. ``mode="block"``
    splits each group of each stratum into ``blocks`` interleaved blocks by
    position and leaves out one block index at a time, across all strata.

    Returns
    -------
    abs_reps, pct_reps : ndarray
    """
    low, high = plan.population_means()
    reps = []
    if mode == "stratum":
        for s in range(plan.n_strata):
            keep = np.arange(plan.n_strata) != s
            if keep.any():
                reps.append(_stat_from_means(low[keep], high[keep], plan.m[keep], weighting))
    elif mode == "block":
        pos_l = np.concatenate([np.arange(n) for n in plan.n_low]) % blocks
        pos_h = np.concatenate([np.arange(n) for n in plan.n_high]) % blocks
        sid_l = np.repeat(np.arange(plan.n_strata), plan.n_low)
        sid_h = np.repeat(np.arange(plan.n_strata), plan.n_high)
        s = plan.n_strata
        for b in range(blocks):
            kl, kh = pos_l != b, pos_h != b
            nl = np.bincount(sid_l[kl], minlength=s)
            nh = np.bincount(sid_h[kh], minlength=s)
            ok = (nl > 0) & (nh > 0)
            if not ok.any():
                continue
            ml = np.bincount(sid_l[kl], weights=plan.low_values[kl], minlength=s)[ok] / nl[ok]
            mh = np.bincount(sid_h[kh], weights=plan.high_values[kh], minlength=s)[ok] / nh[ok]
            reps.append(_stat_from_means(ml, mh, np.minimum(nl, nh)[ok], weighting))
    else:
        raise ConfigError(f"unknown jackknife mode {mode!r}")
    if not reps:
        return np.empty(0), np.empty(0)
    arr = np.array(reps)
    return arr[:, 0], arr[:, 1]


# ---------------------------------------------------------------- BCa


def _acceleration(jack: np.ndarray) -> float:
    jack = np.asarray(jack, dtype=np.float64)
    jack = jack[np.isfinite(jack)]
    if jack.size < 2:
        return 0.0
    u = jack.mean() - jack
    den = 6.0 * float((u * u).sum()) ** 1.5
    if den == 0.0:
        return 0.0
    return float((u**3).sum() / den)


def _adjusted_alpha(z0: float, a: float, alpha: float) -> float:
    z = z0 + norm_ppf(alpha)
    den = 1.0 - a * z
    if den <= 0.0:
        # the acceleration correction has no solution here; send the
        # endpoint to the edge of the bootstrap distribution
        return 1.0 if z > 0 else 0.0
    return norm_cdf(z0 + z / den)


def bca_interval(
    observed_stat: float,
    boot_dist: Sequence[float],
    jackknife_stats: Sequence[float],
    level: float = 0.95,
) -> BcaInterval:
    """Bias-corrected and accelerated percentile interval.

    Parameters
    ----------
    observed_stat : float
        The statistic on the original data.
    boot_dist : sequence of float
        Bootstrap replicates; at least 100 are required.
    jackknife_stats : sequence of float
        Jackknife replicates used for the acceleration constant.
    level : float
        Coverage, e.g. 0.95.

    Notes
    -----
    The bias constant counts replicates tied with ``observed_stat`` as half
    below it, and the proportion is clipped to ``[1/(2B), 1 - 1/(2B)]``.
    Endpoints are linear-interpolation quantiles of ``boot_dist``.
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level!r}")
    boot = np.asarray(boot_dist, dtype=np.float64)
    boot = boot[np.isfinite(boot)]
    B = boot.size
    if B < MIN_BCA_DRAWS:
        raise AnalysisError(f"BCa needs at least {MIN_BCA_DRAWS} bootstrap replicates, got {B}")
    alpha = (1.0 - level) / 2.0

    if boot.min() == boot.max():
        c = float(boot[0])
        return BcaInterval(float(observed_stat), c, c, 0.0, 0.0, level, alpha, 1.0 - alpha)

    below = np.count_nonzero(boot < observed_stat) + 0.5 * np.count_nonzero(boot == observed_stat)
    prop = min(max(below / B, 0.5 / B), 1.0 - 0.5 / B)
    z0 = norm_ppf(prop)
    a = _acceleration(np.asarray(jackknife_stats))

    a1 = _adjusted_alpha(z0, a, alpha)
    a2 = _adjusted_alpha(z0, a, 1.0 - alpha)
    lo, hi = np.quantile(boot, [a1, a2], method="linear")
    return BcaInterval(
        point_estimate=float(observed_stat),
        lower=float(min(lo, hi)),
        upper=float(max(lo, hi)),
        z0=float(z0),
        accel=a,
        level=level,
        alpha_lower=a1,
        alpha_upper=a2,
    )
