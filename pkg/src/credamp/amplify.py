"""Amplification analyses built on the matched bootstrap.

:func:`baseline_analysis` compares Low against High impressions within
engagement x follower strata. :func:`stratified_delta` repeats that
comparison inside each value of an extra variable (toxicity cluster, bias
group, verified flag) and reports the raw percentage-point change against
the baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bootstrap import (
    MIN_BCA_DRAWS,
    BcaInterval,
    BootstrapConfig,
    BootstrapRun,
    ResamplePlan,
    bca_interval,
    jackknife_statistics,
    observed_statistic,
    run_bootstrap,
)
from .errors import AnalysisError, ConfigError
from .ingest import LabeledDataset
from .strata import (
    BaseStrata,
    BiasGroup,
    BinEdges,
    StratumKey,
    ToxicityClusters,
    assign_base_strata,
    group_bias,
    kmeans_1d,
)

__all__ = [
    "AnalysisConfig",
    "BaselineResult",
    "DeltaResult",
    "DeltaValue",
    "StratumCell",
    "StratumDetail",
    "StratumMatrix",
    "VARIABLES",
    "baseline_analysis",
    "stratified_delta",
    "stratum_drilldown",
]

log = logging.getLogger(__name__)

VARIABLES = ("toxicity", "bias", "verified")


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything that shapes an analysis besides the data.

    ``rebin_subsets`` recomputes quantile edges inside each restricted
    population of a delta run; set it to False to reuse the edges of the
    full population.
    """

    bins: int = 4
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    rebin_subsets: bool = True
    toxicity_clusters: int = 3

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 2:
            raise ConfigError(f"bins must be an integer >= 2, got {self.bins!r}")
        if self.toxicity_clusters < 2:
            raise ConfigError("toxicity_clusters must be at least 2")

    def to_dict(self) -> dict:
        return {
            "bins": self.bins,
            "rebin_subsets": self.rebin_subsets,
            "toxicity_clusters": self.toxicity_clusters,
            **self.bootstrap.to_dict(),
        }


def _finite(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


# ---------------------------------------------------------------- stratum matrix


@dataclass(frozen=True)
class StratumCell:
    key: StratumKey
    n_low: int
    n_high: int
    draws: int
    skipped: bool
    mean_abs_diff: float | None = None
    mean_pct_diff: float | None = None
    mean_low: float | None = None
    mean_high: float | None = None

    def to_dict(self) -> dict:
        return {
            "engagement_bin": self.key.engagement_bin,
            "follower_bin": self.key.follower_bin,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "draws": self.draws,
            "skipped": self.skipped,
            "mean_abs_diff": _finite(self.mean_abs_diff),
            "mean_pct_diff": _finite(self.mean_pct_diff),
            "mean_low": _finite(self.mean_low),
            "mean_high": _finite(self.mean_high),
        }


@dataclass
class StratumMatrix:
    """One cell per (engagement bin, follower bin), empty cells included."""

    n_engagement_bins: int
    n_follower_bins: int
    cells: dict[StratumKey, StratumCell]

    def __getitem__(self, key) -> StratumCell:
        return self.cells[_as_key(key)]

    def __iter__(self):
        return iter(self.cells[k] for k in sorted(self.cells))

    def __len__(self) -> int:
        return len(self.cells)

    def to_rows(self) -> list[dict]:
        return [c.to_dict() for c in self]

    def grid(self, field_name: str = "mean_pct_diff") -> np.ndarray:
        """Engagement x follower array of one cell field, NaN for skipped cells."""
        out = np.full((self.n_engagement_bins, self.n_follower_bins), np.nan)
        for key, cell in self.cells.items():
            v = getattr(cell, field_name)
            if v is not None:
                out[key.engagement_bin, key.follower_bin] = v
        return out


def _as_key(key) -> StratumKey:
    if isinstance(key, StratumKey):
        return key
    return StratumKey(*key)


def _stratum_matrix(strata: BaseStrata, groups, run: BootstrapRun) -> StratumMatrix:
    included = {k: s for s, k in enumerate(run.plan.keys)}
    low_m, high_m = run.stratum_low_means, run.stratum_high_means
    cells = {}
    for e in range(strata.engagement_edges.n_bins):
        for f in range(strata.follower_edges.n_bins):
            key = StratumKey(e, f)
            lo, hi = groups.get(key, ((), ()))
            if key not in included or len(run) == 0:
                cells[key] = StratumCell(key, len(lo), len(hi), 0, True)
                continue
            s = included[key]
            lm, hm = low_m[:, s], high_m[:, s]
            pos = hm > 0
            pct = float(np.mean(100.0 * (lm[pos] - hm[pos]) / hm[pos])) if pos.any() else math.nan
            cells[key] = StratumCell(
                key,
                len(lo),
                len(hi),
                int(run.plan.m[s]),
                False,
                mean_abs_diff=float(np.mean(lm - hm)),
                mean_pct_diff=pct,
                mean_low=float(lm.mean()),
                mean_high=float(hm.mean()),
            )
    return StratumMatrix(strata.engagement_edges.n_bins, strata.follower_edges.n_bins, cells)


# ---------------------------------------------------------------- baseline


@dataclass
class BaselineResult:
    """Summary of one matched bootstrap comparison.

    Percentages are ``100 * (low - high) / high``; absolute differences are
    in impressions. ``positive_share`` is the percentage of iterations whose
    Low mean exceeded the High mean.
    """

    mean_pct: float
    median_pct: float
    mean_abs: float
    median_abs: float
    positive_share: float
    observed_pct: float
    observed_abs: float
    interval: BcaInterval | None
    abs_interval: BcaInterval | None
    per_stratum: StratumMatrix
    skipped_strata: list[dict]
    degenerate_iterations: int
    iterations_requested: int
    n_low: int
    n_high: int
    warnings: list[str]
    strata: BaseStrata
    run: BootstrapRun
    members: dict[StratumKey, tuple[list[str], list[str]]]

    @property
    def statistics(self):
        return self.run.statistics

    @property
    def iterations_used(self) -> int:
        return len(self.run)

    def to_dict(self, include_distribution: bool = True) -> dict:
        d = {
            "mean_pct": _finite(self.mean_pct),
            "median_pct": _finite(self.median_pct),
            "mean_abs": _finite(self.mean_abs),
            "median_abs": _finite(self.median_abs),
            "positive_share": _finite(self.positive_share),
            "observed_pct": _finite(self.observed_pct),
            "observed_abs": _finite(self.observed_abs),
            "interval": None if self.interval is None else self.interval.to_dict(),
            "abs_interval": None if self.abs_interval is None else self.abs_interval.to_dict(),
            "iterations_requested": self.iterations_requested,
            "iterations_used": self.iterations_used,
            "degenerate_iterations": self.degenerate_iterations,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "warnings": list(self.warnings),
            "skipped_strata": [
                {"engagement_bin": s["key"].engagement_bin, "follower_bin": s["key"].follower_bin,
                 "n_low": s["n_low"], "n_high": s["n_high"]}
                for s in self.skipped_strata
            ],
            "stratum_matrix": self.per_stratum.to_rows(),
        }
        if include_distribution:
            d["distribution"] = [s.to_dict() for s in self.run.statistics]
        return d


def _safe_bca(observed, dist, jack, level, warnings, what):
    if len(dist) < MIN_BCA_DRAWS:
        return None
    if not math.isfinite(observed):
        warnings.append(f"{what} interval not computed: observed statistic undefined")
        return None
    return bca_interval(observed, dist, jack, level)


def baseline_analysis(
    data: LabeledDataset,
    config: AnalysisConfig | None = None,
    edges: tuple[BinEdges, BinEdges] | None = None,
) -> BaselineResult:
    """Matched comparison of Low against High impressions.

    Parameters
    ----------
    data : LabeledDataset
        Low and High posts.
    config : AnalysisConfig, optional
    edges : (BinEdges, BinEdges), optional
        Engagement and follower edges to reuse instead of recomputing them.

    Raises
    ------
    AnalysisError
        If a credibility group is empty or every stratum is below the size
        floor.
    """
    config = config or AnalysisConfig()
    bcfg = config.bootstrap
    strata = assign_base_strata(data.engagement, data.followers, data.label, config.bins, edges)
    groups = strata.groups(data.label)
    plan = ResamplePlan.build(
        {k: (data.impressions[lo], data.impressions[hi]) for k, (lo, hi) in groups.items()},
        bcfg.min_stratum_size,
    )
    run = run_bootstrap(plan, bcfg)

    warnings = []
    if run.plan.skipped:
        warnings.append(f"{len(run.plan.skipped)} strata below the size floor were skipped")
    if run.degenerate_iterations:
        warnings.append(f"{len(run.degenerate_iterations)} degenerate iterations excluded")
    if len(run) < MIN_BCA_DRAWS:
        warnings.append(
            f"only {len(run)} usable iterations; at least {MIN_BCA_DRAWS} are needed for BCa intervals"
        )

    pct, absd = run.pct_diff, run.abs_diff
    obs_abs, obs_pct = observed_statistic(plan, bcfg.weighting)
    jack_abs, jack_pct = jackknife_statistics(plan, bcfg.weighting, bcfg.jackknife, bcfg.jackknife_blocks)
    empty = len(run) == 0
    return BaselineResult(
        mean_pct=math.nan if empty else float(pct.mean()),
        median_pct=math.nan if empty else float(np.median(pct)),
        mean_abs=math.nan if empty else float(absd.mean()),
        median_abs=math.nan if empty else float(np.median(absd)),
        positive_share=math.nan if empty else float(100.0 * np.count_nonzero(absd > 0) / len(absd)),
        observed_pct=obs_pct,
        observed_abs=obs_abs,
        interval=_safe_bca(obs_pct, pct, jack_pct, bcfg.confidence, warnings, "percentage"),
        abs_interval=_safe_bca(obs_abs, absd, jack_abs, bcfg.confidence, warnings, "absolute"),
        per_stratum=_stratum_matrix(strata, groups, run),
        skipped_strata=run.plan.skipped,
        degenerate_iterations=len(run.degenerate_iterations),
        iterations_requested=bcfg.iterations,
        n_low=int(data.label.sum()),
        n_high=int((~data.label).sum()),
        warnings=warnings,
        strata=strata,
        run=run,
        members={k: ([data.ids[i] for i in lo], [data.ids[i] for i in hi]) for k, (lo, hi) in groups.items()},
    )


# ---------------------------------------------------------------- drilldown


@dataclass
class StratumDetail:
    key: StratumKey
    skipped: bool
    n_low: int
    n_high: int
    low_ids: list[str]
    high_ids: list[str]
    low_means: np.ndarray
    high_means: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return self.low_means - self.high_means

    @property
    def mean_abs_diff(self) -> float | None:
        return None if self.skipped else float(self.abs_diff.mean())


def stratum_drilldown(result: BaselineResult, key) -> StratumDetail:
    """Per-iteration draw means and member ids of one stratum.

    Raises
    ------
    KeyError
        If ``key`` is not a cell of the result's stratum matrix.
    """
    key = _as_key(key)
    if key not in result.per_stratum.cells:
        raise KeyError(f"no stratum {key.label()} in this result")
    cell = result.per_stratum.cells[key]
    low_ids, high_ids = result.members.get(key, ([], []))
    if cell.skipped:
        empty = np.empty(0)
        return StratumDetail(key, True, cell.n_low, cell.n_high, low_ids, high_ids, empty, empty)
    s = result.run.plan.keys.index(key)
    return StratumDetail(
        key,
        False,
        cell.n_low,
        cell.n_high,
        low_ids,
        high_ids,
        result.run.stratum_low_means[:, s].copy(),
        result.run.stratum_high_means[:, s].copy(),
    )


# ---------------------------------------------------------------- deltas


@dataclass
class DeltaValue:
    value: str
    n_low: int
    n_high: int
    estimable: bool
    amplification_pct: float | None = None
    delta_pp: float | None = None
    positive_share: float | None = None
    interval: BcaInterval | None = None
    note: str | None = None
    result: BaselineResult | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "estimable": self.estimable,
            "amplification_pct": _finite(self.amplification_pct),
            "delta_pp": _finite(self.delta_pp),
            "positive_share": _finite(self.positive_share),
            "interval": None if self.interval is None else self.interval.to_dict(),
            "note": self.note,
        }


@dataclass
class DeltaResult:
    variable: str
    baseline_pct: float
    values: list[DeltaValue]
    excluded: int = 0
    clusters: ToxicityClusters | None = None

    def __getitem__(self, value: str) -> DeltaValue:
        for v in self.values:
            if v.value == value:
                return v
        raise KeyError(value)

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "baseline_pct": _finite(self.baseline_pct),
            "excluded": self.excluded,
            "values": [v.to_dict() for v in self.values],
            "clusters": None if self.clusters is None else self.clusters.to_dict(),
        }


def _partition(data: LabeledDataset, variable: str, config: AnalysisConfig):
    """Return ([(value name, mask)], excluded count, clusters or None)."""
    if variable == "verified":
        return [("true", data.verified), ("false", ~data.verified)], 0, None
    if variable == "bias":
        groups = np.array([group_bias(b).value for b in data.bias])
        masks = [("right", groups == BiasGroup.RIGHT.value), ("left", groups == BiasGroup.LEFT.value)]
        return masks, int(np.count_nonzero(groups == BiasGroup.EXCLUDED.value)), None
    if variable == "toxicity":
        present = ~np.isnan(data.toxicity)
        if not present.any():
            raise AnalysisError("no post carries a toxicity score")
        try:
            clusters = kmeans_1d(data.toxicity[present], config.toxicity_clusters)
        except ValueError as exc:
            raise AnalysisError(str(exc)) from None
        labels = np.full(len(data), -1)
        labels[present] = clusters.labels
        masks = [(name, labels == j) for j, name in enumerate(clusters.names)]
        return masks, int(np.count_nonzero(~present)), clusters
    raise ConfigError(f"unknown stratification variable {variable!r}; choose from {VARIABLES}")


def stratified_delta(
    data: LabeledDataset,
    variable: str,
    config: AnalysisConfig | None = None,
    baseline: BaselineResult | None = None,
) -> DeltaResult:
    """Amplification within each value of ``variable`` and its change from baseline.

    Every value reruns :func:`baseline_analysis` on the posts holding that
    value, with the same seed. A value whose Low or High group is empty, or
    whose strata all fall below the size floor, is marked not estimable.
    """
    config = config or AnalysisConfig()
    if baseline is None:
        baseline = baseline_analysis(data, config)
    masks, excluded, clusters = _partition(data, variable, config)
    edges = None if config.rebin_subsets else (
        baseline.strata.engagement_edges, baseline.strata.follower_edges)

    values = []
    for name, mask in masks:
        sub = data.subset(mask)
        n_low, n_high = int(sub.label.sum()), int((~sub.label).sum())
        if n_low == 0 or n_high == 0:
            group = "Low" if n_low == 0 else "High"
            values.append(DeltaValue(name, n_low, n_high, False, note=f"no {group} credibility posts"))
            continue
        try:
            res = baseline_analysis(sub, config, edges)
        except AnalysisError as exc:
            values.append(DeltaValue(name, n_low, n_high, False, note=str(exc)))
            continue
        if not math.isfinite(res.mean_pct):
            values.append(DeltaValue(name, n_low, n_high, False, note="no usable iterations", result=res))
            continue
        values.append(DeltaValue(
            name,
            n_low,
            n_high,
            True,
            amplification_pct=res.mean_pct,
            delta_pp=res.mean_pct - baseline.mean_pct,
            positive_share=res.positive_share,
            interval=res.interval,
            note="; ".join(res.warnings) or None,
            result=res,
        ))
    return DeltaResult(variable, baseline.mean_pct, values, excluded, clusters)


def with_seed(config: AnalysisConfig, seed: int) -> AnalysisConfig:
    """Copy of ``config`` with a different bootstrap seed."""
    return replace(config, bootstrap=replace(config.bootstrap, seed=seed))
