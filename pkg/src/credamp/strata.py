"""Discrete strata for the matched comparison.

Engagement and follower counts are cut at their empirical quantiles over the
combined Low+High population. Toxicity scores are grouped with a
deterministic one-dimensional k-means, and domain bias labels collapse to a
right/left partition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AnalysisError, ConfigError

__all__ = [
    "BaseStrata",
    "BiasGroup",
    "BinEdges",
    "StratumKey",
    "ToxicityClusters",
    "assign_base_strata",
    "group_bias",
    "kmeans_1d",
    "kmeans_1d_optimal_wcss",
    "quantile_bins",
]

TOXICITY_LEVELS = ("low", "medium", "high")


@dataclass(frozen=True, order=True)
class StratumKey:
    engagement_bin: int
    follower_bin: int
    extra: str | None = None

    def label(self) -> str:
        base = f"{self.engagement_bin},{self.follower_bin}"
        return base if self.extra is None else f"{base},{self.extra}"


@dataclass(frozen=True)
class BinEdges:
    """Quantile cut points.

    A value ``v`` lands in bin ``i`` when ``cuts[i-1] < v <= cuts[i]``; the
    first bin is closed below and the last is unbounded above.
    """

    cuts: tuple[float, ...]
    lower: float
    upper: float
    requested: int

    @property
    def n_bins(self) -> int:
        return len(self.cuts) + 1

    def assign(self, values) -> np.ndarray:
        return np.searchsorted(np.asarray(self.cuts, dtype=np.float64),
                               np.asarray(values, dtype=np.float64), side="left")

    def to_dict(self) -> dict:
        return {
            "cuts": list(self.cuts),
            "lower": self.lower,
            "upper": self.upper,
            "requested_bins": self.requested,
            "n_bins": self.n_bins,
        }


def quantile_bins(values, k: int = 4) -> tuple[BinEdges, np.ndarray]:
    """Cut ``values`` into at most ``k`` similar-sized bins.

    Edges are the ``j/k`` quantiles (linear interpolation between order
    statistics) together with the minimum and maximum. Coinciding edges are
    merged, so heavily tied data yields fewer than ``k`` bins.

    Returns
    -------
    edges : BinEdges
    assignment : ndarray of int
        Bin index for each input value.

    Examples
    --------
    >>> quantile_bins([1, 2, 3, 4, 5, 6, 7, 8], 4)[1].tolist()
    [0, 0, 1, 1, 2, 2, 3, 3]
    >>> quantile_bins([0, 0, 0, 0, 1, 2, 3, 4], 4)[1].tolist()
    [0, 0, 0, 0, 1, 1, 2, 2]
    """
    if int(k) != k or k < 2:
        raise ConfigError(f"bin count must be an integer >= 2, got {k!r}")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot bin an empty sequence")
    if np.isnan(x).any():
        raise ValueError("cannot bin NaN values")
    edges = np.quantile(x, np.arange(k + 1) / k, method="linear")
    # np.unique would also do, but edges are already sorted
    keep = np.concatenate(([True], np.diff(edges) > 0))
    edges = edges[keep]
    be = BinEdges(
        cuts=tuple(float(c) for c in edges[1:-1]),
        lower=float(edges[0]),
        upper=float(edges[-1]),
        requested=int(k),
    )
    return be, be.assign(x)


# ---------------------------------------------------------------- base strata


@dataclass
class BaseStrata:
    """Engagement x follower cells for one population."""

    engagement_edges: BinEdges
    follower_edges: BinEdges
    engagement_bin: np.ndarray
    follower_bin: np.ndarray

    def keys(self) -> list[StratumKey]:
        return [StratumKey(int(e), int(f)) for e, f in zip(self.engagement_bin, self.follower_bin)]

    def key_map(self, ids: Sequence[str]) -> dict[str, StratumKey]:
        return dict(zip(ids, self.keys()))

    def groups(self, is_low) -> dict[StratumKey, tuple[np.ndarray, np.ndarray]]:
        """Row indices of the Low and High members of every occupied cell."""
        is_low = np.asarray(is_low, dtype=bool)
        code = self.engagement_bin * self.follower_edges.n_bins + self.follower_bin
        out = {}
        for c in np.unique(code):
            rows = np.flatnonzero(code == c)
            key = StratumKey(int(c // self.follower_edges.n_bins), int(c % self.follower_edges.n_bins))
            out[key] = (rows[is_low[rows]], rows[~is_low[rows]])
        return out


def assign_base_strata(
    engagement,
    followers,
    is_low,
    k: int = 4,
    edges: tuple[BinEdges, BinEdges] | None = None,
) -> BaseStrata:
    """Key every post by its (engagement bin, follower bin).

    Bin edges come from the union of Low and High posts, never from one
    group alone. Pass ``edges`` to reuse previously computed cut points.

    Raises
    ------
    AnalysisError
        If either credibility group is empty.
    """
    is_low = np.asarray(is_low, dtype=bool)
    if not is_low.any() or is_low.all():
        raise AnalysisError("both a Low and a High credibility group are required")
    if edges is None:
        e_edges, e_bin = quantile_bins(engagement, k)
        f_edges, f_bin = quantile_bins(followers, k)
    else:
        e_edges, f_edges = edges
        e_bin, f_bin = e_edges.assign(engagement), f_edges.assign(followers)
    return BaseStrata(e_edges, f_edges, np.asarray(e_bin), np.asarray(f_bin))


# ---------------------------------------------------------------- toxicity


@dataclass(frozen=True)
class ToxicityClusters:
    centroids: tuple[float, ...]
    labels: np.ndarray
    wcss: float
    iterations: int
    converged: bool
    optimal_wcss: float | None = None

    @property
    def local_optimum(self) -> bool:
        """True when Lloyd stopped above the global optimum."""
        if self.optimal_wcss is None:
            return False
        return self.wcss > self.optimal_wcss + 1e-9 * max(1.0, self.optimal_wcss)

    @property
    def names(self) -> tuple[str, ...]:
        if len(self.centroids) == 3:
            return TOXICITY_LEVELS
        return tuple(f"c{i}" for i in range(len(self.centroids)))

    def predict(self, scores) -> np.ndarray:
        return _nearest(np.asarray(scores, dtype=np.float64), np.asarray(self.centroids))

    def to_dict(self) -> dict:
        return {
            "centroids": list(self.centroids),
            "names": list(self.names),
            "sizes": np.bincount(self.labels, minlength=len(self.centroids)).tolist(),
            "wcss": self.wcss,
            "iterations": self.iterations,
            "converged": self.converged,
            "optimal_wcss": self.optimal_wcss,
            "local_optimum": self.local_optimum,
        }


def _nearest(x: np.ndarray, sorted_centroids: np.ndarray) -> np.ndarray:
    # ties at a midpoint go to the lower cluster
    mids = (sorted_centroids[:-1] + sorted_centroids[1:]) / 2.0
    return np.searchsorted(mids, x, side="left")


def _wcss(x: np.ndarray, labels: np.ndarray, k: int) -> float:
    total = 0.0
    for j in range(k):
        members = x[labels == j]
        if members.size:
            total += float(((members - members.mean()) ** 2).sum())
    return total


def _optimal_partition(vals: np.ndarray, counts: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Exact 1-D k-means over weighted sorted distinct values.

    Returns the start index of every cluster and the optimal within-cluster
    sum of squares. Each layer of the dynamic program is solved by divide and
    conquer over monotone split points, ``O(k u log u)`` overall.
    """
    u = vals.size
    shift = float(np.average(vals, weights=counts))
    v = vals - shift
    w = np.concatenate(([0.0], np.cumsum(counts, dtype=np.float64)))
    s1 = np.concatenate(([0.0], np.cumsum(v * counts)))
    s2 = np.concatenate(([0.0], np.cumsum(v * v * counts)))

    def cost(i, j):
        # sum of squares of distinct values i..j-1, vectorised over i
        cw = w[j] - w[i]
        cs = s1[j] - s1[i]
        return np.maximum((s2[j] - s2[i]) - cs * cs / cw, 0.0)

    idx = np.arange(u + 1)
    best = np.concatenate(([0.0], cost(0, idx[1:])))
    splits = []
    for layer in range(2, k + 1):
        cur = np.full(u + 1, np.inf)
        arg = np.zeros(u + 1, dtype=np.int64)
        # cluster count `layer` needs at least `layer` values
        stack = [(layer, u, layer - 1, u - 1)]
        while stack:
            lo, hi, olo, ohi = stack.pop()
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            cand = np.arange(olo, min(mid - 1, ohi) + 1)
            vals_mid = best[cand] + cost(cand, mid)
            pos = int(np.argmin(vals_mid))
            cur[mid] = vals_mid[pos]
            arg[mid] = cand[pos]
            stack.append((lo, mid - 1, olo, arg[mid]))
            stack.append((mid + 1, hi, arg[mid], ohi))
        best = cur
        splits.append(arg)

    starts = [u]
    j = u
    for arg in reversed(splits):
        j = int(arg[j])
        starts.append(j)
    starts.append(0)
    return np.array(starts[::-1][:-1]), float(best[u])


def kmeans_1d(scores, k: int = 3, max_iter: int = 100, init: str = "exact") -> ToxicityClusters:
    """Lloyd's algorithm on a line with deterministic seeding.

    With ``init="exact"`` the centroids start at the globally optimal
    partition (a Lloyd fixpoint, so iteration confirms it in one round).
    With ``init="quantile"`` they start at the ``(2j+1)/(2k)`` quantiles,
    falling back to quantiles of the distinct values when two starting
    centroids coincide. Iteration stops at an assignment fixpoint or after
    ``max_iter`` rounds.

    Raises
    ------
    ValueError
        If there are fewer than ``k`` distinct scores; partition on the
        distinct values directly in that case.
    """
    x = np.asarray(scores, dtype=np.float64)
    if k < 1:
        raise ConfigError("k must be positive")
    if init not in ("exact", "quantile"):
        raise ConfigError(f"unknown k-means init {init!r}")
    distinct, counts = np.unique(x, return_counts=True)
    if distinct.size < k:
        raise ValueError(
            f"{distinct.size} distinct scores cannot form {k} clusters; "
            "partition on the distinct values instead"
        )
    starts, optimal = _optimal_partition(distinct, counts, k)
    if init == "exact":
        bounds = np.append(starts, distinct.size)
        centroids = np.array([
            np.average(distinct[a:b], weights=counts[a:b]) for a, b in zip(bounds[:-1], bounds[1:])
        ])
    else:
        probs = (2 * np.arange(k) + 1) / (2 * k)
        centroids = np.quantile(x, probs, method="linear")
        if np.unique(centroids).size < k:
            centroids = np.quantile(distinct, probs, method="linear")

    labels = _nearest(x, centroids)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        sums = np.bincount(labels, weights=x, minlength=k)
        n = np.bincount(labels, minlength=k)
        centroids = np.where(n > 0, sums / np.maximum(n, 1), centroids)
        centroids = np.sort(centroids)
        new_labels = _nearest(x, centroids)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels

    return ToxicityClusters(
        centroids=tuple(float(c) for c in centroids),
        labels=labels,
        wcss=_wcss(x, labels, k),
        iterations=it,
        converged=converged,
        optimal_wcss=optimal,
    )


def kmeans_1d_optimal_wcss(scores, k: int = 3) -> float:
    """Globally optimal within-cluster sum of squares for ``k`` clusters."""
    vals, counts = np.unique(np.asarray(scores, dtype=np.float64), return_counts=True)
    if vals.size <= k:
        return 0.0
    return _optimal_partition(vals, counts, k)[1]


# ---------------------------------------------------------------- bias


class BiasGroup(str, enum.Enum):
    RIGHT = "right"
    LEFT = "left"
    EXCLUDED = "excluded"


_BIAS_GROUPS = {
    "far-right": BiasGroup.RIGHT,
    "right": BiasGroup.RIGHT,
    "far-left": BiasGroup.LEFT,
    "left": BiasGroup.LEFT,
}


def group_bias(bias: str | None) -> BiasGroup:
    """Collapse a five-way bias label into right, left or excluded.

    ``None`` (no bias entry for the domain), ``"none"`` and ``"unknown"``
    are excluded.
    """
    if bias is None:
        return BiasGroup.EXCLUDED
    return _BIAS_GROUPS.get(bias, BiasGroup.EXCLUDED)
