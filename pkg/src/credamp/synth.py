"""Synthetic corpora with a known planted amplification factor.

Every post gets a *base* impression count from a log-normal model tied to
its author's follower count. Engagement is drawn from the base count, so
engagement strata bind without depending on the planted effect. Low
credibility posts inside the chosen scope then have their impressions
multiplied by ``planted_gamma``. Because the scope attributes (verified
flag, toxicity component, domain bias) are drawn independently of the base
count, the expected amplification inside a scope is ``100 * (gamma - 1)``
percent and zero outside it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from os import PathLike
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import DomainRating, PostRecord, write_bias_table, write_credibility_table, write_posts
from .strata import BiasGroup, group_bias, quantile_bins

__all__ = ["GroundTruth", "SynthConfig", "SynthCorpus", "generate", "read_corpus", "write_corpus"]

SCOPES = ("all", "per-stratum", "verified-only", "toxicity-high-only", "bias-right-only")

# toxicity components are well separated so 3-means recovers them exactly
_TOXICITY_RANGES = ((0.0, 0.15), (0.40, 0.60), (0.85, 1.0))

_LOW_BIASES = ("far-right", "far-right", "right", "right", "right", "left", "left", "far-left", "none", None)
_HIGH_BIASES = ("right", "right", "right", "left", "left", "left", "left", "none", "none", "unknown", None, None)

_EPOCH = datetime(2023, 1, 15, tzinfo=timezone.utc)
_WINDOW_SECONDS = 14 * 24 * 3600


@dataclass(frozen=True)
class SynthConfig:
    n_posts: int = 10_000
    low_fraction: float = 0.0377
    unlabeled_fraction: float = 0.0
    impressions_mu: float = 6.0
    impressions_sigma: float = 0.8
    follower_mu: float = 6.0
    follower_sigma: float = 1.5
    follower_elasticity: float = 0.5
    engagement_coupling: float = 0.02
    planted_gamma: float = 1.0
    gamma_scope: str = "all"
    stratum_gammas: dict = field(default_factory=dict)
    verified_fraction: float = 0.3
    toxicity_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)
    subdomain_fraction: float = 0.1
    bins: int = 4
    topic: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        if self.n_posts < 2:
            raise ConfigError("n_posts must be at least 2")
        if not 0.0 < self.low_fraction < 1.0:
            raise ConfigError("low_fraction must lie in (0, 1)")
        if not 0.0 <= self.unlabeled_fraction < 1.0 - self.low_fraction:
            raise ConfigError("unlabeled_fraction leaves no room for High posts")
        if self.planted_gamma < 0:
            raise ConfigError("planted_gamma must be non-negative")
        if self.gamma_scope not in SCOPES:
            raise ConfigError(f"gamma_scope must be one of {SCOPES}, got {self.gamma_scope!r}")
        if self.gamma_scope == "per-stratum" and not self.stratum_gammas:
            raise ConfigError("per-stratum scope needs stratum_gammas")
        if any(g < 0 for g in self.stratum_gammas.values()):
            raise ConfigError("stratum gammas must be non-negative")
        if self.impressions_sigma < 0 or self.follower_sigma < 0 or self.engagement_coupling <= 0:
            raise ConfigError("invalid impression, follower or engagement model parameters")
        if not 0.0 <= self.verified_fraction <= 1.0:
            raise ConfigError("verified_fraction must lie in [0, 1]")
        w = np.asarray(self.toxicity_weights, dtype=float)
        if w.shape != (3,) or (w < 0).any() or not np.isclose(w.sum(), 1.0):
            raise ConfigError("toxicity_weights must be three non-negative numbers summing to 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stratum_gammas"] = {f"{e},{f}": g for (e, f), g in sorted(self.stratum_gammas.items())}
        d["toxicity_weights"] = list(self.toxicity_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        d = dict(d)
        d["stratum_gammas"] = {
            tuple(int(p) for p in k.split(",")): float(v) for k, v in d.get("stratum_gammas", {}).items()
        }
        d["toxicity_weights"] = tuple(d.get("toxicity_weights", (0.5, 0.3, 0.2)))
        return cls(**d)


@dataclass
class GroundTruth:
    """Amplification the estimator should recover, in percent."""

    gamma: float
    scope: str
    expected_baseline_pct: float
    expected_by_value: dict[str, dict[str, float]]
    expected_by_stratum: dict[str, dict[str, float]]
    n_low: int
    n_high: int
    n_unlabeled: int
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> GroundTruth:
        return cls(**d)


@dataclass
class SynthCorpus:
    posts: list[PostRecord]
    ratings: list[DomainRating]
    truth: GroundTruth

    @property
    def table(self) -> dict[str, DomainRating]:
        return {r.domain: r for r in self.ratings}

    @property
    def bias_table(self) -> dict[str, str]:
        return {r.domain: r.bias for r in self.ratings if r.bias is not None}


def _ratings(rng: np.random.Generator) -> tuple[list[DomainRating], list[DomainRating], list[DomainRating]]:
    low_scores = np.round(rng.uniform(0.02, 0.4, len(_LOW_BIASES)), 3)
    low_scores[0] = 0.4
    high_scores = np.round(rng.uniform(0.6, 0.99, len(_HIGH_BIASES)), 3)
    high_scores[0] = 0.6
    low = [DomainRating(f"lc{i:02d}-news.example", float(s), b)
           for i, (s, b) in enumerate(zip(low_scores, _LOW_BIASES))]
    high = [DomainRating(f"hc{i:02d}-news.example", float(s), b)
            for i, (s, b) in enumerate(zip(high_scores, _HIGH_BIASES))]
    mid = [DomainRating("mid00-news.example", 0.5, None)]
    return low, high, mid


def generate(config: SynthConfig) -> SynthCorpus:
    """Draw a corpus and its ground truth from ``config``."""
    rng = np.random.default_rng(config.seed)
    n = config.n_posts
    n_low = int(round(n * config.low_fraction))
    n_unl = int(round(n * config.unlabeled_fraction))
    n_high = n - n_low - n_unl
    if n_low < 1 or n_high < 1:
        raise ConfigError("configuration yields an empty Low or High group")

    # 0 = low, 1 = high, 2 = unlabeled
    cls = rng.permutation(np.repeat(np.array([0, 1, 2], dtype=np.int8), [n_low, n_high, n_unl]))
    is_low = cls == 0

    followers = np.floor(rng.lognormal(config.follower_mu, config.follower_sigma, n)).astype(np.int64)
    log_base = (
        config.impressions_mu
        + config.follower_elasticity * (np.log1p(followers) - config.follower_mu)
        + config.impressions_sigma * rng.standard_normal(n)
    )
    base = np.exp(log_base)
    engagement = rng.poisson(config.engagement_coupling * base)
    parts = rng.multinomial(engagement, [0.6, 0.2, 0.1, 0.1])
    verified = rng.random(n) < config.verified_fraction
    component = rng.choice(3, size=n, p=np.asarray(config.toxicity_weights))
    lo_edge = np.array([r[0] for r in _TOXICITY_RANGES])[component]
    hi_edge = np.array([r[1] for r in _TOXICITY_RANGES])[component]
    toxicity = np.round(lo_edge + (hi_edge - lo_edge) * rng.random(n), 6)

    low_r, high_r, mid_r = _ratings(rng)
    domain_idx = np.where(
        cls == 0,
        rng.integers(0, len(low_r), n),
        np.where(cls == 1, rng.integers(0, len(high_r), n), 0),
    )
    post_domain = [
        (low_r if c == 0 else high_r if c == 1 else mid_r)[d] for c, d in zip(cls, domain_idx)
    ]
    bias_group = np.array([group_bias(r.bias).value for r in post_domain])

    labeled = cls != 2
    e_edges, e_bin = quantile_bins(engagement[labeled], config.bins)
    f_edges, f_bin = quantile_bins(followers[labeled], config.bins)
    e_all = e_edges.assign(engagement)
    f_all = f_edges.assign(followers)

    gamma = config.planted_gamma
    scope_mask = {
        "all": np.ones(n, bool),
        "per-stratum": np.zeros(n, bool),
        "verified-only": verified,
        "toxicity-high-only": component == 2,
        "bias-right-only": bias_group == BiasGroup.RIGHT.value,
    }[config.gamma_scope]
    uplift = np.where(is_low & scope_mask, gamma, 1.0)
    if config.gamma_scope == "per-stratum":
        for (e, f), g in config.stratum_gammas.items():
            uplift[is_low & (e_all == e) & (f_all == f)] = g
    impressions = np.rint(base * uplift).astype(np.int64)

    url_prefix = np.where(rng.random(n) < config.subdomain_fraction, "https://video.", "https://www.")
    seconds = rng.integers(0, _WINDOW_SECONDS, n)

    posts = [
        PostRecord(
            id=f"syn{config.seed}-{i:07d}",
            impressions=int(impressions[i]),
            followers=int(followers[i]),
            likes=int(parts[i, 0]),
            retweets=int(parts[i, 1]),
            replies=int(parts[i, 2]),
            quotes=int(parts[i, 3]),
            verified=bool(verified[i]),
            toxicity=float(toxicity[i]),
            urls=(f"{url_prefix[i]}{post_domain[i].domain}/article/{i}",),
            created_at=_EPOCH + timedelta(seconds=int(seconds[i])),
            topic=config.topic,
        )
        for i in range(n)
    ]

    truth = _ground_truth(config, is_low, cls == 1, base, uplift, scope_mask, e_all, f_all,
                          e_edges.n_bins, f_edges.n_bins, n_unl)
    return SynthCorpus(posts, low_r + high_r + mid_r, truth)


def _ground_truth(config, is_low, is_high, base, uplift, scope_mask, e_all, f_all, n_e, n_f, n_unl):
    pct = 100.0 * (config.planted_gamma - 1.0)
    scope = config.gamma_scope

    # the matched estimator pools min(n_low, n_high) draws per stratum, so the
    # expected pooled uplift weighs each stratum's mean base by that count
    num = den = 0.0
    by_stratum = {}
    for e in range(n_e):
        for f in range(n_f):
            cell = (e_all == e) & (f_all == f)
            lo, hi = cell & is_low, cell & is_high
            if not lo.any() or not hi.any():
                continue
            m = min(lo.sum(), hi.sum())
            mean_base = base[cell & (is_low | is_high)].mean()
            mean_uplift_base = (base[lo] * uplift[lo]).mean() / base[lo].mean() * mean_base
            num += m * mean_uplift_base
            den += m * mean_base
            if scope == "per-stratum":
                g = config.stratum_gammas.get((e, f), 1.0)
                by_stratum[f"{e},{f}"] = {"pct": 100.0 * (g - 1.0), "abs": (g - 1.0) * mean_base}
    if scope == "all":
        baseline = pct
    elif scope == "per-stratum":
        baseline = 100.0 * (num / den - 1.0)
    else:
        share = scope_mask[is_low].mean()
        baseline = pct * share

    by_value = {}
    if scope == "verified-only":
        by_value["verified"] = {"true": pct, "false": 0.0}
    elif scope == "toxicity-high-only":
        by_value["toxicity"] = {"low": 0.0, "medium": 0.0, "high": pct}
    elif scope == "bias-right-only":
        by_value["bias"] = {"right": pct, "left": 0.0}

    return GroundTruth(
        gamma=config.planted_gamma,
        scope=scope,
        expected_baseline_pct=float(baseline),
        expected_by_value=by_value,
        expected_by_stratum=by_stratum,
        n_low=int(is_low.sum()),
        n_high=int(is_high.sum()),
        n_unlabeled=int(n_unl),
        config=config.to_dict(),
    )


CORPUS_FILES = {
    "posts": "posts.jsonl",
    "credibility": "credibility.csv",
    "bias": "bias.csv",
    "truth": "ground_truth.json",
}


def write_corpus(corpus: SynthCorpus, directory: str | PathLike) -> dict[str, Path]:
    """Write posts, rating tables and the ground-truth sidecar into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in CORPUS_FILES.items()}
    write_posts(corpus.posts, paths["posts"])
    write_credibility_table(corpus.ratings, paths["credibility"])
    write_bias_table(corpus.ratings, paths["bias"])
    paths["truth"].write_text(json.dumps(corpus.truth.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths


def read_corpus(directory: str | PathLike) -> tuple[dict[str, Path], GroundTruth]:
    """Locate the files of a written corpus and load its ground truth."""
    out = Path(directory)
    paths = {k: out / v for k, v in CORPUS_FILES.items()}
    truth = GroundTruth.from_dict(json.loads(paths["truth"].read_text()))
    return paths, truth
