import numpy as np
import pytest

from credamp.errors import ConfigError
from credamp.ingest import label_posts, parse_posts, read_bias_table, read_credibility_table
from credamp.synth import SynthConfig, generate, read_corpus, write_corpus


def test_group_sizes_and_labels():
    c = generate(SynthConfig(n_posts=2000, low_fraction=0.05, unlabeled_fraction=0.1, seed=1))
    data = label_posts(c.posts, c.table, c.bias_table)
    assert data.summary.n_low == c.truth.n_low == 100
    assert data.summary.n_unlabeled == c.truth.n_unlabeled == 200
    assert data.summary.n_high == c.truth.n_high == 1700


def test_same_seed_same_corpus():
    a = generate(SynthConfig(n_posts=300, seed=4))
    b = generate(SynthConfig(n_posts=300, seed=4))
    c = generate(SynthConfig(n_posts=300, seed=5))
    assert a.posts == b.posts and a.ratings == b.ratings
    assert a.posts != c.posts


def test_boundary_scores_present():
    c = generate(SynthConfig(n_posts=100))
    scores = {r.credibility for r in c.ratings}
    assert {0.4, 0.5, 0.6} <= scores


def test_planted_gamma_scales_low_impressions():
    cfg = dict(n_posts=4000, seed=2)
    flat = generate(SynthConfig(**cfg))
    up = generate(SynthConfig(planted_gamma=2.0, **cfg))
    low = np.array([p.impressions for p in flat.posts])
    hi = np.array([p.impressions for p in up.posts])
    ratio = hi[low > 100] / low[low > 100]
    assert set(np.round(ratio, 1)) <= {1.0, 2.0}
    # engagement is untouched by the uplift
    assert [p.likes for p in flat.posts] == [p.likes for p in up.posts]


@pytest.mark.parametrize(
    "scope, variable, expected",
    [("verified-only", "verified", {"true": 50.0, "false": 0.0}),
     ("toxicity-high-only", "toxicity", {"low": 0.0, "medium": 0.0, "high": 50.0}),
     ("bias-right-only", "bias", {"right": 50.0, "left": 0.0})],
)
def test_scoped_truth(scope, variable, expected):
    c = generate(SynthConfig(n_posts=2000, planted_gamma=1.5, gamma_scope=scope))
    assert c.truth.expected_by_value == {variable: expected}
    assert 0 < c.truth.expected_baseline_pct < 50


def test_per_stratum_truth():
    cfg = SynthConfig(n_posts=3000, planted_gamma=1.0, gamma_scope="per-stratum",
                      stratum_gammas={(3, 3): 2.0}, low_fraction=0.2)
    t = generate(cfg).truth
    assert t.expected_by_stratum["3,3"]["pct"] == 100.0
    assert t.expected_by_stratum["0,0"]["pct"] == 0.0
    assert 0 < t.expected_baseline_pct < 100


@pytest.mark.parametrize(
    "kw", [dict(low_fraction=0.0), dict(gamma_scope="some"), dict(gamma_scope="per-stratum"),
           dict(planted_gamma=-1), dict(toxicity_weights=(0.5, 0.5, 0.5)), dict(n_posts=1),
           dict(low_fraction=0.6, unlabeled_fraction=0.4)],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_config_round_trip():
    cfg = SynthConfig(gamma_scope="per-stratum", stratum_gammas={(1, 2): 1.5}, seed=9)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_write_and_read_corpus(tmp_path):
    c = generate(SynthConfig(n_posts=500, seed=3, planted_gamma=1.2))
    paths = write_corpus(c, tmp_path / "corpus")
    got_paths, truth = read_corpus(tmp_path / "corpus")
    assert got_paths == paths
    assert truth == c.truth
    posts, skipped = parse_posts(paths["posts"])
    assert skipped == 0 and posts == c.posts
    bias = read_bias_table(paths["bias"])
    table = read_credibility_table(paths["credibility"], bias)
    assert table == c.table


def test_expected_amplification_examples():
    assert generate(SynthConfig(n_posts=200)).truth.expected_baseline_pct == 0.0
    assert generate(SynthConfig(n_posts=200, planted_gamma=1.5)).truth.expected_baseline_pct == 50.0
    t = generate(SynthConfig(n_posts=200, planted_gamma=2.0, gamma_scope="verified-only")).truth
    assert t.expected_by_value["verified"] == {"true": 100.0, "false": 0.0}


def test_null_groups_identical_in_law():
    from scipy import stats

    c = generate(SynthConfig(n_posts=40_000, low_fraction=0.25, seed=21))
    data = label_posts(c.posts, c.table)
    low, high = data.impressions[data.label], data.impressions[~data.label]
    assert stats.ks_2samp(low, high).pvalue > 0.01
    assert stats.ks_2samp(data.followers[data.label], data.followers[~data.label]).pvalue > 0.01
