# %% [markdown]
# # Baseline amplification and per-variable deltas
#
# Runs the full comparison on the bundled fixture corpus and breaks it down
# by verification status, toxicity level and political bias.

# %%
from pathlib import Path

from credamp.amplify import AnalysisConfig, baseline_analysis, stratified_delta, stratum_drilldown
from credamp.bootstrap import BootstrapConfig
from credamp.ingest import label_posts, parse_posts, read_bias_table, read_credibility_table

root = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "default"
bias = read_bias_table(root / "bias.csv")
table = read_credibility_table(root / "credibility.csv", bias)
posts, skipped = parse_posts(root / "posts.jsonl")
data = label_posts(posts, table, bias, skipped_lines=skipped)
data.summary.to_dict()

# %%
config = AnalysisConfig(bootstrap=BootstrapConfig(iterations=1000, seed=0))
base = baseline_analysis(data, config)
print(f"Low posts get {base.mean_pct:+.1f}% impressions (95% BCa {base.interval.lower:.1f} .. {base.interval.upper:.1f})")

# %%
# per-cell mean percentage differences, engagement bins down, follower bins across
base.per_stratum.grid("mean_pct_diff").round(1)

# %%
detail = stratum_drilldown(base, (3, 3))
detail.n_low, detail.n_high, detail.mean_abs_diff

# %%
for variable in ("verified", "toxicity", "bias"):
    d = stratified_delta(data, variable, config, base)
    for v in d.values:
        if v.estimable:
            print(f"{variable:9s} {v.value:7s} {v.amplification_pct:+7.1f}%  delta {v.delta_pp:+6.1f} pp")
        else:
            print(f"{variable:9s} {v.value:7s} not estimable: {v.note}")
