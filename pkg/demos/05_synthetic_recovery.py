# %% [markdown]
# # Recovering a planted effect
#
# The generator multiplies the impressions of Low posts by gamma, optionally
# only for some of them. The estimator should find 100 * (gamma - 1) where
# the uplift was planted and nothing elsewhere.

# %%
from credamp.amplify import AnalysisConfig, baseline_analysis, stratified_delta
from credamp.bootstrap import BootstrapConfig
from credamp.ingest import label_posts
from credamp.synth import SynthConfig, generate

corpus = generate(SynthConfig(n_posts=50_000, low_fraction=0.05, planted_gamma=1.5,
                              gamma_scope="verified-only", seed=4))
print(corpus.truth.expected_baseline_pct, corpus.truth.expected_by_value)

# %%
data = label_posts(corpus.posts, corpus.table, corpus.bias_table)
config = AnalysisConfig(bootstrap=BootstrapConfig(iterations=500, seed=0))
base = baseline_analysis(data, config)
print(base.mean_pct, base.interval)

# %%
delta = stratified_delta(data, "verified", config, base)
print({v.value: round(v.amplification_pct, 1) for v in delta.values})
