# %% [markdown]
# # Strata: quantile bins and toxicity clusters
#
# Posts are matched within engagement x follower quartile cells. Heavily
# tied counts merge duplicate quantile edges instead of producing empty
# look-alike bins.

# %%
import numpy as np

from credamp.strata import assign_base_strata, kmeans_1d, quantile_bins

edges, bins = quantile_bins([1, 2, 3, 4, 5, 6, 7, 8], 4)
edges.cuts, bins.tolist()

# %%
# zero-inflated engagement: most posts get no likes at all
rng = np.random.default_rng(0)
engagement = np.where(rng.random(1000) < 0.6, 0, rng.negative_binomial(1, 0.1, 1000))
edges, bins = quantile_bins(engagement, 4)
print(edges.to_dict())
print(np.bincount(bins))

# %%
followers = rng.lognormal(6, 1.5, 1000).astype(int)
is_low = rng.random(1000) < 0.1
strata = assign_base_strata(engagement, followers, is_low)
{k.label(): (len(lo), len(hi)) for k, (lo, hi) in strata.groups(is_low).items()}

# %%
# toxicity levels come from exact 1-D k-means; with quantile seeds Lloyd
# agrees on well separated levels like these, and reports local_optimum
# when it stalls in a worse partition
scores = np.concatenate([rng.uniform(0, 0.15, 500), rng.uniform(0.4, 0.6, 300), rng.uniform(0.85, 1, 200)])
exact = kmeans_1d(scores, 3)
seeded = kmeans_1d(scores, 3, init="quantile")
print(exact.centroids, exact.wcss, exact.local_optimum)
print(seeded.centroids, seeded.wcss, seeded.local_optimum)
