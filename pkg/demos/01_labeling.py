# %% [markdown]
# # Labeling posts by domain credibility
#
# Each post is labeled by the domains it links to. A domain scoring 0.4 or
# less makes the post Low, one scoring 0.6 or more makes it High, and a
# post citing both is Low.

# %%
from credamp.ingest import DomainRating, PostRecord, extract_domain, label_credibility, label_posts

table = {
    "infowars.com": DomainRating("infowars.com", 0.1, "far-right"),
    "rumble.com": DomainRating("rumble.com", 0.2, "right"),
    "theguardian.com": DomainRating("theguardian.com", 0.9, "left"),
    "middle.org": DomainRating("middle.org", 0.5),
}

# %%
extract_domain("https://www.theguardian.com/environment/2023/jan/15/story")

# %%
# subdomains fall back to the rated parent
posts = [
    PostRecord("a", impressions=1200, followers=300, likes=4, urls=("https://video.rumble.com/v9",)),
    PostRecord("b", impressions=900, followers=800, retweets=2, urls=("https://theguardian.com/x",)),
    PostRecord("c", impressions=400, followers=50, urls=("https://middle.org/y",)),
    PostRecord("d", impressions=700, followers=120,
               urls=("https://theguardian.com/x", "https://infowars.com/z")),
]
for p in posts:
    print(p.id, label_credibility(p, table).value)

# %%
# the columnar dataset keeps Low and High posts only
data = label_posts(posts, table)
print(data.ids, data.label.tolist(), data.engagement.tolist(), data.bias)
print(data.summary.to_dict())
