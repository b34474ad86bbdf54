import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credamp.errors import ConfigError, DataError, DomainError
from credamp.ingest import (
    CredibilityLabel,
    DomainRating,
    PostRecord,
    compute_engagement,
    extract_domain,
    is_labeled_file,
    label_credibility,
    label_posts,
    match_domain,
    parse_posts,
    read_bias_table,
    read_credibility_table,
    read_labeled_posts,
    write_labeled_posts,
    write_posts,
)

TABLE = {
    "infowars.com": DomainRating("infowars.com", 0.1, "far-right"),
    "rumble.com": DomainRating("rumble.com", 0.2, "right"),
    "theguardian.com": DomainRating("theguardian.com", 0.9, "left"),
    "edge-low.org": DomainRating("edge-low.org", 0.4),
    "edge-high.org": DomainRating("edge-high.org", 0.6, "none"),
    "middle.net": DomainRating("middle.net", 0.5),
}


def post(pid="p", urls=(), **kw):
    kw.setdefault("impressions", 10)
    kw.setdefault("followers", 5)
    return PostRecord(id=pid, urls=tuple(urls), **kw)


# ---------------------------------------------------------------- domains


@pytest.mark.parametrize(
    "url, host",
    [
        ("https://www.theguardian.com/environment/article", "theguardian.com"),
        ("http://INFOWARS.com", "infowars.com"),
        ("rumble.com/v/123", "rumble.com"),
        ("https://video.rumble.com:8443/x?y=1#z", "video.rumble.com"),
        ("https://theguardian.com./a", "theguardian.com"),
        ("//cdn.example.org/a", "cdn.example.org"),
        ("https://user:pw@news.example.org/", "news.example.org"),
    ],
)
def test_extract_domain(url, host):
    assert extract_domain(url) == host


@pytest.mark.parametrize("url", ["", "   ", "http://", "not a url", "https://exa mple.com/", "https://[::1"])
def test_extract_domain_rejects(url):
    with pytest.raises(DomainError):
        extract_domain(url)


def test_match_domain_strips_subdomains():
    assert match_domain("video.rumble.com", TABLE).domain == "rumble.com"
    assert match_domain("a.b.theguardian.com", TABLE).domain == "theguardian.com"
    assert match_domain("notrumble.com", TABLE) is None
    assert match_domain("rumble.com.evil.io", TABLE) is None


# ---------------------------------------------------------------- labels


@pytest.mark.parametrize(
    "urls, label",
    [
        (["https://edge-low.org/a"], CredibilityLabel.LOW),
        (["https://edge-high.org/a"], CredibilityLabel.HIGH),
        (["https://middle.net/a"], CredibilityLabel.UNLABELED),
        (["https://theguardian.com/a", "https://infowars.com/b"], CredibilityLabel.LOW),
        (["https://unknown.org/a"], CredibilityLabel.UNLABELED),
        ([], CredibilityLabel.UNLABELED),
        (["::::", "https://www.rumble.com/x"], CredibilityLabel.LOW),
    ],
)
def test_label_credibility(urls, label):
    assert label_credibility(post(urls=urls), TABLE) is label


def test_custom_thresholds():
    p = post(urls=["https://middle.net/a"])
    assert label_credibility(p, TABLE, low_max=0.5, high_min=0.7) is CredibilityLabel.LOW
    assert label_credibility(p, TABLE, low_max=0.3, high_min=0.5) is CredibilityLabel.HIGH
    with pytest.raises(ConfigError):
        label_credibility(p, TABLE, low_max=0.6, high_min=0.6)


def test_labeling_fixture(fixtures_dir):
    table = read_credibility_table(fixtures_dir / "labeling_credibility.csv")
    posts, skipped = parse_posts(fixtures_dir / "labeling_posts.jsonl")
    expected = [json.loads(line)["expected_label"]
                for line in (fixtures_dir / "labeling_posts.jsonl").read_text().splitlines()]
    assert skipped == 0 and len(posts) == 50
    assert [label_credibility(p, table).value for p in posts] == expected


_score = st.floats(min_value=0, max_value=1, allow_nan=False)


@given(st.lists(_score, min_size=0, max_size=6))
def test_label_rule_property(scores):
    table = {f"d{i}.com": DomainRating(f"d{i}.com", s) for i, s in enumerate(scores)}
    p = post(urls=[f"https://d{i}.com/x" for i in range(len(scores))])
    got = label_credibility(p, table)
    if any(s <= 0.4 for s in scores):
        assert got is CredibilityLabel.LOW
    elif any(s >= 0.6 for s in scores):
        assert got is CredibilityLabel.HIGH
    else:
        assert got is CredibilityLabel.UNLABELED


# ---------------------------------------------------------------- records


def test_engagement_is_sum_of_four_counts():
    p = post(likes=3, retweets=4, replies=5, quotes=6)
    assert compute_engagement(p) == 18


@pytest.mark.parametrize("bad", [dict(impressions=-1), dict(likes=-2), dict(toxicity=1.5), dict(pid="")])
def test_post_validation(bad):
    with pytest.raises(ValueError):
        post(**bad)


def test_parse_posts_skips_malformed_lines():
    lines = [
        '{"id": "a", "impression_count": 5, "followers_count": 2, "like_count": 1, "urls": ["x.com"]}\n',
        "\n",
        "{not json}\n",
        '{"id": "b", "impression_count": -5, "followers_count": 2}\n',
        '{"id": "c", "followers_count": 2}\n',
        '[1, 2]\n',
        '{"id": 7, "impression_count": "12", "followers_count": 3.0, "verified": "true",'
        ' "toxicity": null, "created_at": "2023-01-02T03:04:05Z"}\n',
    ]
    posts, skipped = parse_posts(io.StringIO("".join(lines)))
    assert [p.id for p in posts] == ["a", "7"]
    assert skipped == 4
    assert posts[1].impressions == 12 and posts[1].verified and posts[1].toxicity is None
    assert posts[1].created_at.isoformat() == "2023-01-02T03:04:05+00:00"


def test_parse_posts_field_map():
    line = '{"tweet_id": "z", "views": 9, "author_followers": 4, "links": "https://rumble.com/a"}'
    posts, skipped = parse_posts(
        [line], {"id": "tweet_id", "impressions": "views", "followers": "author_followers", "urls": "links"}
    )
    assert skipped == 0
    assert posts[0].impressions == 9 and posts[0].urls == ("https://rumble.com/a",)


@given(
    st.lists(
        st.tuples(
            st.integers(0, 10**9), st.integers(0, 10**7), st.integers(0, 1000), st.booleans(),
            st.one_of(st.none(), st.floats(0, 1)),
        ),
        max_size=20,
    )
)
def test_write_parse_round_trip(tmp_path_factory, rows):
    posts = [
        PostRecord(f"id{i}", imp, fol, likes=lk, verified=v, toxicity=t, urls=("https://a.com/x",))
        for i, (imp, fol, lk, v, t) in enumerate(rows)
    ]
    path = tmp_path_factory.mktemp("rt") / "posts.jsonl"
    write_posts(posts, path)
    back, skipped = parse_posts(path)
    assert skipped == 0 and back == posts


# ---------------------------------------------------------------- tables


def test_read_tables(tmp_path):
    cred = tmp_path / "cred.csv"
    cred.write_text("Domain,Score\nwww.Rumble.com,0.2\nhttps://theguardian.com/,0.9\n\n")
    bias = tmp_path / "bias.csv"
    bias.write_text("domain,bias\nrumble.com,Right\ntheguardian.com,-1\nother.org,No Bias\n")
    b = read_bias_table(bias)
    assert b == {"rumble.com": "right", "theguardian.com": "unknown", "other.org": "none"}
    t = read_credibility_table(cred, b)
    assert t["rumble.com"] == DomainRating("rumble.com", 0.2, "right")
    assert t["theguardian.com"].bias == "unknown"


@pytest.mark.parametrize(
    "text",
    ["site,score\na.com,0.1\n", "domain,score\na.com,1.7\n", "domain,score\na.com,abc\n",
     "domain,score\na.com,0.1\na.com,0.2\n", "domain,score\nnot a domain,0.1\n", "domain,score\na.com\n"],
)
def test_credibility_table_errors(tmp_path, text):
    path = tmp_path / "c.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        read_credibility_table(path)


def test_bias_table_rejects_unknown_label(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("domain,bias\na.com,centrist\n")
    with pytest.raises(DataError):
        read_bias_table(path)


# ---------------------------------------------------------------- labeled dataset


def _posts():
    return [
        post("1", ["https://infowars.com/a"], impressions=100, likes=1, retweets=2, verified=True, toxicity=0.9),
        post("2", ["https://theguardian.com/a"], impressions=50, replies=4),
        post("3", ["https://middle.net/a"], impressions=70),
        post("4", ["https://theguardian.com/a", "https://video.rumble.com/b", "https://infowars.com/c"],
             impressions=30),
        post("5", ["https://edge-high.org/a", "https://theguardian.com/b"], impressions=20),
    ]


def test_label_posts_columns_and_summary():
    data = label_posts(_posts(), TABLE, skipped_lines=3)
    assert data.ids == ["1", "2", "4", "5"]
    assert data.label.tolist() == [True, False, True, False]
    assert data.engagement.tolist() == [3, 4, 0, 0]
    assert data.impressions.tolist() == [100, 50, 30, 20]
    assert np.isnan(data.toxicity[1]) and data.toxicity[0] == 0.9
    # the lowest-credibility Low domain decides; the highest High domain decides
    assert data.label_domain == ["infowars.com", "theguardian.com", "infowars.com", "theguardian.com"]
    assert data.bias == ["far-right", "left", "far-right", "left"]
    s = data.summary
    assert (s.n_posts, s.n_low, s.n_high, s.n_unlabeled, s.n_mixed, s.skipped_lines) == (5, 2, 2, 1, 1, 3)
    assert s.top_low_domains == [("infowars.com", 2), ("rumble.com", 1)]
    assert s.top_high_domains[0] == ("theguardian.com", 2)


def test_label_posts_bias_fallback_table():
    table = {"rumble.com": DomainRating("rumble.com", 0.2)}
    data = label_posts([post("1", ["https://video.rumble.com/a"])], table, bias={"rumble.com": "right"})
    assert data.bias == ["right"]


def test_label_posts_rejects_duplicate_ids():
    with pytest.raises(DataError, match="duplicate"):
        label_posts([post("1", ["https://rumble.com"]), post("1", ["https://rumble.com"])], TABLE)


def test_labeled_file_round_trip(tmp_path):
    data = label_posts(_posts(), TABLE)
    path = tmp_path / "labeled.jsonl"
    write_labeled_posts(data, path)
    assert is_labeled_file(path)
    back = read_labeled_posts(path)
    assert back.ids == data.ids
    for col in ("label", "impressions", "engagement", "followers", "verified"):
        assert np.array_equal(getattr(back, col), getattr(data, col))
    assert np.array_equal(back.toxicity, data.toxicity, equal_nan=True)
    assert back.bias == data.bias and back.label_domain == data.label_domain


def test_raw_posts_are_not_labeled_file(fixtures_dir):
    assert not is_labeled_file(fixtures_dir / "labeling_posts.jsonl")


def test_read_labeled_posts_errors():
    with pytest.raises(DataError):
        read_labeled_posts(io.StringIO('{"id": "1"}\n'))


def test_parse_examples():
    line = '{"id": "x", "impression_count": 150, "followers_count": 2000, "urls": ["https://rumble.com/v1"]}'
    posts, skipped = parse_posts([line])
    assert skipped == 0
    assert (posts[0].impressions, posts[0].followers, posts[0].urls) == (150, 2000, ("https://rumble.com/v1",))
    posts, skipped = parse_posts(['{"id": "y", "followers_count": 3}'])
    assert posts == [] and skipped == 1
    assert parse_posts(io.StringIO("")) == ([], 0)


@pytest.mark.parametrize("counts, total", [((2, 1, 0, 1), 4), ((0, 0, 0, 0), 0), ((10, 0, 0, 0), 10)])
def test_engagement_examples(counts, total):
    likes, retweets, replies, quotes = counts
    assert compute_engagement(post(likes=likes, retweets=retweets, replies=replies, quotes=quotes)) == total


def test_match_examples():
    assert match_domain("theguardian.com", TABLE) is TABLE["theguardian.com"]
    assert match_domain("unknownsite.org", TABLE) is None
