"""Post and domain-table ingestion, URL normalization and credibility labeling.

Posts arrive as line-delimited JSON, one object per line. Rating tables are
two-column CSV files (``domain,score`` and ``domain,bias``). Labeling is
presence based: a post citing any low-credibility domain is Low, otherwise a
post citing a high-credibility domain is High, otherwise it is Unlabeled.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from os import PathLike
from typing import IO, Iterable, Iterator, Mapping, Sequence
from urllib.parse import urlsplit

import numpy as np

from .errors import ConfigError, DataError, DomainError

__all__ = [
    "BIAS_LABELS",
    "DEFAULT_FIELD_MAP",
    "CredibilityLabel",
    "DomainRating",
    "LabeledDataset",
    "LabelingSummary",
    "PostRecord",
    "compute_engagement",
    "extract_domain",
    "label_credibility",
    "label_posts",
    "match_domain",
    "parse_posts",
    "read_bias_table",
    "read_credibility_table",
    "read_labeled_posts",
    "write_credibility_table",
    "write_bias_table",
    "write_labeled_posts",
    "write_posts",
]

log = logging.getLogger(__name__)

DEFAULT_LOW_MAX = 0.4
DEFAULT_HIGH_MIN = 0.6

#: PostRecord attribute -> input field name.
DEFAULT_FIELD_MAP: Mapping[str, str] = {
    "id": "id",
    "created_at": "created_at",
    "impressions": "impression_count",
    "likes": "like_count",
    "retweets": "retweet_count",
    "replies": "reply_count",
    "quotes": "quote_count",
    "followers": "followers_count",
    "verified": "verified",
    "toxicity": "toxicity",
    "urls": "urls",
    "topic": "topic",
}

_REQUIRED = ("id", "impressions", "followers")
_COUNTS = ("likes", "retweets", "replies", "quotes")

BIAS_LABELS = ("far-left", "left", "none", "right", "far-right", "unknown")
_BIAS_ALIASES = {"-1": "unknown", "no bias": "none", "no-bias": "none", "": "unknown"}

_HOST_RE = re.compile(r"^(?:[\w-]+\.)+[\w-]+$")


class CredibilityLabel(str, enum.Enum):
    LOW = "low"
    HIGH = "high"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class PostRecord:
    """One social-media post.

    ``impressions`` is the passive exposure count that the analysis compares;
    the four engagement counts and ``followers`` drive stratification.
    """

    id: str
    impressions: int
    followers: int
    likes: int = 0
    retweets: int = 0
    replies: int = 0
    quotes: int = 0
    verified: bool = False
    toxicity: float | None = None
    urls: tuple[str, ...] = ()
    created_at: datetime | None = None
    topic: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("post id must be non-empty")
        for name in ("impressions", "followers", *_COUNTS):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.toxicity is not None and not 0.0 <= self.toxicity <= 1.0:
            raise ValueError("toxicity must lie in [0, 1]")


@dataclass(frozen=True)
class DomainRating:
    domain: str
    credibility: float
    bias: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.credibility <= 1.0:
            raise ValueError(f"credibility for {self.domain!r} outside [0, 1]")
        if self.bias is not None and self.bias not in BIAS_LABELS:
            raise ValueError(f"unknown bias label {self.bias!r}")


# ---------------------------------------------------------------- parsing


def _as_count(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean where a count was expected")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError("non-integral count")
        value = int(value)
    elif isinstance(value, str):
        value = int(value.strip())
    elif not isinstance(value, int):
        raise ValueError(f"not a count: {value!r}")
    if value < 0:
        raise ValueError("negative count")
    return value


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in ("true", "false", "1", "0"):
        return value.strip().lower() in ("true", "1")
    raise ValueError(f"not a boolean: {value!r}")


def _as_timestamp(value) -> datetime:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return datetime.fromtimestamp(int(value), tz=timezone.utc)
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _record_from_obj(obj: Mapping, field_map: Mapping[str, str]) -> PostRecord:
    def get(name, default=None):
        key = field_map.get(name, name)
        return obj.get(key, default)

    for name in _REQUIRED:
        if get(name) is None:
            raise ValueError(f"missing required field {field_map.get(name, name)!r}")

    urls = get("urls") or ()
    if isinstance(urls, str):
        urls = (urls,)
    if not all(isinstance(u, str) for u in urls):
        raise ValueError("urls must be strings")

    tox = get("toxicity")
    if tox is not None:
        tox = float(tox)
        if math.isnan(tox):
            tox = None

    created = get("created_at")
    topic = get("topic")
    return PostRecord(
        id=str(get("id")),
        impressions=_as_count(get("impressions")),
        followers=_as_count(get("followers")),
        likes=_as_count(get("likes", 0)),
        retweets=_as_count(get("retweets", 0)),
        replies=_as_count(get("replies", 0)),
        quotes=_as_count(get("quotes", 0)),
        verified=_as_bool(get("verified", False)),
        toxicity=tox,
        urls=tuple(urls),
        created_at=None if created is None else _as_timestamp(created),
        topic=None if topic is None else str(topic),
    )


def _open_lines(source) -> tuple[Iterable[str], IO | None]:
    if isinstance(source, (str, PathLike)):
        fh = open(source, encoding="utf-8")
        return fh, fh
    return source, None


def parse_posts(
    source: str | PathLike | Iterable[str],
    field_map: Mapping[str, str] | None = None,
) -> tuple[list[PostRecord], int]:
    """Parse line-delimited JSON posts.

    Parameters
    ----------
    source : path or iterable of lines
        A file path, an open text stream, or any iterable of strings.
    field_map : mapping, optional
        PostRecord attribute -> input field name. Missing entries fall back
        to :data:`DEFAULT_FIELD_MAP`.

    Returns
    -------
    posts : list of PostRecord
        One record per well-formed line, in input order.
    skipped : int
        Count of non-blank lines that were malformed or failed validation.

    Raises
    ------
    OSError
        If the source cannot be opened or read.
    """
    fmap = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fmap.update(field_map)

    lines, handle = _open_lines(source)
    posts: list[PostRecord] = []
    skipped = 0
    try:
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                posts.append(_record_from_obj(obj, fmap))
            except (ValueError, TypeError) as exc:
                skipped += 1
                log.debug("skipping line %d: %s", lineno, exc)
    finally:
        if handle is not None:
            handle.close()
    return posts, skipped


def _post_to_obj(post: PostRecord) -> dict:
    f = DEFAULT_FIELD_MAP
    obj = {
        f["id"]: post.id,
        f["created_at"]: None
        if post.created_at is None
        else post.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        f["impressions"]: post.impressions,
        f["likes"]: post.likes,
        f["retweets"]: post.retweets,
        f["replies"]: post.replies,
        f["quotes"]: post.quotes,
        f["followers"]: post.followers,
        f["verified"]: post.verified,
        f["toxicity"]: post.toxicity,
        f["urls"]: list(post.urls),
    }
    if post.topic is not None:
        obj[f["topic"]] = post.topic
    return obj


def write_posts(posts: Iterable[PostRecord], path: str | PathLike) -> None:
    """Write posts using the default field names, one JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for post in posts:
            fh.write(json.dumps(_post_to_obj(post), sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------- domains


def extract_domain(url: str) -> str:
    """Reduce a URL to its lowercase host without a leading ``www.``.

    Scheme-less input such as ``"example.com/path"`` is accepted.

    >>> extract_domain("https://www.theguardian.com/env/a?x=1")
    'theguardian.com'
    >>> extract_domain("HTTP://Rumble.com:443/v123")
    'rumble.com'
    """
    if not isinstance(url, str) or not url.strip():
        raise DomainError("empty URL")
    text = url.strip()
    if "://" not in text and not text.startswith("//"):
        text = "//" + text
    try:
        host = urlsplit(text).hostname
    except ValueError as exc:
        raise DomainError(f"cannot parse URL {url!r}: {exc}") from None
    if not host:
        raise DomainError(f"no host in URL {url!r}")
    host = host.rstrip(".")
    if host.startswith("www."):
        host = host[4:]
    if not _HOST_RE.match(host):
        raise DomainError(f"invalid host {host!r} in URL {url!r}")
    return host


def match_domain(domain: str, table: Mapping[str, DomainRating]) -> DomainRating | None:
    """Look up ``domain``, stripping leftmost labels until a rating is found.

    ``video.rumble.com`` falls back to ``rumble.com``. Multi-label public
    suffixes are not special-cased, so a table entry for ``co.uk`` would
    match every ``*.co.uk`` host.
    """
    return _suffix_get(domain, table)


def _suffix_get(domain: str, table: Mapping):
    labels = domain.split(".")
    for i in range(len(labels)):
        hit = table.get(".".join(labels[i:]))
        if hit is not None:
            return hit
    return None


def _check_thresholds(low_max: float, high_min: float) -> None:
    if not 0.0 <= low_max < high_min <= 1.0:
        raise ConfigError(
            f"thresholds must satisfy 0 <= low_max < high_min <= 1, got {low_max}, {high_min}"
        )


def _matched_ratings(post: PostRecord, table: Mapping[str, DomainRating]) -> list[DomainRating]:
    found = {}
    for url in post.urls:
        try:
            domain = extract_domain(url)
        except DomainError:
            continue
        rating = match_domain(domain, table)
        if rating is not None:
            found[rating.domain] = rating
    return list(found.values())


def _decide(ratings: Sequence[DomainRating], low_max: float, high_min: float):
    """Return (label, deciding rating, is_mixed)."""
    low = [r for r in ratings if r.credibility <= low_max]
    high = [r for r in ratings if r.credibility >= high_min]
    if low:
        deciding = min(low, key=lambda r: (r.credibility, r.domain))
        return CredibilityLabel.LOW, deciding, bool(high)
    if high:
        deciding = max(high, key=lambda r: (r.credibility, _reverse_key(r.domain)))
        return CredibilityLabel.HIGH, deciding, False
    return CredibilityLabel.UNLABELED, None, False


def _reverse_key(domain: str):
    # max() with lexicographically smallest domain winning ties
    return tuple(-ord(c) for c in domain)


def label_credibility(
    post: PostRecord,
    table: Mapping[str, DomainRating],
    low_max: float = DEFAULT_LOW_MAX,
    high_min: float = DEFAULT_HIGH_MIN,
) -> CredibilityLabel:
    """Classify a post by the credibility of the domains it links to.

    Low wins over High when a post cites both kinds of domain.
    """
    _check_thresholds(low_max, high_min)
    return _decide(_matched_ratings(post, table), low_max, high_min)[0]


def compute_engagement(post: PostRecord) -> int:
    """Sum of likes, retweets, replies and quotes."""
    return post.likes + post.retweets + post.replies + post.quotes


# ---------------------------------------------------------------- tables


def _read_csv_rows(path, expected: tuple[str, str]) -> Iterator[tuple[int, str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header[:2]) != expected:
            raise DataError(f"{path}: expected header {','.join(expected)}, got {header}")
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected two columns")
            yield lineno, row[0].strip(), row[1].strip()


def _normalize_table_domain(raw: str, where: str) -> str:
    try:
        return extract_domain(raw)
    except DomainError as exc:
        raise DataError(f"{where}: {exc}") from None


def _normalize_bias(raw: str) -> str:
    label = raw.strip().lower()
    label = _BIAS_ALIASES.get(label, label)
    if label not in BIAS_LABELS:
        raise ValueError(f"unknown bias label {raw!r}")
    return label


def read_credibility_table(
    path: str | PathLike, bias: Mapping[str, str] | None = None
) -> dict[str, DomainRating]:
    """Read a ``domain,score`` CSV into a domain -> DomainRating map.

    ``bias`` (as returned by :func:`read_bias_table`) is attached to the
    ratings whose domain appears in it.
    """
    table: dict[str, DomainRating] = {}
    for lineno, raw_domain, raw_score in _read_csv_rows(path, ("domain", "score")):
        where = f"{path}:{lineno}"
        domain = _normalize_table_domain(raw_domain, where)
        try:
            score = float(raw_score)
            rating = DomainRating(domain, score, None if bias is None else bias.get(domain))
        except ValueError as exc:
            raise DataError(f"{where}: {exc}") from None
        if domain in table and table[domain].credibility != score:
            raise DataError(f"{where}: conflicting scores for {domain}")
        table[domain] = rating
    return table


def read_bias_table(path: str | PathLike) -> dict[str, str]:
    """Read a ``domain,bias`` CSV into a domain -> bias-label map."""
    out: dict[str, str] = {}
    for lineno, raw_domain, raw_bias in _read_csv_rows(path, ("domain", "bias")):
        where = f"{path}:{lineno}"
        domain = _normalize_table_domain(raw_domain, where)
        try:
            out[domain] = _normalize_bias(raw_bias)
        except ValueError as exc:
            raise DataError(f"{where}: {exc}") from None
    return out


def write_credibility_table(ratings: Iterable[DomainRating], path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "score"])
        for r in sorted(ratings, key=lambda r: r.domain):
            w.writerow([r.domain, repr(r.credibility)])


def write_bias_table(ratings: Iterable[DomainRating], path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "bias"])
        for r in sorted(ratings, key=lambda r: r.domain):
            if r.bias is not None:
                w.writerow([r.domain, r.bias])


# ---------------------------------------------------------------- labeled data


@dataclass
class LabelingSummary:
    n_posts: int
    n_low: int
    n_high: int
    n_unlabeled: int
    n_mixed: int
    skipped_lines: int = 0
    top_low_domains: list[tuple[str, int]] = field(default_factory=list)
    top_high_domains: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_posts": self.n_posts,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "n_unlabeled": self.n_unlabeled,
            "n_mixed": self.n_mixed,
            "skipped_lines": self.skipped_lines,
            "top_low_domains": [{"domain": d, "count": c} for d, c in self.top_low_domains],
            "top_high_domains": [{"domain": d, "count": c} for d, c in self.top_high_domains],
        }


@dataclass
class LabeledDataset:
    """Columnar view of the Low and High posts, in input order.

    Unlabeled posts are dropped. ``bias`` holds the bias label of the domain
    that decided each post's label, or ``None`` when that domain has none.
    """

    ids: list[str]
    label: np.ndarray  # bool, True for Low
    impressions: np.ndarray  # float64
    engagement: np.ndarray  # int64
    followers: np.ndarray  # int64
    verified: np.ndarray  # bool
    toxicity: np.ndarray  # float64, NaN when absent
    bias: list[str | None]
    label_domain: list[str]
    summary: LabelingSummary | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def is_low(self) -> np.ndarray:
        return self.label

    def subset(self, mask: np.ndarray) -> LabeledDataset:
        """Rows where ``mask`` is true, order preserved."""
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        return LabeledDataset(
            ids=[self.ids[i] for i in idx],
            label=self.label[idx],
            impressions=self.impressions[idx],
            engagement=self.engagement[idx],
            followers=self.followers[idx],
            verified=self.verified[idx],
            toxicity=self.toxicity[idx],
            bias=[self.bias[i] for i in idx],
            label_domain=[self.label_domain[i] for i in idx],
            summary=None,
        )

    @classmethod
    def from_columns(
        cls,
        impressions,
        engagement,
        followers,
        is_low,
        ids=None,
        verified=None,
        toxicity=None,
        bias=None,
    ) -> LabeledDataset:
        """Build a dataset straight from arrays, mostly for tests and notebooks."""
        impressions = np.asarray(impressions, dtype=np.float64)
        n = len(impressions)
        return cls(
            ids=[str(i) for i in range(n)] if ids is None else [str(i) for i in ids],
            label=np.asarray(is_low, dtype=bool),
            impressions=impressions,
            engagement=np.asarray(engagement, dtype=np.int64),
            followers=np.asarray(followers, dtype=np.int64),
            verified=np.zeros(n, bool) if verified is None else np.asarray(verified, bool),
            toxicity=np.full(n, np.nan)
            if toxicity is None
            else np.array([np.nan if t is None else t for t in toxicity], dtype=np.float64),
            bias=[None] * n if bias is None else list(bias),
            label_domain=[""] * n,
        )


def label_posts(
    posts: Sequence[PostRecord],
    table: Mapping[str, DomainRating],
    bias: Mapping[str, str] | None = None,
    low_max: float = DEFAULT_LOW_MAX,
    high_min: float = DEFAULT_HIGH_MIN,
    skipped_lines: int = 0,
    top_n: int = 5,
) -> LabeledDataset:
    """Label every post and keep the Low and High ones as a columnar dataset.

    Raises
    ------
    DataError
        If two posts share an id.
    ConfigError
        If the thresholds are inconsistent.
    """
    _check_thresholds(low_max, high_min)
    seen: set[str] = set()
    rows = []
    n_low = n_high = n_unl = n_mixed = 0
    low_counts: Counter[str] = Counter()
    high_counts: Counter[str] = Counter()
    for post in posts:
        if post.id in seen:
            raise DataError(f"duplicate post id {post.id!r}")
        seen.add(post.id)
        ratings = _matched_ratings(post, table)
        label, deciding, mixed = _decide(ratings, low_max, high_min)
        if label is CredibilityLabel.UNLABELED:
            n_unl += 1
            continue
        if label is CredibilityLabel.LOW:
            n_low += 1
            n_mixed += mixed
            low_counts.update(r.domain for r in ratings if r.credibility <= low_max)
        else:
            n_high += 1
            high_counts.update(r.domain for r in ratings if r.credibility >= high_min)
        b = deciding.bias
        if b is None and bias is not None:
            b = _suffix_get(deciding.domain, bias)
        rows.append((post, label is CredibilityLabel.LOW, b, deciding.domain))

    def top(counter):
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]

    summary = LabelingSummary(
        n_posts=len(seen),
        n_low=n_low,
        n_high=n_high,
        n_unlabeled=n_unl,
        n_mixed=n_mixed,
        skipped_lines=skipped_lines,
        top_low_domains=top(low_counts),
        top_high_domains=top(high_counts),
    )
    return LabeledDataset(
        ids=[p.id for p, *_ in rows],
        label=np.array([low for _, low, *_ in rows], dtype=bool),
        impressions=np.array([p.impressions for p, *_ in rows], dtype=np.float64),
        engagement=np.array([compute_engagement(p) for p, *_ in rows], dtype=np.int64),
        followers=np.array([p.followers for p, *_ in rows], dtype=np.int64),
        verified=np.array([p.verified for p, *_ in rows], dtype=bool),
        toxicity=np.array(
            [np.nan if p.toxicity is None else p.toxicity for p, *_ in rows], dtype=np.float64
        ),
        bias=[b for _, _, b, _ in rows],
        label_domain=[d for *_, d in rows],
        summary=summary,
    )


_LABELED_FIELDS = (
    "id",
    "credibility",
    "label_domain",
    "bias",
    "impression_count",
    "engagement",
    "followers_count",
    "verified",
    "toxicity",
)


def write_labeled_posts(data: LabeledDataset, path: str | PathLike) -> None:
    """Write the intermediate labeled file consumed by ``analyze``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(len(data)):
            tox = data.toxicity[i]
            obj = {
                "id": data.ids[i],
                "credibility": "low" if data.label[i] else "high",
                "label_domain": data.label_domain[i],
                "bias": data.bias[i],
                "impression_count": int(data.impressions[i]),
                "engagement": int(data.engagement[i]),
                "followers_count": int(data.followers[i]),
                "verified": bool(data.verified[i]),
                "toxicity": None if np.isnan(tox) else float(tox),
            }
            fh.write(json.dumps(obj, sort_keys=True))
            fh.write("\n")


def read_labeled_posts(source: str | PathLike | IO[str]) -> LabeledDataset:
    """Read a file written by :func:`write_labeled_posts`."""
    lines, handle = _open_lines(source)
    recs = []
    try:
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                missing = [k for k in _LABELED_FIELDS if k not in obj]
                if missing:
                    raise ValueError(f"missing fields {missing}")
                if obj["credibility"] not in ("low", "high"):
                    raise ValueError(f"bad credibility {obj['credibility']!r}")
                recs.append(obj)
            except ValueError as exc:
                raise DataError(f"labeled file line {lineno}: {exc}") from None
    finally:
        if handle is not None:
            handle.close()
    ids = [str(r["id"]) for r in recs]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate post ids in labeled file")
    return LabeledDataset(
        ids=ids,
        label=np.array([r["credibility"] == "low" for r in recs], dtype=bool),
        impressions=np.array([r["impression_count"] for r in recs], dtype=np.float64),
        engagement=np.array([r["engagement"] for r in recs], dtype=np.int64),
        followers=np.array([r["followers_count"] for r in recs], dtype=np.int64),
        verified=np.array([bool(r["verified"]) for r in recs], dtype=bool),
        toxicity=np.array(
            [np.nan if r["toxicity"] is None else r["toxicity"] for r in recs], dtype=np.float64
        ),
        bias=[r["bias"] for r in recs],
        label_domain=[r["label_domain"] for r in recs],
    )


def is_labeled_file(path: str | PathLike) -> bool:
    """True when the first non-blank line of ``path`` looks like labeled output."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                try:
                    obj = json.loads(line)
                except ValueError:
                    return False
                return isinstance(obj, dict) and "credibility" in obj and "engagement" in obj
    return False
