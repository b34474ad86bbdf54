"""Report assembly and serialization.

A report is written either as one JSON document or as a bundle of CSV
files ready for plotting: the per-iteration distribution, the stratum
heatmap data, the per-value deltas and the labeling counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

from . import __version__
from .amplify import BaselineResult, DeltaResult
from .ingest import LabelingSummary

__all__ = [
    "AmplificationReport",
    "CSV_FILES",
    "REPORT_SCHEMA",
    "emit_report",
    "file_digest",
    "load_report",
]

CSV_FILES = (
    "baseline_distribution.csv",
    "stratum_matrix.csv",
    "deltas.csv",
    "labeling_summary.csv",
)


def file_digest(path: str | PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class AmplificationReport:
    baseline: BaselineResult
    config: dict
    deltas: list[DeltaResult] = field(default_factory=list)
    labeling: LabelingSummary | None = None
    inputs: list[dict] = field(default_factory=list)
    argv: list[str] = field(default_factory=list)

    def metadata(self) -> dict:
        return {
            "tool": "credamp",
            "version": __version__,
            "seed": self.config.get("seed"),
            "config": dict(self.config),
            "argv": list(self.argv),
            "inputs": list(self.inputs),
        }

    def strata_summary(self) -> dict:
        s = self.baseline.strata
        out = {
            "engagement_edges": s.engagement_edges.to_dict(),
            "follower_edges": s.follower_edges.to_dict(),
            "toxicity_clusters": None,
        }
        for d in self.deltas:
            if d.clusters is not None:
                out["toxicity_clusters"] = d.clusters.to_dict()
        return out

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata(),
            "labeling": None if self.labeling is None else self.labeling.to_dict(),
            "baseline": self.baseline.to_dict(),
            "deltas": [d.to_dict() for d in self.deltas],
            "strata": self.strata_summary(),
        }


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _csv_text(header: list[str], rows) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_report(report: AmplificationReport, fmt: str, path: str | PathLike) -> list[Path]:
    """Write ``report`` and return the paths written.

    ``fmt="json"`` writes a single document at ``path``; ``fmt="csv"``
    treats ``path`` as a directory and writes the four CSV tables plus a
    ``metadata.json`` describing how they were produced. Each file is
    written to a temporary name and renamed into place.

    Raises
    ------
    OSError
        With the offending path in the message.
    """
    path = Path(path)
    doc = report.to_dict()
    try:
        if fmt == "json":
            _atomic_write(path, _json_text(doc))
            return [path]
        if fmt not in ("csv", "csv-bundle"):
            raise ValueError(f"unknown report format {fmt!r}")
        written = []
        base = doc["baseline"]
        tables = {
            "baseline_distribution.csv": (
                ["iteration", "mean_low", "mean_high", "abs_diff", "pct_diff"],
                ([r["iteration"], r["mean_low"], r["mean_high"], r["abs_diff"], r["pct_diff"]]
                 for r in base["distribution"]),
            ),
            "stratum_matrix.csv": (
                ["engagement_bin", "follower_bin", "n_low", "n_high", "draws", "skipped",
                 "mean_abs_diff", "mean_pct_diff", "mean_low", "mean_high"],
                ([c["engagement_bin"], c["follower_bin"], c["n_low"], c["n_high"], c["draws"],
                  str(c["skipped"]).lower(), c["mean_abs_diff"], c["mean_pct_diff"],
                  c["mean_low"], c["mean_high"]] for c in base["stratum_matrix"]),
            ),
            "deltas.csv": (
                ["variable", "value", "n_low", "n_high", "estimable", "amplification_pct",
                 "delta_pp", "positive_share", "ci_lower", "ci_upper", "note"],
                ([d["variable"], v["value"], v["n_low"], v["n_high"], str(v["estimable"]).lower(),
                  v["amplification_pct"], v["delta_pp"], v["positive_share"],
                  None if v["interval"] is None else v["interval"]["lower"],
                  None if v["interval"] is None else v["interval"]["upper"], v["note"]]
                 for d in doc["deltas"] for v in d["values"]),
            ),
            "labeling_summary.csv": (["metric", "key", "value"], _labeling_rows(doc)),
        }
        for name, (header, rows) in tables.items():
            target = path / name
            _atomic_write(target, _csv_text(header, rows))
            written.append(target)
        meta = {k: doc[k] for k in ("metadata", "strata")}
        meta["baseline_summary"] = {k: v for k, v in base.items()
                                    if k not in ("distribution", "stratum_matrix")}
        target = path / "metadata.json"
        _atomic_write(target, _json_text(meta))
        written.append(target)
        return written
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def _labeling_rows(doc):
    lab = doc["labeling"]
    base = doc["baseline"]
    if lab is None:
        yield ["n_low", "", base["n_low"]]
        yield ["n_high", "", base["n_high"]]
        return
    for k in ("n_posts", "n_low", "n_high", "n_unlabeled", "n_mixed", "skipped_lines"):
        yield [k, "", lab[k]]
    for rank, d in enumerate(lab["top_low_domains"], 1):
        yield [f"top_low_domain_{rank}", d["domain"], d["count"]]
    for rank, d in enumerate(lab["top_high_domains"], 1):
        yield [f"top_high_domain_{rank}", d["domain"], d["count"]]


def load_report(path: str | PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_interval = {
    "type": ["object", "null"],
    "required": ["point_estimate", "lower", "upper", "z0", "accel", "level"],
    "properties": {k: _num for k in ("point_estimate", "lower", "upper", "z0", "accel", "level")},
}

#: JSON schema of the document written by ``emit_report(..., "json", ...)``.
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["metadata", "labeling", "baseline", "deltas", "strata"],
    "properties": {
        "metadata": {
            "type": "object",
            "required": ["tool", "version", "seed", "config", "inputs"],
            "properties": {
                "inputs": {
                    "type": "array",
                    "items": {"type": "object", "required": ["role", "name", "sha256"]},
                }
            },
        },
        "labeling": {
            "type": ["object", "null"],
            "required": ["n_low", "n_high", "n_unlabeled", "n_mixed", "top_low_domains", "top_high_domains"],
        },
        "baseline": {
            "type": "object",
            "required": [
                "mean_pct", "median_pct", "mean_abs", "median_abs", "positive_share",
                "interval", "abs_interval", "stratum_matrix", "skipped_strata",
                "degenerate_iterations", "distribution", "n_low", "n_high",
            ],
            "properties": {
                "mean_pct": _num,
                "median_pct": _num,
                "mean_abs": _num,
                "median_abs": _num,
                "positive_share": {"type": "number", "minimum": 0, "maximum": 100},
                "interval": _interval,
                "abs_interval": _interval,
                "stratum_matrix": {
                    "type": "array",
                    "maxItems": 16,
                    "items": {
                        "type": "object",
                        "required": ["engagement_bin", "follower_bin", "n_low", "n_high",
                                     "skipped", "mean_abs_diff", "mean_pct_diff"],
                        "properties": {
                            "n_low": {"type": "integer", "minimum": 0},
                            "n_high": {"type": "integer", "minimum": 0},
                            "mean_abs_diff": _num_or_null,
                            "mean_pct_diff": _num_or_null,
                            "skipped": {"type": "boolean"},
                        },
                    },
                },
                "distribution": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["iteration", "mean_low", "mean_high", "abs_diff", "pct_diff"],
                    },
                },
            },
        },
        "deltas": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["variable", "values"],
                "properties": {
                    "variable": {"enum": ["toxicity", "bias", "verified"]},
                    "values": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["value", "n_low", "n_high", "estimable",
                                         "amplification_pct", "delta_pp"],
                        },
                    },
                },
            },
        },
        "strata": {
            "type": "object",
            "required": ["engagement_edges", "follower_edges", "toxicity_clusters"],
        },
    },
}
