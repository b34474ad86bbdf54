"""Measure algorithmic amplification of low-credibility posts.

Posts are labeled by the credibility of the domains they link to, matched on
engagement and follower strata, and compared on impressions with a
stratified BCa bootstrap.
"""

__version__ = "0.1.0"

from .amplify import (  # noqa: E402
    AnalysisConfig,
    BaselineResult,
    DeltaResult,
    baseline_analysis,
    stratified_delta,
    stratum_drilldown,
)
from .bootstrap import BootstrapConfig, bca_interval, run_bootstrap  # noqa: E402
from .ingest import (  # noqa: E402
    CredibilityLabel,
    DomainRating,
    LabeledDataset,
    PostRecord,
    extract_domain,
    label_credibility,
    label_posts,
    parse_posts,
    read_bias_table,
    read_credibility_table,
)
from .strata import kmeans_1d, quantile_bins  # noqa: E402
from .synth import SynthConfig, generate  # noqa: E402

__all__ = [
    "AnalysisConfig",
    "BaselineResult",
    "BootstrapConfig",
    "CredibilityLabel",
    "DeltaResult",
    "DomainRating",
    "LabeledDataset",
    "PostRecord",
    "SynthConfig",
    "baseline_analysis",
    "bca_interval",
    "extract_domain",
    "generate",
    "kmeans_1d",
    "label_credibility",
    "label_posts",
    "parse_posts",
    "quantile_bins",
    "read_bias_table",
    "read_credibility_table",
    "run_bootstrap",
    "stratified_delta",
    "stratum_drilldown",
]
