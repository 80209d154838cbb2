"""One-step network capture-recapture estimation for hidden populations.

A coupon-referral walk captures a sample of a networked population, a
second interview collects peer reports, and the ratio of distinct reports
to reports that land back in the sample scales the sample size up to a
population estimate.  The same machinery runs on anonymizing hash codes,
with corrections for hash collisions and collapsed identities, plus a
bootstrap over the realized referral forest for the cases where the
collision correction overshoots.
"""

from .estimators import (
    EstimateResult,
    bootstrap_from_survey,
    bootstrapped_estimate,
    chapman,
    estimate_n1,
    estimate_n2,
    estimate_n3,
    expected_false_matches_closed,
    expected_false_matches_mc,
    lincoln_peterson,
    unique_count_correction,
)
from .graph import Graph, generate_ba, generate_er, load_edge_list, save_edge_list
from .hashing import HashAssignment, TelefunkenCode, apply_hash, draw_hash, telefunken_encode
from .multiset import Multiset, matches
from .rds import RdsForest, ReportMultiset, rds_capture, recapture

__version__ = "0.1.0"

__all__ = [
    "EstimateResult",
    "Graph",
    "HashAssignment",
    "Multiset",
    "RdsForest",
    "ReportMultiset",
    "TelefunkenCode",
    "apply_hash",
    "bootstrap_from_survey",
    "bootstrapped_estimate",
    "chapman",
    "draw_hash",
    "estimate_n1",
    "estimate_n2",
    "estimate_n3",
    "expected_false_matches_closed",
    "expected_false_matches_mc",
    "generate_ba",
    "generate_er",
    "lincoln_peterson",
    "load_edge_list",
    "matches",
    "rds_capture",
    "recapture",
    "save_edge_list",
    "telefunken_encode",
    "unique_count_correction",
]
