"""Counterfactual redaction certificates for classifier label pairs."""

from .certificates import (
    AttributionCertificate,
    DisjointCertificate,
    OverlapCertificate,
    decode_certificate,
    encode_certificate,
    forge_overlap,
)
from .core import (
    IndexSet,
    InputVector,
    LabelId,
    ModelHandle,
    PlantedModelSpec,
    SoftmaxVector,
    expand_pixels_to_indices,
    make_planted_model,
    predict,
    redact,
)
from .oracle import (
    FixtureSpec,
    OracleVerdict,
    brute_attribution,
    brute_disjoint,
    brute_overlap,
    generate_fixture,
)
from .search import (
    PairCase,
    SearchOutcome,
    alg3_partition,
    build_case,
    classify_pair,
    find_disjoint_alg1,
    find_disjoint_alg2,
    find_disjoint_alg3,
    find_overlap,
    segregate_segments,
)
from .segattr import (
    AdjacencyGraph,
    AttributionMap,
    SegmentAttribution,
    Segmentation,
    accumulate,
    adjacency,
    adjacency_of_sets,
    grid_segmenter,
    occlusion_attribution,
)
from .verify import (
    VerificationReport,
    verify_attribution,
    verify_disjoint,
    verify_overlap,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionCertificate",
    "DisjointCertificate",
    "OverlapCertificate",
    "decode_certificate",
    "encode_certificate",
    "forge_overlap",
    "IndexSet",
    "InputVector",
    "LabelId",
    "ModelHandle",
    "PlantedModelSpec",
    "SoftmaxVector",
    "expand_pixels_to_indices",
    "make_planted_model",
    "predict",
    "redact",
    "FixtureSpec",
    "OracleVerdict",
    "brute_attribution",
    "brute_disjoint",
    "brute_overlap",
    "generate_fixture",
    "PairCase",
    "SearchOutcome",
    "alg3_partition",
    "build_case",
    "classify_pair",
    "find_disjoint_alg1",
    "find_disjoint_alg2",
    "find_disjoint_alg3",
    "find_overlap",
    "segregate_segments",
    "AdjacencyGraph",
    "AttributionMap",
    "SegmentAttribution",
    "Segmentation",
    "accumulate",
    "adjacency",
    "adjacency_of_sets",
    "grid_segmenter",
    "occlusion_attribution",
    "VerificationReport",
    "verify_attribution",
    "verify_disjoint",
    "verify_overlap",
]
