"""Topology-preserving lossy compression for 3D scalar fields.

Wraps any pluggable lossy base compressor so the decompressed field keeps a
user-specified pointwise absolute error bound and reproduces the contour tree
of the input exactly after persistence simplification.
"""

from .grid import ScalarField, neighbors, normalize, read_raw, total_order_less, write_raw
from .mergetree import MergeTree, build_merge_tree, persistence_pairs, simplify_tree
from .errors import (
    CorruptArchiveError,
    DegenerateFieldError,
    InternalConsistencyError,
    TighteningLimitError,
    UnsupportedArchiveError,
    UnsupportedSizeError,
)

__version__ = "0.1.0"
