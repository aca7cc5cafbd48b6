"""Kernel change-point detection.

Thin Python layer over the C++ core. Arrays are (T, d) float64; positions
are 1-based and a change point tau splits positions tau and tau + 1.
"""

from ._kcpd import (
    ServiceError,
    SegmentationResult,
    ValidationError,
    __version__,
    block_cost,
    concentration_bound,
    embed,
    evaluate,
    load_sequence,
    median_bandwidth,
    penalty,
    penalty_floor,
    save_jsonl,
    segment,
    segment_fixed_k,
    simulate,
    sweep,
)

__all__ = [
    "ServiceError",
    "SegmentationResult",
    "ValidationError",
    "__version__",
    "block_cost",
    "concentration_bound",
    "embed",
    "evaluate",
    "load_sequence",
    "median_bandwidth",
    "penalty",
    "penalty_floor",
    "save_jsonl",
    "segment",
    "segment_fixed_k",
    "simulate",
    "sweep",
]
