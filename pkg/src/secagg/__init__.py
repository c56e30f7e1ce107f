"""Multi-server secure gradient aggregation.

Lagrange-coded secret sharing of local gradients across K curious servers,
an M-round delivery protocol with a rotating artificial-noise user, a
physical-layer alignment simulator, and closed-form delivery-time analysis.
"""

from .coding import AggregatedEvaluation, CodingConfig, aggregate_shares, encode_shares, reconstruct
from .galois import DEFAULT_PRIME, PrimeField, field
from .protocol import run_end_to_end

__all__ = [
    "AggregatedEvaluation",
    "CodingConfig",
    "DEFAULT_PRIME",
    "PrimeField",
    "aggregate_shares",
    "encode_shares",
    "field",
    "reconstruct",
    "run_end_to_end",
]
