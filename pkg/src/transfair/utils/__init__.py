"""
Utility modules for transfair.

Currently the binary checkpoint codec shared by the pipeline stages.
"""

from .checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    round_trip,
    save_checkpoint,
    state_digest,
)

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "Checkpoint",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "round_trip",
    "save_checkpoint",
    "state_digest",
]
