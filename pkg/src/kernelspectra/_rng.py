"""Counter-based random substreams.

All randomness in the package flows through keyed Philox streams. A stream
is addressed by (master_seed, tag, index): the 128-bit Philox key is
[seed, tag << 48 | index], so distinct (tag, index) pairs give statistically
independent streams that can be generated in any order, or in parallel,
with identical output.
"""

from __future__ import annotations

import numpy as np

# Stream tags; keep indices below 2**48 per tag.
TAG_COLUMN = 0      # sample-matrix columns
TAG_TRIAL = 1       # per-trial seeds in experiments
TAG_BATCH = 2       # Monte Carlo batches (moments, coefficients)
TAG_DIAGNOSTIC = 3  # moment diagnostics

_INDEX_BITS = 48
_INDEX_LIMIT = 1 << _INDEX_BITS


def substream(seed: int, tag: int, index: int) -> np.random.Generator:
    """Generator for the (seed, tag, index) substream."""
    if not 0 <= index < _INDEX_LIMIT:
        raise ValueError(f"substream index out of range: {index}")
    if not 0 <= tag < (1 << 16):
        raise ValueError(f"substream tag out of range: {tag}")
    key = np.array([np.uint64(seed & (2**64 - 1)),
                    np.uint64((tag << _INDEX_BITS) | index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, tag: int, index: int) -> int:
    """Derive a 64-bit child seed; used to key independent sub-runs."""
    return int(substream(seed, tag, index).integers(0, 2**63 - 1, dtype=np.int64))
