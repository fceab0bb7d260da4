"""Deterministic inverted-dropout mask streams for MC inference.

Every Monte-Carlo forward pass draws one mask per (pass, sample) pair from
a stream keyed by (base_seed, stream tag, pass index).  Within a stream the
uniforms form a fixed table indexed by sample row, so scoring a batch, a
single sample, or samples out of order always sees the same masks.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep the two modalities' mask sequences independent even when
# they share a base seed.
ATTRIBUTE_STREAM = 0
VISUAL_STREAM = 1

_SEED_MOD = 2**63


def pass_masks(
    base_seed: int,
    stream: int,
    pass_index: int,
    sample_indices: np.ndarray,
    width: int,
    dropout_rate: float,
) -> np.ndarray:
    """Inverted-dropout masks for the given sample rows of one MC pass.

    Surviving entries are scaled by 1/(1-rate) so the masked input matches
    the clean input in expectation.  With rate 0 the mask is exactly all
    ones, independent of seed and pass.
    """
    sample_indices = np.asarray(sample_indices, dtype=np.intp)
    if dropout_rate == 0.0:
        return np.ones((sample_indices.size, width))
    table = _uniform_table(base_seed, stream, pass_index, int(sample_indices.max()) + 1, width)
    keep = table[sample_indices] >= dropout_rate
    return keep / (1.0 - dropout_rate)


def _uniform_table(base_seed: int, stream: int, pass_index: int, n_rows: int, width: int) -> np.ndarray:
    rng = np.random.default_rng([base_seed % _SEED_MOD, stream, pass_index])
    return rng.random((n_rows, width))


def training_mask(rng: np.random.Generator, shape: tuple[int, ...], dropout_rate: float) -> np.ndarray:
    """Inverted-dropout mask drawn from a sequential training RNG."""
    if dropout_rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= dropout_rate) / (1.0 - dropout_rate)
