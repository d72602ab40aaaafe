"""Deterministic RNG stream derivation.

Every random decision in the pipeline draws from a generator derived from
(seed, namespace, *indices), so results are reproducible byte-for-byte and
independent of worker scheduling.
"""

from __future__ import annotations

import numpy as np

# Stream namespaces (first element of the spawn key).
NS_SYNTH_ENTRY = 1   # per-entry streams for dataset synthesis
NS_EPOCH = 2         # epoch shuffling during training
NS_BATCH = 3         # per-batch synthesis streams
NS_MINE = 4          # hard-mining dataset synthesis
NS_HARD = 5          # hard-subset shuffling
NS_SCORE = 6         # per-frame RoI crops at inference
NS_INIT = 7          # weight initialization


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
