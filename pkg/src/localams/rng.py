"""Deterministic random-stream derivation.

Every random draw in the package flows through a generator derived here
from the master seed plus a structured path (purpose tag, client id,
round index, ...). There is no global RNG state, so trajectories replay
bit-identically and clients can be advanced concurrently without any
draw-order coupling.
"""
from __future__ import annotations

import numpy as np

# Purpose tags keep unrelated streams disjoint even when the remaining
# path components collide.
_TAG_INIT = 0
_TAG_SELECT = 1
_TAG_CLIENT = 2
_TAG_DATA = 3
_TAG_PARTITION = 4
_TAG_PROBE = 5


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator keyed by (master_seed, *path)."""
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))


def init_stream(master_seed: int) -> np.random.Generator:
    """Stream for one-off initialization draws (e.g. starting point)."""
    return stream(master_seed, _TAG_INIT)


def selection_stream(master_seed: int, round_index: int) -> np.random.Generator:
    """Stream for the round's client sampling."""
    return stream(master_seed, _TAG_SELECT, round_index)


def client_stream(master_seed: int, client_id: int, round_index: int) -> np.random.Generator:
    """Stream for one client's local steps within one round.

    Draws advance in local-step order inside the round, so the noise at
    (seed, client, round, step) is independent of how other clients are
    scheduled.
    """
    return stream(master_seed, _TAG_CLIENT, client_id, round_index)


def data_stream(master_seed: int, client_id: int) -> np.random.Generator:
    """Stream for generating a client's synthetic problem instance."""
    return stream(master_seed, _TAG_DATA, client_id)


def partition_stream(master_seed: int) -> np.random.Generator:
    """Stream for label partitioning."""
    return stream(master_seed, _TAG_PARTITION)


def probe_stream(master_seed: int) -> np.random.Generator:
    """Stream for heterogeneity probe points."""
    return stream(master_seed, _TAG_PROBE)
