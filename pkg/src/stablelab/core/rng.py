"""
Counter-based, splittable random streams.

Every stream is a ``numpy.random.Generator`` over ``Philox`` keyed by a
child of a ``SeedSequence``. Splitting depends only on the root seed and the
stream index, never on the worker that consumes the stream.
"""

from __future__ import annotations

from typing import List, Optional, Union

import numpy as np

RngLike = Union[None, int, np.random.SeedSequence, np.random.Generator]

DEFAULT_SEED = 20240917


def make_generator(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: RngLike) -> np.random.Generator:
    """Accept a generator, a seed, a seed sequence or None (fixed default seed)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return make_generator(DEFAULT_SEED)
    return make_generator(rng)


def as_seed_sequence(seed: Optional[Union[int, np.random.SeedSequence]]) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(DEFAULT_SEED if seed is None else int(seed))


def spawn_sequences(seed, n_streams: int) -> List[np.random.SeedSequence]:
    """``n_streams`` independent children of the root seed, in index order."""
    return as_seed_sequence(seed).spawn(n_streams)


def child_sequences(seed, n_streams: int) -> List[np.random.SeedSequence]:
    """
    The first ``n_streams`` children of ``seed``, as ``spawn`` would return
    them on a fresh sequence, without advancing its spawn counter.
    """
    ss = as_seed_sequence(seed)
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,), pool_size=ss.pool_size)
        for i in range(n_streams)
    ]


def spawn_generators(seed, n_streams: int) -> List[np.random.Generator]:
    return [make_generator(ss) for ss in spawn_sequences(seed, n_streams)]


def seed_provenance(seed) -> int:
    """A 64-bit integer identifying the root of a stream family."""
    ss = as_seed_sequence(seed)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
