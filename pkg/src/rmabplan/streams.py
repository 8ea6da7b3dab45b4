"""Deterministic derivation of independent random streams from structured keys.

Every stochastic routine in the toolkit draws from a generator obtained here,
keyed by the user seed plus the identifiers of the unit of work (state, action,
trajectory index, episode index, ...).  Results are therefore reproducible
bit-for-bit and independent of how work is partitioned across workers: a
worker that owns trajectory l derives the same stream no matter which other
trajectories it also runs.

Keys are hashed with SHA-256 into SeedSequence spawn keys, so any mix of
ints, strings and (nested) tuples is accepted and the derivation is stable
across platforms and Python versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _feed(h, part) -> None:
    if isinstance(part, (tuple, list)):
        h.update(b"(")
        for item in part:
            _feed(h, item)
        h.update(b")")
    elif isinstance(part, str):
        h.update(b"s")
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    elif isinstance(part, (bool, np.bool_)):
        h.update(b"b1" if part else b"b0")
    elif isinstance(part, (int, np.integer)):
        h.update(b"i")
        h.update(str(int(part)).encode("ascii"))
        h.update(b"\x00")
    else:
        raise TypeError(f"unsupported stream key part: {part!r}")


def _key_words(parts) -> tuple[int, ...]:
    h = hashlib.sha256()
    for part in parts:
        _feed(h, part)
    digest = h.digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4))


def substream(seed: int, *key) -> np.random.Generator:
    """Return a fresh generator for (seed, *key), independent across keys."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=_key_words(key))
    return np.random.Generator(np.random.PCG64(ss))


def subseed(seed: int, *key) -> int:
    """Derive a 63-bit integer seed for nested components with their own seeding."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=_key_words(key))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)
