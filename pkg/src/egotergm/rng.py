"""Deterministic seed derivation for parallel-safe random streams.

Every stochastic routine in the package derives per-unit substreams from an
integer seed plus a tuple of integer coordinates (replicate index, cluster
index, restart index, ...).  The same coordinates always produce the same
stream, so serial and parallel execution give identical results.
"""
from __future__ import annotations

import numpy as np

__all__ = ["child_seed", "child_rng"]


def child_seed(*parts: int) -> int:
    """Derive a 32-bit child seed from an ordered tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def child_rng(*parts: int) -> np.random.Generator:
    """Generator seeded by ``child_seed`` of the same coordinates."""
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))
