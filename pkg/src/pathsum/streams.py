"""Counter-based per-path random streams.

Every Monte Carlo path draws from a Philox generator keyed by
``(seed, path_index << 1 | role)``.  The stream is a pure function of the
seed and the path index, so results never depend on how paths are sharded
across workers.  Role 0 carries the base noise (Gaussian / stable increments),
role 1 carries jump corrections whose draw count is data-dependent; separating
them keeps the base schedule aligned between backends.
"""
from __future__ import annotations

import numpy as np

ROLE_BASE = 0
ROLE_JUMPS = 1

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def path_key(seed: int, path_index: int, role: int = ROLE_BASE) -> np.ndarray:
    """Philox key for one path stream."""
    if role not in (ROLE_BASE, ROLE_JUMPS):
        raise ValueError("role must be 0 (base) or 1 (jumps)")
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    hi = np.uint64(seed) & _MASK64
    lo = (np.uint64(path_index) << np.uint64(1)) | np.uint64(role)
    return np.array([hi, lo], dtype=np.uint64)


def path_bitgen(seed: int, path_index: int, role: int = ROLE_BASE) -> np.random.Philox:
    """BitGenerator for one path stream (feed to Generator or to the C kernels)."""
    return np.random.Philox(key=path_key(seed, path_index, role))


def path_generator(seed: int, path_index: int, role: int = ROLE_BASE) -> np.random.Generator:
    return np.random.Generator(path_bitgen(seed, path_index, role))
