"""Pure-Python/numpy versions of the compiled kernels (same contracts)."""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 18


def count_consistent_labelings(child_masks) -> tuple[int, int]:
    masks = np.asarray(child_masks, dtype=np.uint64)
    n = masks.shape[0]
    if n > 40:
        raise ValueError("exhaustive enumeration is limited to 40 nodes")
    total = 1 << n
    count = 0
    first = -1
    for start in range(0, total, _CHUNK):
        labs = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        ok = np.ones(labs.shape[0], dtype=bool)
        for i in range(n):
            undefeated = ((labs >> np.uint64(i)) & np.uint64(1)).astype(bool)
            no_u_child = (labs & masks[i]) == 0
            ok &= undefeated == no_u_child
        hits = np.flatnonzero(ok)
        if hits.size:
            count += int(hits.size)
            if first < 0:
                first = int(labs[hits[0]])
    return count, first
