# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive labeling search over attack trees."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


def count_consistent_labelings(const uint64_t[::1] child_masks):
    """Enumerate every U/D labeling of an n-node tree and keep the consistent ones.

    Bit i of a labeling is 1 when node i is undefeated. Node i is consistent iff
    it is U exactly when none of its children (``child_masks[i]``) is U.
    Returns ``(count, first_consistent_labeling)``; the latter is -1 when none.

    Bit-sliced: the low six nodes vary across the 64 lanes of a word, the rest
    come from the outer counter, so 64 labelings are checked per pass.
    """
    cdef Py_ssize_t n = child_masks.shape[0]
    if n > 40:
        raise ValueError("exhaustive enumeration is limited to 40 nodes")
    cdef Py_ssize_t low = n if n < 6 else 6
    cdef uint64_t lanes_live = ~(<uint64_t>0) if n >= 6 else (((<uint64_t>1) << ((<uint64_t>1) << n)) - 1)
    cdef uint64_t n_hi = (<uint64_t>1) << (n - low)
    cdef uint64_t lane_bits[6]
    lane_bits[:] = [0xAAAAAAAAAAAAAAAA, 0xCCCCCCCCCCCCCCCC, 0xF0F0F0F0F0F0F0F0,
                    0xFF00FF00FF00FF00, 0xFFFF0000FFFF0000, 0xFFFFFFFF00000000]

    # children as CSR, built once
    child_ptr = np.zeros(n + 1, dtype=np.int64)
    child_idx = np.zeros(n * n + 1, dtype=np.int64)
    cdef long long[::1] ptr = child_ptr
    cdef long long[::1] idx = child_idx
    cdef Py_ssize_t i, c, k = 0
    for i in range(n):
        ptr[i] = k
        for c in range(n):
            if (child_masks[i] >> c) & 1:
                idx[k] = c
                k += 1
    ptr[n] = k

    words = np.zeros(max(n, 1), dtype=np.uint64)
    cdef uint64_t[::1] B = words
    cdef uint64_t hi, ok, anyu, count = 0
    cdef long long first = -1
    with nogil:
        for i in range(low):
            B[i] = lane_bits[i]
        for hi in range(n_hi):
            for i in range(low, n):
                B[i] = ~(<uint64_t>0) if (hi >> (i - low)) & 1 else 0
            ok = lanes_live
            i = n - 1
            while i >= 0 and ok:
                anyu = 0
                for c in range(ptr[i], ptr[i + 1]):
                    anyu |= B[idx[c]]
                ok &= B[i] ^ anyu
                i -= 1
            if ok:
                count += __builtin_popcountll(ok)
                if first < 0:
                    first = <long long>((hi << low) | __builtin_ctzll(ok))
    return int(count), int(first)
