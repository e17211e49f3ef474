# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled n-gram hashing kernel: 64-bit FNV-1a over token bytes."""
import numpy as np

cdef unsigned long long FNV_OFFSET = 14695981039346656037ULL
cdef unsigned long long FNV_PRIME = 1099511628211ULL


cdef inline unsigned long long _fnv_update(
    unsigned long long h, const unsigned char* s, Py_ssize_t n
) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ s[i]) * FNV_PRIME
    return h


def hash_gram(bytes gram):
    """64-bit FNV-1a hash of one gram."""
    return _fnv_update(FNV_OFFSET, gram, len(gram))


def ngram_buckets(list tokens, long long dim):
    """Hash buckets of every unigram and adjacent bigram, in token order.

    Bigrams hash as ``first + b" " + second``, streamed through the FNV
    state so the joined bytes are never materialised.
    """
    cdef Py_ssize_t n = len(tokens)
    out = np.empty(2 * n - 1 if n else 0, dtype=np.int64)
    if n == 0:
        return out
    cdef long long[::1] view = out
    cdef unsigned long long udim = <unsigned long long> dim
    cdef unsigned long long h, prev = 0
    cdef bytes tok
    cdef const unsigned char* s
    cdef Py_ssize_t i, m, k = 0
    for i in range(n):
        tok = <bytes> tokens[i]
        s = tok
        m = len(tok)
        h = _fnv_update(FNV_OFFSET, s, m)
        view[k] = <long long> (h % udim)
        k += 1
        if i > 0:
            view[k] = <long long> (_fnv_update((prev ^ 0x20) * FNV_PRIME, s, m) % udim)
            k += 1
        prev = h
    return out
