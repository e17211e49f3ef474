"""Pure-Python n-gram hashing kernel (fallback for the compiled extension).

Must stay bit-identical to emotod._hashgram: 64-bit FNV-1a over the token
bytes, bigrams hashed as ``first + b" " + second``.
"""
from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def hash_gram(gram: bytes) -> int:
    """64-bit FNV-1a hash of one gram."""
    h = _FNV_OFFSET
    for byte in gram:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def ngram_buckets(tokens: list[bytes], dim: int) -> np.ndarray:
    """Hash buckets of every unigram and adjacent bigram, in token order.

    Emits, for each token, its unigram bucket followed (from the second
    token on) by the bucket of the bigram it closes.
    """
    out = np.empty(2 * len(tokens) - 1 if tokens else 0, dtype=np.int64)
    prev = 0
    k = 0
    for i, tok in enumerate(tokens):
        h = _FNV_OFFSET
        for byte in tok:
            h = ((h ^ byte) * _FNV_PRIME) & _MASK
        out[k] = h % dim
        k += 1
        if i > 0:
            # FNV state is a running hash, so the bigram hash continues the
            # previous token's state through b" " and this token's bytes.
            hb = ((prev ^ 0x20) * _FNV_PRIME) & _MASK
            for byte in tok:
                hb = ((hb ^ byte) * _FNV_PRIME) & _MASK
            out[k] = hb % dim
            k += 1
        prev = h
    return out
