"""N-gram hashing kernel, compiled when available.

Imports the Cython extension if it was built, otherwise the bit-identical
pure-Python fallback. Set EMOTOD_PURE_KERNEL=1 to force the fallback (used
by the parity tests and the benchmark).
"""
import os

if os.environ.get("EMOTOD_PURE_KERNEL"):
    from ._hashgram_py import hash_gram, ngram_buckets

    COMPILED = False
else:
    try:
        from ._hashgram import hash_gram, ngram_buckets

        COMPILED = True
    except ImportError:
        from ._hashgram_py import hash_gram, ngram_buckets

        COMPILED = False

__all__ = ["hash_gram", "ngram_buckets", "COMPILED"]
