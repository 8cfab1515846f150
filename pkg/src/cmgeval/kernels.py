"""String kernels behind the similarity metrics.

Character-level Levenshtein distance and longest-common-subsequence length are
the inner loops of every corpus scoring pass: thousands of message pairs of a
few hundred characters each. Both kernels compile with numba when available;
a vectorized numpy implementation of the same recurrences is kept as a
fallback and can be forced with ``CMGEVAL_BACKEND=numpy``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - sandbox always has numba
    HAS_NUMBA = False

ENV_FLAG = "CMGEVAL_BACKEND"


def encode(text: str) -> np.ndarray:
    """Map a string to an int64 array of Unicode code points."""
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)


if HAS_NUMBA:

    @njit(cache=True)
    def _levenshtein_jit(a: np.ndarray, b: np.ndarray) -> int:
        n = a.shape[0]
        m = b.shape[0]
        if n == 0:
            return m
        if m == 0:
            return n
        prev = np.arange(m + 1)
        cur = np.empty(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            cur[0] = i
            ai = a[i - 1]
            for j in range(1, m + 1):
                best = prev[j] + 1
                ins = cur[j - 1] + 1
                if ins < best:
                    best = ins
                sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
                if sub < best:
                    best = sub
                cur[j] = best
            prev, cur = cur, prev
        return prev[m]

    @njit(cache=True)
    def _lcs_jit(a: np.ndarray, b: np.ndarray) -> int:
        n = a.shape[0]
        m = b.shape[0]
        if n == 0 or m == 0:
            return 0
        prev = np.zeros(m + 1, dtype=np.int64)
        cur = np.zeros(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            ai = a[i - 1]
            cur[0] = 0
            for j in range(1, m + 1):
                if ai == b[j - 1]:
                    cur[j] = prev[j - 1] + 1
                else:
                    left = cur[j - 1]
                    up = prev[j]
                    cur[j] = left if left > up else up
            prev, cur = cur, prev
        return prev[m]


def _levenshtein_np(a: np.ndarray, b: np.ndarray) -> int:
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return int(m)
    if m == 0:
        return int(n)
    offsets = np.arange(m + 1)
    prev = offsets.copy()
    for i in range(1, n + 1):
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (a[i - 1] != b))
        # the within-row insertion term cur[j-1]+1 folds in as a prefix scan
        prev = np.minimum.accumulate(cand - offsets) + offsets
    return int(prev[m])


def _lcs_np(a: np.ndarray, b: np.ndarray) -> int:
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = 0
        cand[1:] = np.maximum(prev[1:], prev[:-1] + (a[i - 1] == b))
        prev = np.maximum.accumulate(cand)
    return int(prev[m])


def _pick_backend() -> str:
    forced = os.environ.get(ENV_FLAG, "").strip().lower()
    if forced == "numpy":
        return "numpy"
    if forced == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(f"{ENV_FLAG}=numba requested but numba is not importable")
        return "numba"
    return "numba" if HAS_NUMBA else "numpy"


_BACKEND = _pick_backend()


def backend() -> str:
    """Name of the active kernel backend, "numba" or "numpy"."""
    return _BACKEND


def set_backend(name: str) -> None:
    """Switch kernels at runtime (used by benchmarks and backend tests)."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _BACKEND = name


def levenshtein(a: str, b: str) -> int:
    """Unit-cost character edit distance between two strings."""
    return levenshtein_seq(encode(a), encode(b))


def levenshtein_seq(a: np.ndarray, b: np.ndarray) -> int:
    """Levenshtein distance over arbitrary int64 symbol arrays."""
    if _BACKEND == "numba":
        return int(_levenshtein_jit(a, b))
    return _levenshtein_np(a, b)


def lcs_length(a: str, b: str) -> int:
    """Length of the longest common character subsequence."""
    return lcs_length_seq(encode(a), encode(b))


def lcs_length_seq(a: np.ndarray, b: np.ndarray) -> int:
    """LCS length over arbitrary int64 symbol arrays (e.g. token ids)."""
    if _BACKEND == "numba":
        return int(_lcs_jit(a, b))
    return _lcs_np(a, b)


def warmup() -> None:
    """Trigger numba compilation ahead of timed or bulk work."""
    if _BACKEND == "numba":
        probe = encode("ab")
        _levenshtein_jit(probe, probe)
        _lcs_jit(probe, probe)
