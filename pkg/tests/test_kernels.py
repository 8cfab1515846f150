import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmgeval import kernels
from oracles import edit_distance_recursive, lcs_exhaustive

BACKENDS = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    old = kernels.backend()
    kernels.set_backend(request.param)
    kernels.warmup()
    yield request.param
    kernels.set_backend(old)


def test_classic_edit_distances(backend):
    assert kernels.levenshtein("kitten", "sitting") == 3
    assert kernels.levenshtein("flaw", "lawn") == 2
    assert kernels.levenshtein("", "abc") == 3
    assert kernels.levenshtein("abc", "") == 3
    assert kernels.levenshtein("", "") == 0
    assert kernels.levenshtein("same", "same") == 0


def test_classic_lcs_lengths(backend):
    assert kernels.lcs_length("ABCBDAB", "BDCABA") == 4
    assert kernels.lcs_length("abc", "abc") == 3
    assert kernels.lcs_length("abc", "xyz") == 0
    assert kernels.lcs_length("", "anything") == 0


def test_unicode_code_points(backend):
    assert kernels.levenshtein("café", "cafe") == 1
    # astral-plane characters are single code points, not surrogate pairs
    assert kernels.levenshtein("a\U0001f642", "a") == 1
    assert kernels.lcs_length("naïve", "naive") == 4


def test_seq_variants_accept_plain_symbol_arrays(backend):
    a = np.array([1, 2, 3, 4], dtype=np.int64)
    b = np.array([1, 3, 4], dtype=np.int64)
    assert kernels.levenshtein_seq(a, b) == 1
    assert kernels.lcs_length_seq(a, b) == 3
    empty = np.array([], dtype=np.int64)
    assert kernels.levenshtein_seq(empty, b) == 3
    assert kernels.lcs_length_seq(empty, b) == 0


def test_matches_recursive_oracle_on_random_strings(backend):
    rng = random.Random(20260816)
    alphabets = ["ab", "abc", "abcde", "ab cd.é"]
    for trial in range(250):
        alpha = alphabets[trial % len(alphabets)]
        a = "".join(rng.choice(alpha) for _ in range(rng.randrange(0, 13)))
        b = "".join(rng.choice(alpha) for _ in range(rng.randrange(0, 13)))
        assert kernels.levenshtein(a, b) == edit_distance_recursive(a, b)


def test_matches_exhaustive_lcs_oracle_on_random_strings(backend):
    rng = random.Random(77)
    for _ in range(120):
        a = "".join(rng.choice("abc") for _ in range(rng.randrange(0, 11)))
        b = "".join(rng.choice("abc") for _ in range(rng.randrange(0, 11)))
        assert kernels.lcs_length(a, b) == lcs_exhaustive(a, b)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="only one backend available")
def test_backends_agree_on_longer_texts():
    rng = random.Random(9)
    words = ["fix", "add", "remove", "test", "parser", "cache", "null", "\n"]
    for _ in range(40):
        a = " ".join(rng.choice(words) for _ in range(rng.randrange(0, 80)))
        b = " ".join(rng.choice(words) for _ in range(rng.randrange(0, 80)))
        kernels.set_backend("numba")
        ed_jit, lcs_jit = kernels.levenshtein(a, b), kernels.lcs_length(a, b)
        kernels.set_backend("numpy")
        ed_np, lcs_np = kernels.levenshtein(a, b), kernels.lcs_length(a, b)
        assert ed_jit == ed_np
        assert lcs_jit == lcs_np


short_text = st.text(alphabet="abcx ", max_size=24)


@settings(max_examples=150, deadline=None)
@given(short_text, short_text)
def test_edit_distance_properties(a, b):
    d = kernels.levenshtein(a, b)
    assert d == kernels.levenshtein(b, a)
    assert d >= abs(len(a) - len(b))
    assert d <= max(len(a), len(b))
    assert (d == 0) == (a == b)
    lcs = kernels.lcs_length(a, b)
    assert max(len(a), len(b)) - lcs <= d <= len(a) + len(b) - 2 * lcs


@settings(max_examples=100, deadline=None)
@given(short_text, short_text, short_text)
def test_edit_distance_triangle_inequality(a, b, c):
    assert kernels.levenshtein(a, c) <= (
        kernels.levenshtein(a, b) + kernels.levenshtein(b, c)
    )


@settings(max_examples=150, deadline=None)
@given(short_text, short_text)
def test_lcs_properties(a, b):
    lcs = kernels.lcs_length(a, b)
    assert lcs == kernels.lcs_length(b, a)
    assert 0 <= lcs <= min(len(a), len(b))
    assert kernels.lcs_length(a, a) == len(a)


def test_set_backend_rejects_unknown_name():
    with pytest.raises(ValueError):
        kernels.set_backend("cython")


def test_env_flag_forces_numpy_backend():
    code = (
        "import os; os.environ['CMGEVAL_BACKEND'] = 'numpy'; "
        "from cmgeval import kernels; print(kernels.backend())"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"
