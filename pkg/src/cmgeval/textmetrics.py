"""Candidate similarity metrics over (prediction, reference) message pairs.

All metrics are pure functions of their inputs and configuration. Apart from
the embedding-based score, which needs a vector provider, everything here is
self-contained: n-gram statistics, character edit operations, and a rule-based
stemmer. Character-level work runs on the compiled kernels.
"""

from __future__ import annotations

import json
import math
import string
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from cmgeval import kernels
from cmgeval.porter import stem

HIGHER_BETTER = "higher-better"
LOWER_BETTER = "lower-better"

METRIC_NAMES = (
    "edit-distance",
    "edit-similarity",
    "bleu",
    "rouge-1",
    "rouge-2",
    "rouge-l",
    "meteor",
    "chrf",
    "embedding-score",
)

_PUNCT = set(string.punctuation)


class MetricUnavailable(RuntimeError):
    """A metric's external dependency is missing or unreachable."""


def tokenize(text: str, lowercase: bool = False) -> list[str]:
    """Split on whitespace, then peel boundary punctuation into own tokens.

    "Fix bug." becomes ["Fix", "bug", "."]; interior punctuation such as
    hyphens or dots in identifiers is left alone.
    """
    if lowercase:
        text = text.lower()
    tokens: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        trail: list[str] = []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


def edit_distance(a: str, b: str) -> int:
    """Character-level unit-cost edit distance."""
    return kernels.levenshtein(a, b)


def edit_similarity(a: str, b: str) -> float:
    """1 - ED/max(len); 1.0 when both strings are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - kernels.levenshtein(a, b) / longest


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(pred: Counter, ref: Counter) -> int:
    return sum(min(c, ref[g]) for g, c in pred.items())


def bleu(
    pred: str,
    ref: str,
    max_order: int = 4,
    lowercase: bool = True,
    epsilon: float = 1e-9,
) -> float:
    """Sentence-level n-gram precision score with brevity penalty.

    Orders where neither side has any n-grams are skipped, so short identical
    messages still score 1.0. A zero-match unigram precision floors at
    ``epsilon``; zero matches at higher orders fall back to halving smoothing
    (1 / (2^k * max(1, total)) for the k-th smoothed order). An empty
    prediction or reference scores 0.
    """
    pred_toks = tokenize(pred, lowercase)
    ref_toks = tokenize(ref, lowercase)
    if not pred_toks or not ref_toks:
        return 0.0
    log_sum = 0.0
    orders_used = 0
    smoothed = 0
    for n in range(1, max_order + 1):
        pred_counts = _ngram_counts(pred_toks, n)
        ref_counts = _ngram_counts(ref_toks, n)
        total = max(len(pred_toks) - n + 1, 0)
        if total == 0 and len(ref_toks) - n + 1 <= 0:
            continue
        overlap = _clipped_overlap(pred_counts, ref_counts)
        if overlap > 0:
            precision = overlap / total
        elif n == 1:
            precision = epsilon
        else:
            smoothed += 1
            precision = 1.0 / (2**smoothed * max(1, total))
        log_sum += math.log(precision)
        orders_used += 1
    geo_mean = math.exp(log_sum / orders_used)
    if len(pred_toks) < len(ref_toks):
        bp = math.exp(1.0 - len(ref_toks) / len(pred_toks))
    else:
        bp = 1.0
    return bp * geo_mean


def rouge_n(pred: str, ref: str, n: int, lowercase: bool = True) -> float:
    """F1 over clipped n-gram overlap."""
    pred_toks = tokenize(pred, lowercase)
    ref_toks = tokenize(ref, lowercase)
    pred_counts = _ngram_counts(pred_toks, n)
    ref_counts = _ngram_counts(ref_toks, n)
    if not pred_counts and not ref_counts:
        # neither side is long enough for this order
        return 1.0 if pred_toks == ref_toks else 0.0
    if not pred_counts or not ref_counts:
        return 0.0
    overlap = _clipped_overlap(pred_counts, ref_counts)
    p = overlap / sum(pred_counts.values())
    r = overlap / sum(ref_counts.values())
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def _token_ids(*sequences: list[str]):
    ids: dict[str, int] = {}
    out = []
    for seq in sequences:
        arr = np.empty(len(seq), dtype=np.int64)
        for k, tok in enumerate(seq):
            arr[k] = ids.setdefault(tok, len(ids))
        out.append(arr)
    return out


def rouge_l(pred: str, ref: str, lowercase: bool = True) -> float:
    """F1 from the token-level longest common subsequence."""
    pred_toks = tokenize(pred, lowercase)
    ref_toks = tokenize(ref, lowercase)
    if not pred_toks and not ref_toks:
        return 1.0
    if not pred_toks or not ref_toks:
        return 0.0
    a, b = _token_ids(pred_toks, ref_toks)
    lcs = kernels.lcs_length_seq(a, b)
    p = lcs / len(pred_toks)
    r = lcs / len(ref_toks)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def _align(pred_toks: list[str], ref_toks: list[str]) -> list[tuple[int, int]]:
    """Two-stage unigram alignment: exact tokens first, stems second.

    Greedy and deterministic: scanning predictions left to right, a token
    prefers the reference slot that continues the previous match (keeping
    chunks long), otherwise the leftmost unused candidate.
    """
    match: list[int | None] = [None] * len(pred_toks)
    used = [False] * len(ref_toks)
    stages: list[Callable[[str], str]] = [lambda t: t, stem]
    for key_of in stages:
        pkeys = [key_of(t) for t in pred_toks]
        rkeys = [key_of(t) for t in ref_toks]
        for i in range(len(pred_toks)):
            if match[i] is not None:
                continue
            cands = [
                j for j in range(len(ref_toks)) if not used[j] and rkeys[j] == pkeys[i]
            ]
            if not cands:
                continue
            want = match[i - 1] + 1 if i > 0 and match[i - 1] is not None else -1
            j = want if want in cands else cands[0]
            match[i] = j
            used[j] = True
    return [(i, j) for i, j in enumerate(match) if j is not None]


def meteor(pred: str, ref: str) -> float:
    """Unigram alignment score with a fragmentation penalty.

    Fmean = 10PR/(R+9P); penalty = 0.5*(chunks/matches)^3. Note the identity
    score is 1 - 0.5/m^3 for m-token messages, not 1.0.
    """
    pred_toks = tokenize(pred, lowercase=True)
    ref_toks = tokenize(ref, lowercase=True)
    if not pred_toks or not ref_toks:
        return 0.0
    pairs = _align(pred_toks, ref_toks)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (pi, pj), (ci, cj) in zip(pairs, pairs[1:]):
        if ci != pi + 1 or cj != pj + 1:
            chunks += 1
    p = m / len(pred_toks)
    r = m / len(ref_toks)
    fmean = 10.0 * p * r / (r + 9.0 * p)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def _char_ngram_counts(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def chrf(pred: str, ref: str, max_order: int = 6, beta: float = 2.0) -> float:
    """Character n-gram F-beta averaged over orders 1..max_order.

    Whitespace never enters an n-gram. Orders empty on both sides are
    skipped; an order empty on one side only contributes 0. Returns 0.0 when
    no order has n-grams anywhere (e.g. two empty strings).
    """
    pred_chars = "".join(pred.split())
    ref_chars = "".join(ref.split())
    beta_sq = beta * beta
    scores: list[float] = []
    for n in range(1, max_order + 1):
        pred_counts = _char_ngram_counts(pred_chars, n)
        ref_counts = _char_ngram_counts(ref_chars, n)
        if not pred_counts and not ref_counts:
            continue
        if not pred_counts or not ref_counts:
            scores.append(0.0)
            continue
        overlap = _clipped_overlap(pred_counts, ref_counts)
        p = overlap / sum(pred_counts.values())
        r = overlap / sum(ref_counts.values())
        denom = beta_sq * p + r
        scores.append((1.0 + beta_sq) * p * r / denom if denom > 0 else 0.0)
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


class EmbeddingProvider(Protocol):
    def embed(self, tokens: list[str]) -> list[list[float]]: ...


class HttpEmbeddingProvider:
    """Vector source speaking POST {"tokens": [...]} -> {"vectors": [[...]]}."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def embed(self, tokens: list[str]) -> list[list[float]]:
        body = json.dumps({"tokens": tokens}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
            vectors = payload["vectors"]
        except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
            raise MetricUnavailable(f"embedding provider at {self.url}: {exc}") from exc
        if len(vectors) != len(tokens):
            raise MetricUnavailable(
                f"embedding provider returned {len(vectors)} vectors for "
                f"{len(tokens)} tokens"
            )
        return vectors


def _cosine(u: list[float], v: list[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def embedding_score(
    pred: str,
    ref: str,
    provider: EmbeddingProvider,
    lowercase: bool = False,
) -> float:
    """Greedy cosine-matching F1 over provider-supplied token vectors.

    Precision is the mean best-match similarity of each prediction token
    against the reference tokens; recall mirrors it. Raises
    MetricUnavailable rather than guessing when the provider fails.
    """
    if provider is None:
        raise MetricUnavailable("no embedding provider configured")
    pred_toks = tokenize(pred, lowercase)
    ref_toks = tokenize(ref, lowercase)
    if not pred_toks and not ref_toks:
        return 1.0
    if not pred_toks or not ref_toks:
        return 0.0
    pred_vecs = provider.embed(pred_toks)
    ref_vecs = provider.embed(ref_toks)
    sims = [[_cosine(u, v) for v in ref_vecs] for u in pred_vecs]
    p = sum(max(row) for row in sims) / len(pred_vecs)
    r = sum(max(sims[i][j] for i in range(len(pred_vecs))) for j in range(len(ref_vecs))) / len(ref_vecs)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class MetricDescriptor:
    """A named metric plus its polarity and configuration."""

    name: str
    polarity: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}")
        expected = LOWER_BETTER if self.name == "edit-distance" else HIGHER_BETTER
        if self.polarity != expected:
            raise ValueError(f"{self.name} must be {expected}")


def default_metrics() -> list[MetricDescriptor]:
    """The full candidate set, in report order."""
    mk = MetricDescriptor
    return [
        mk("edit-distance", LOWER_BETTER),
        mk("edit-similarity", HIGHER_BETTER),
        mk("bleu", HIGHER_BETTER, {"max_order": 4, "lowercase": True, "epsilon": 1e-9}),
        mk("rouge-1", HIGHER_BETTER, {"n": 1, "lowercase": True}),
        mk("rouge-2", HIGHER_BETTER, {"n": 2, "lowercase": True}),
        mk("rouge-l", HIGHER_BETTER, {"lowercase": True}),
        mk("meteor", HIGHER_BETTER),
        mk("chrf", HIGHER_BETTER, {"max_order": 6, "beta": 2.0}),
        mk("embedding-score", HIGHER_BETTER, {"lowercase": False}),
    ]


def compute(
    metric: MetricDescriptor,
    pred: str,
    ref: str,
    provider: EmbeddingProvider | None = None,
) -> float:
    """Evaluate one metric descriptor on a (prediction, reference) pair."""
    cfg = metric.config
    name = metric.name
    if name == "edit-distance":
        return float(edit_distance(pred, ref))
    if name == "edit-similarity":
        return edit_similarity(pred, ref)
    if name == "bleu":
        return bleu(pred, ref, **cfg)
    if name == "rouge-1" or name == "rouge-2":
        return rouge_n(pred, ref, **cfg)
    if name == "rouge-l":
        return rouge_l(pred, ref, **cfg)
    if name == "meteor":
        return meteor(pred, ref)
    if name == "chrf":
        return chrf(pred, ref, **cfg)
    if name == "embedding-score":
        return embedding_score(pred, ref, provider, **cfg)
    raise ValueError(f"unknown metric {name!r}")
