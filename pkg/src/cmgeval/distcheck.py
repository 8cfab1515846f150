"""Checks whether a corpus's edit-distance profile matches live telemetry.

Telemetry rows pair an observed edit distance with the length of the machine
draft that was edited. After dropping zero-distance rows, telemetry distances
are rescaled by the ratio of average draft lengths (corpus over telemetry) and
compared against the corpus distances with aligned histograms and a two-sample
Kolmogorov-Smirnov statistic. The KS number is advisory, not a gate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from . import corpus as cp
from .kernels import levenshtein

DEFAULT_BUCKET_WIDTH = 50.0
DEFAULT_MAX_ED = 100_000


@dataclass(frozen=True)
class TelemetryRecord:
    ed_value: int
    gen_length: int


@dataclass(frozen=True)
class TelemetryLog:
    records: tuple[TelemetryRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def ed_values(self) -> list[int]:
        return [r.ed_value for r in self.records]

    def mean_gen_length(self) -> float:
        if not self.records:
            raise ValueError("empty telemetry log has no mean length")
        return sum(r.gen_length for r in self.records) / len(self.records)


def make_log(rows, max_ed: int = DEFAULT_MAX_ED) -> TelemetryLog:
    """Validate (ed_value, gen_length) rows into a TelemetryLog."""
    records = []
    for i, (ed_value, gen_length) in enumerate(rows):
        ed_value = int(ed_value)
        gen_length = int(gen_length)
        if ed_value < 0 or ed_value > max_ed:
            raise ValueError(f"row {i}: ed_value {ed_value} outside [0, {max_ed}]")
        if gen_length <= 0:
            raise ValueError(f"row {i}: gen_length must be positive")
        records.append(TelemetryRecord(ed_value, gen_length))
    return TelemetryLog(tuple(records))


def load_telemetry(path, max_ed: int = DEFAULT_MAX_ED) -> TelemetryLog:
    """Read telemetry from CSV (header ed_value,gen_length) or JSONL."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rows.append((obj["ed_value"], obj["gen_length"]))
        return make_log(rows, max_ed)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"ed_value", "gen_length"} <= set(
        reader.fieldnames
    ):
        raise ValueError(f"{path}: expected ed_value,gen_length header")
    return make_log(
        ((row["ed_value"], row["gen_length"]) for row in reader), max_ed
    )


def save_telemetry(log: TelemetryLog, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ed_value", "gen_length"])
        for record in log.records:
            writer.writerow([record.ed_value, record.gen_length])


def filter_zero(log: TelemetryLog) -> tuple[TelemetryLog, dict]:
    """Drop zero-distance rows; report the removed fraction."""
    kept = tuple(r for r in log.records if r.ed_value != 0)
    removed = len(log.records) - len(kept)
    fraction = removed / len(log.records) if log.records else 0.0
    return TelemetryLog(kept), {"removed_fraction": fraction, "removed": removed}


def mean_generated_length(corpus, sources=(cp.SOURCE_MODEL,)) -> float:
    lengths = [
        len(node.text)
        for record in corpus
        for node in record.generated_nodes()
        if node.source in sources
    ]
    if not lengths:
        raise ValueError("corpus has no generated messages from those sources")
    return sum(lengths) / len(lengths)


def scale_factor(corpus, log: TelemetryLog, sources=(cp.SOURCE_MODEL,)) -> float:
    """Ratio of average draft length: corpus over telemetry."""
    return mean_generated_length(corpus, sources) / log.mean_gen_length()


def scaled_values(log: TelemetryLog, factor: float) -> list[float]:
    return [r.ed_value * factor for r in log.records]


def corpus_ed_values(corpus, policy: str = cp.DEFAULT_POLICY) -> list[int]:
    """Edit distances over related (draft, edited reference) pairs."""
    values = []
    for record in corpus:
        nodes = record.node_map()
        pairs = cp.derive_pairs(record, policy=policy, include_original=False)
        for g_id, ref_id in pairs.related:
            values.append(levenshtein(nodes[g_id].text, nodes[ref_id].text))
    return values


def two_sample_ks(xs, ys) -> float:
    """Sup distance between the two empirical CDFs."""
    xs, ys = sorted(xs), sorted(ys)
    if not xs or not ys:
        raise ValueError("KS statistic needs two non-empty samples")
    best = 0.0
    for v in sorted(set(xs) | set(ys)):
        diff = abs(bisect_right(xs, v) / len(xs) - bisect_right(ys, v) / len(ys))
        if diff > best:
            best = diff
    return best


def _bucket_edges(values, width: float) -> list[float]:
    lo = math.floor(min(values) / width) * width
    hi = max(values)
    count = max(1, int(math.floor((hi - lo) / width)) + 1)
    return [lo + i * width for i in range(count + 1)]


def _counts(values, edges) -> list[int]:
    counts = [0] * (len(edges) - 1)
    width = edges[1] - edges[0]
    for v in values:
        idx = min(int((v - edges[0]) // width), len(counts) - 1)
        counts[idx] += 1
    return counts


def compare(
    corpus_values,
    telemetry_values,
    bucket_width: float = DEFAULT_BUCKET_WIDTH,
) -> dict:
    """Aligned histograms, KS statistic, and modal bucket per sample."""
    corpus_values = list(corpus_values)
    telemetry_values = list(telemetry_values)
    if not corpus_values or not telemetry_values:
        raise ValueError("compare needs two non-empty samples")
    if bucket_width <= 0:
        raise ValueError("bucket_width must be positive")
    edges = _bucket_edges(corpus_values + telemetry_values, bucket_width)
    corpus_counts = _counts(corpus_values, edges)
    telemetry_counts = _counts(telemetry_values, edges)
    histogram = [
        {
            "lo": edges[i],
            "hi": edges[i + 1],
            "corpus": corpus_counts[i],
            "telemetry": telemetry_counts[i],
        }
        for i in range(len(corpus_counts))
    ]

    def peak(counts):
        idx = max(range(len(counts)), key=counts.__getitem__)
        return {"lo": edges[idx], "hi": edges[idx + 1], "count": counts[idx]}

    return {
        "bucket_width": bucket_width,
        "ks": two_sample_ks(corpus_values, telemetry_values),
        "histogram": histogram,
        "peaks": {"corpus": peak(corpus_counts), "telemetry": peak(telemetry_counts)},
    }


def histogram_csv(report: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["lo", "hi", "corpus", "telemetry"])
    for row in report["histogram"]:
        writer.writerow([row["lo"], row["hi"], row["corpus"], row["telemetry"]])
    return out.getvalue()
