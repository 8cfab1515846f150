"""Correlating offline metrics with the online edit-effort signal.

For every generated message, its online score is the mean metric value over
related (derivationally adjacent) edited references, and its offline score
aggregates a candidate metric over conditionally independent references,
taking the best value the metric's polarity allows: max when higher is
better, min when lower is better. The rank correlation between the two
score vectors, pooled over all generated messages, decides which offline
metric best tracks the online signal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from cmgeval import textmetrics as tm
from cmgeval.corpus import (
    DEFAULT_POLICY,
    ORIGINAL_REF,
    CommitRecord,
    PairSet,
    derive_pairs,
)
from cmgeval.stats import CorrelationResult, spearman

logger = logging.getLogger(__name__)

THRESHOLD_HIGH = 0.7
THRESHOLD_MODERATE = 0.3

NodeKey = tuple[str, str]  # (commit_id, node_id)


@dataclass
class NodeScores:
    """Per-node score map plus the nodes that could not be scored."""

    values: dict[NodeKey, float]
    excluded: list[NodeKey]


def _reference_text(record: CommitRecord, ref_id: str) -> str:
    if ref_id == ORIGINAL_REF:
        return record.original_message
    return record.node_map()[ref_id].text


def _score_pairs(record, pair_ids, metric, provider, score_fn):
    nodes = record.node_map()
    by_node: dict[str, list[float]] = {}
    for g_id, ref_id in pair_ids:
        pred = nodes[g_id].text
        ref = _reference_text(record, ref_id)
        if score_fn is not None:
            value = score_fn(pred, ref)
        else:
            value = tm.compute(metric, pred, ref, provider=provider)
        by_node.setdefault(g_id, []).append(float(value))
    return by_node


def _edit_distance_metric() -> tm.MetricDescriptor:
    return tm.MetricDescriptor("edit-distance", tm.LOWER_BETTER)


def online_scores(
    corpus: list[CommitRecord],
    pairs: list[PairSet],
    metric: tm.MetricDescriptor | None = None,
    provider=None,
    score_fn=None,
) -> NodeScores:
    """Mean metric value over each generated node's related references.

    Nodes with no related pair are listed in ``excluded`` and logged, never
    silently dropped.
    """
    metric = metric or _edit_distance_metric()
    values: dict[NodeKey, float] = {}
    excluded: list[NodeKey] = []
    for record, pairset in zip(corpus, pairs, strict=True):
        by_node = _score_pairs(record, pairset.related, metric, provider, score_fn)
        for node in record.generated_nodes():
            scores = by_node.get(node.node_id)
            key = (record.commit_id, node.node_id)
            if scores:
                values[key] = sum(scores) / len(scores)
            else:
                excluded.append(key)
    if excluded:
        logger.warning(
            "online %s: no related reference for %d node(s): %s",
            metric.name, len(excluded), ", ".join("/".join(k) for k in excluded),
        )
    return NodeScores(values=values, excluded=excluded)


def offline_scores(
    corpus: list[CommitRecord],
    pairs: list[PairSet],
    metric: tm.MetricDescriptor,
    provider=None,
    score_fn=None,
) -> NodeScores:
    """Best metric value over each node's conditionally independent references.

    Best means max for higher-better metrics and min for lower-better ones.
    Nodes with no independent reference are listed in ``excluded`` and logged.
    """
    agg = min if metric.polarity == tm.LOWER_BETTER else max
    values: dict[NodeKey, float] = {}
    excluded: list[NodeKey] = []
    for record, pairset in zip(corpus, pairs, strict=True):
        by_node = _score_pairs(record, pairset.independent, metric, provider, score_fn)
        for node in record.generated_nodes():
            scores = by_node.get(node.node_id)
            key = (record.commit_id, node.node_id)
            if scores:
                values[key] = agg(scores)
            else:
                excluded.append(key)
    if excluded:
        logger.warning(
            "offline %s: no independent reference for %d node(s): %s",
            metric.name, len(excluded), ", ".join("/".join(k) for k in excluded),
        )
    return NodeScores(values=values, excluded=excluded)


def q_metric(
    corpus: list[CommitRecord],
    metric: tm.MetricDescriptor,
    online_metric: tm.MetricDescriptor | None = None,
    *,
    policy: str = DEFAULT_POLICY,
    include_original: bool = True,
    provider=None,
    method: str = "t",
    score_fn=None,
    online_score_fn=None,
) -> CorrelationResult:
    """Rank correlation between online and offline scores, paired by node.

    With the default online metric (edit distance over related references)
    this is the metric's headline quality score; passing another online
    metric gives the generalized variant.
    """
    online_metric = online_metric or _edit_distance_metric()
    pairs = [derive_pairs(r, policy, include_original) for r in corpus]
    online = online_scores(corpus, pairs, online_metric, provider, online_score_fn)
    offline = offline_scores(corpus, pairs, metric, provider, score_fn)
    common = sorted(set(online.values) & set(offline.values))
    if len(common) < 3:
        raise ValueError(
            f"Q({metric.name}) vs {online_metric.name}: needs >= 3 nodes with "
            f"both scores, have {len(common)}"
        )
    x = [online.values[k] for k in common]
    y = [offline.values[k] for k in common]
    try:
        return spearman(x, y, method=method)
    except ValueError as exc:
        raise type(exc)(
            f"Q({metric.name}) vs {online_metric.name}: {exc}"
        ) from exc


def q_matrix(
    corpus: list[CommitRecord],
    metrics: list[tm.MetricDescriptor],
    *,
    policy: str = DEFAULT_POLICY,
    include_original: bool = True,
    provider=None,
    method: str = "t",
) -> dict[str, dict[str, CorrelationResult]]:
    """q_metric for every ordered (offline, online) metric pair.

    Rows are offline candidates, columns online signals; the diagonal uses
    the same metric in both roles (and is generally not 1, since related and
    independent references differ).
    """
    matrix: dict[str, dict[str, CorrelationResult]] = {}
    for offline_metric in metrics:
        row: dict[str, CorrelationResult] = {}
        for online_metric in metrics:
            row[online_metric.name] = q_metric(
                corpus,
                offline_metric,
                online_metric,
                policy=policy,
                include_original=include_original,
                provider=provider,
                method=method,
            )
        matrix[offline_metric.name] = row
    return matrix


def correlation_band(q: float) -> str:
    """Strength label for a correlation coefficient."""
    magnitude = abs(q)
    if magnitude >= THRESHOLD_HIGH:
        return "High"
    if magnitude >= THRESHOLD_MODERATE:
        return "Moderate"
    return "Low"


@dataclass
class SelectionReport:
    """Per-metric correlation rows, strongest first."""

    rows: list[dict] = field(default_factory=list)
    online_metric: str = "edit-distance"
    thresholds: dict = field(
        default_factory=lambda: {
            "high": THRESHOLD_HIGH,
            "moderate": THRESHOLD_MODERATE,
        }
    )

    def to_json_dict(self) -> dict:
        return {
            "online_metric": self.online_metric,
            "thresholds": dict(self.thresholds),
            "rows": [dict(r) for r in self.rows],
        }

    def to_text(self) -> str:
        header = f"{'metric':<18} {'Q':>7} {'p-value':>9} {'n':>5}  group"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r['metric']:<18} {r['q']:>7.2f} {r['p_value']:>9.4f} "
                f"{r['n']:>5}  {r['group']}"
            )
        return "\n".join(lines) + "\n"


def selection_report(
    results, online_metric: str = "edit-distance"
) -> SelectionReport:
    """Build the grouped report from Q results.

    ``results`` is either {metric: CorrelationResult} or a full q_matrix;
    for a matrix, the column for ``online_metric`` is reported.
    """
    if results and all(isinstance(v, dict) for v in results.values()):
        column = {}
        for name, row in results.items():
            if online_metric not in row:
                raise KeyError(f"matrix has no online column {online_metric!r}")
            column[name] = row[online_metric]
        results = column
    rows = [
        {
            "metric": name,
            "q": res.coefficient,
            "p_value": res.p_value,
            "n": res.n,
            "group": correlation_band(res.coefficient),
        }
        for name, res in results.items()
    ]
    rows.sort(key=lambda r: (-abs(r["q"]), r["metric"]))
    return SelectionReport(rows=rows, online_metric=online_metric)
