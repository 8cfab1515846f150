"""Data model, persistence, and reference-pair derivation.

A commit carries a small derivation graph of messages: generated nodes
(model output, or synthesized by editing backwards from an edited message)
and edited nodes (expert rewrites, or synthesized forward edits). Pairing
walks that graph to split (generated, reference) pairs into related ones,
which share a derivation edge or component, and conditionally independent
ones, which are everything else plus the original commit message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KIND_GENERATED = "generated"
KIND_EDITED = "edited"
SOURCE_MODEL = "model"
SOURCE_EXPERT = "expert"
SOURCE_BACKWARD = "synthetic-backward"
SOURCE_FORWARD = "synthetic-forward"
METHOD_HUMAN_EDIT = "human-edit"
METHOD_LLM_BACKWARD = "llm-backward"
METHOD_LLM_FORWARD = "llm-forward"

_SOURCES_BY_KIND = {
    KIND_GENERATED: {SOURCE_MODEL, SOURCE_BACKWARD},
    KIND_EDITED: {SOURCE_EXPERT, SOURCE_FORWARD},
}
# method -> (kind of from_node, kind of to_node)
_EDGE_DIRECTIONS = {
    METHOD_HUMAN_EDIT: (KIND_GENERATED, KIND_EDITED),
    METHOD_LLM_FORWARD: (KIND_GENERATED, KIND_EDITED),
    METHOD_LLM_BACKWARD: (KIND_EDITED, KIND_GENERATED),
}

# reference-id standing for the commit's original message in pair sets
ORIGINAL_REF = "@original"

DEFAULT_POLICY = "direct"


class CorpusError(ValueError):
    """A corpus file or record violates the schema."""


@dataclass(frozen=True)
class MessageNode:
    node_id: str
    kind: str
    source: str
    text: str
    created_at: str | None = None


@dataclass(frozen=True)
class DerivationEdge:
    from_node: str
    to_node: str
    method: str


@dataclass
class CommitRecord:
    commit_id: str
    diff: str
    original_message: str
    nodes: list[MessageNode] = field(default_factory=list)
    edges: list[DerivationEdge] = field(default_factory=list)
    summary: str | None = None

    def node_map(self) -> dict[str, MessageNode]:
        return {n.node_id: n for n in self.nodes}

    def generated_nodes(self) -> list[MessageNode]:
        return [n for n in self.nodes if n.kind == KIND_GENERATED]

    def edited_nodes(self) -> list[MessageNode]:
        return [n for n in self.nodes if n.kind == KIND_EDITED]

    def parents_of(self, node_id: str) -> list[str]:
        return [e.from_node for e in self.edges if e.to_node == node_id]


@dataclass(frozen=True)
class PairSet:
    """Related and conditionally independent reference pairs for one commit.

    Both lists hold (generated-node-id, reference-id) tuples; the reference
    is an edited node id or ORIGINAL_REF for the commit's original message.
    """

    commit_id: str
    related: list[tuple[str, str]]
    independent: list[tuple[str, str]]


def validate_record(record: CommitRecord) -> None:
    """Raise CorpusError naming the commit and offending field."""
    cid = record.commit_id
    if not cid or not isinstance(cid, str):
        raise CorpusError("commit_id must be a non-empty string")

    seen_ids: set[str] = set()
    for node in record.nodes:
        where = f"commit {cid}, node {node.node_id!r}"
        if not node.node_id:
            raise CorpusError(f"commit {cid}: empty node_id")
        if node.node_id in seen_ids:
            raise CorpusError(f"{where}: duplicate node_id")
        seen_ids.add(node.node_id)
        if node.kind not in _SOURCES_BY_KIND:
            raise CorpusError(f"{where}: unknown kind {node.kind!r}")
        if node.source not in _SOURCES_BY_KIND[node.kind]:
            raise CorpusError(
                f"{where}: source {node.source!r} invalid for kind {node.kind!r}"
            )
        if not node.text:
            raise CorpusError(f"{where}: empty text")

    nodes = record.node_map()
    seen_edges: set[tuple[str, str, str]] = set()
    incoming: dict[str, list[DerivationEdge]] = {n: [] for n in nodes}
    for edge in record.edges:
        label = f"commit {cid}, edge {edge.from_node!r}->{edge.to_node!r}"
        if edge.method not in _EDGE_DIRECTIONS:
            raise CorpusError(f"{label}: unknown method {edge.method!r}")
        for endpoint in (edge.from_node, edge.to_node):
            if endpoint not in nodes:
                raise CorpusError(f"{label}: dangling endpoint {endpoint!r}")
        key = (edge.from_node, edge.to_node, edge.method)
        if key in seen_edges:
            raise CorpusError(f"{label}: duplicate edge")
        seen_edges.add(key)
        want_from, want_to = _EDGE_DIRECTIONS[edge.method]
        if nodes[edge.from_node].kind != want_from or nodes[edge.to_node].kind != want_to:
            raise CorpusError(
                f"{label}: method {edge.method} requires {want_from}->{want_to}"
            )
        incoming[edge.to_node].append(edge)

    for node in record.nodes:
        if node.kind == KIND_EDITED and not incoming[node.node_id]:
            raise CorpusError(
                f"commit {cid}, node {node.node_id!r}: edited node has no "
                "incoming derivation edge"
            )
        if node.source == SOURCE_BACKWARD and len(incoming[node.node_id]) != 1:
            raise CorpusError(
                f"commit {cid}, node {node.node_id!r}: backward-generated node "
                f"needs exactly one incoming edge, has {len(incoming[node.node_id])}"
            )

    # cycle check over the directed derivation graph
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for edge in record.edges:
        adjacency[edge.from_node].append(edge.to_node)
    state: dict[str, int] = {}

    def visit(start: str) -> None:
        stack = [(start, iter(adjacency[start]))]
        state[start] = 1
        while stack:
            node_id, it = stack[-1]
            advanced = False
            for nxt in it:
                if state.get(nxt) == 1:
                    raise CorpusError(f"commit {cid}: derivation cycle through {nxt!r}")
                if nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(adjacency[nxt])))
                    advanced = True
                    break
            if not advanced:
                state[node_id] = 2
                stack.pop()

    for node_id in nodes:
        if node_id not in state:
            visit(node_id)


def _node_to_dict(node: MessageNode) -> dict:
    out = {
        "node_id": node.node_id,
        "kind": node.kind,
        "source": node.source,
        "text": node.text,
    }
    if node.created_at is not None:
        out["created_at"] = node.created_at
    return out


def record_to_dict(record: CommitRecord) -> dict:
    out = {
        "commit_id": record.commit_id,
        "diff": record.diff,
        "original_message": record.original_message,
        "nodes": [_node_to_dict(n) for n in record.nodes],
        "edges": [
            {"from": e.from_node, "to": e.to_node, "method": e.method}
            for e in record.edges
        ],
    }
    if record.summary is not None:
        out["summary"] = record.summary
    return out


def record_from_dict(data: dict) -> CommitRecord:
    try:
        nodes = [
            MessageNode(
                node_id=n["node_id"],
                kind=n["kind"],
                source=n["source"],
                text=n["text"],
                created_at=n.get("created_at"),
            )
            for n in data.get("nodes", [])
        ]
        edges = [
            DerivationEdge(from_node=e["from"], to_node=e["to"], method=e["method"])
            for e in data.get("edges", [])
        ]
        record = CommitRecord(
            commit_id=data["commit_id"],
            diff=data["diff"],
            original_message=data["original_message"],
            nodes=nodes,
            edges=edges,
            summary=data.get("summary"),
        )
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"malformed commit object: {exc}") from exc
    validate_record(record)
    return record


def load_corpus(path) -> list[CommitRecord]:
    """Read a JSONL corpus, validating every record and id uniqueness."""
    corpus: list[CommitRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: {exc}") from exc
            try:
                record = record_from_dict(data)
            except CorpusError as exc:
                raise CorpusError(f"{path}: line {lineno}: {exc}") from exc
            if record.commit_id in seen:
                raise CorpusError(
                    f"{path}: line {lineno}: duplicate commit_id {record.commit_id!r}"
                )
            seen.add(record.commit_id)
            corpus.append(record)
    return corpus


def dumps_record(record: CommitRecord) -> str:
    """Canonical one-line serialization: sorted keys, UTF-8, no extra space."""
    return json.dumps(
        record_to_dict(record), sort_keys=True, ensure_ascii=False,
        separators=(",", ":"),
    )


def save_corpus(corpus: list[CommitRecord], path) -> None:
    text = "".join(dumps_record(r) + "\n" for r in corpus)
    Path(path).write_text(text, encoding="utf-8")


def derive_pairs(
    record: CommitRecord,
    policy: str = DEFAULT_POLICY,
    include_original: bool = True,
) -> PairSet:
    """Split (generated, reference) pairs into related and independent.

    Under ``direct``, a generated and an edited message are related when one
    derivation edge joins them (in either direction); under ``closure``, when
    they share a weakly connected component. Every other (generated, edited)
    combination is conditionally independent, as is (generated, original
    message) when ``include_original`` is set.
    """
    if policy not in ("direct", "closure"):
        raise ValueError(f"unknown pairing policy {policy!r}")
    generated = sorted(n.node_id for n in record.generated_nodes())
    edited = sorted(n.node_id for n in record.edited_nodes())

    related: set[tuple[str, str]] = set()
    if policy == "direct":
        nodes = record.node_map()
        for edge in record.edges:
            a, b = nodes[edge.from_node], nodes[edge.to_node]
            if a.kind == KIND_GENERATED and b.kind == KIND_EDITED:
                related.add((a.node_id, b.node_id))
            elif a.kind == KIND_EDITED and b.kind == KIND_GENERATED:
                related.add((b.node_id, a.node_id))
    else:
        component: dict[str, str] = {n.node_id: n.node_id for n in record.nodes}

        def find(x: str) -> str:
            while component[x] != x:
                component[x] = component[component[x]]
                x = component[x]
            return x

        for edge in record.edges:
            ra, rb = find(edge.from_node), find(edge.to_node)
            if ra != rb:
                component[rb] = ra
        for g in generated:
            for e in edited:
                if find(g) == find(e):
                    related.add((g, e))

    independent: list[tuple[str, str]] = []
    for g in generated:
        for e in edited:
            if (g, e) not in related:
                independent.append((g, e))
        if include_original:
            independent.append((g, ORIGINAL_REF))

    return PairSet(
        commit_id=record.commit_id,
        related=sorted(related),
        independent=sorted(independent),
    )


_SUMMARY_ROWS = (
    "expert",
    "synthetic-backward",
    "synthetic-forward-from-model",
    "synthetic-forward-from-backward",
    "full",
)


def dataset_summary(
    corpus: list[CommitRecord],
    policy: str = DEFAULT_POLICY,
    include_original: bool = True,
) -> list[dict]:
    """Per-source pair counts with per-commit averages, plus a full row.

    Each source row counts the pairs its pipeline stage contributes: expert
    rows pair the model message with expert edits; the backward row pairs
    backward-generated messages with expert edits and the original message;
    forward rows pair forward edits with their originating side. The full
    row counts every related and conditionally independent pair regardless
    of stage attribution, so it is not the column sum of the source rows.
    Averages divide by the number of commits carrying that source.
    """
    tallies = {
        row: {"commits": set(), "related": 0, "independent": 0}
        for row in _SUMMARY_ROWS
    }

    for record in corpus:
        cid = record.commit_id
        nodes = record.node_map()
        tallies["full"]["commits"].add(cid)

        def forward_parent_sources(node_id: str) -> set[str]:
            return {nodes[p].source for p in record.parents_of(node_id)}

        for node in record.nodes:
            if node.source == SOURCE_EXPERT:
                tallies["expert"]["commits"].add(cid)
            elif node.source == SOURCE_BACKWARD:
                tallies["synthetic-backward"]["commits"].add(cid)
            elif node.source == SOURCE_FORWARD:
                parents = forward_parent_sources(node.node_id)
                if SOURCE_BACKWARD in parents:
                    tallies["synthetic-forward-from-backward"]["commits"].add(cid)
                if SOURCE_MODEL in parents:
                    tallies["synthetic-forward-from-model"]["commits"].add(cid)

        pairs = derive_pairs(record, policy, include_original)

        for g_id, e_id in pairs.related:
            tallies["full"]["related"] += 1
            g, e = nodes[g_id], nodes[e_id]
            if e.source == SOURCE_EXPERT:
                row = "expert" if g.source == SOURCE_MODEL else "synthetic-backward"
            else:
                row = (
                    "synthetic-forward-from-model"
                    if g.source == SOURCE_MODEL
                    else "synthetic-forward-from-backward"
                )
            tallies[row]["related"] += 1

        for g_id, ref_id in pairs.independent:
            tallies["full"]["independent"] += 1
            g = nodes[g_id]
            if ref_id == ORIGINAL_REF:
                if g.source == SOURCE_BACKWARD:
                    tallies["synthetic-backward"]["independent"] += 1
                continue
            e = nodes[ref_id]
            if e.source == SOURCE_EXPERT:
                if g.source == SOURCE_BACKWARD:
                    tallies["synthetic-backward"]["independent"] += 1
                elif g.source == SOURCE_MODEL:
                    tallies["expert"]["independent"] += 1
            else:
                parents = forward_parent_sources(ref_id)
                if SOURCE_BACKWARD in parents:
                    tallies["synthetic-forward-from-backward"]["independent"] += 1
                elif g.source == SOURCE_MODEL:
                    tallies["synthetic-forward-from-model"]["independent"] += 1

    out = []
    for row in _SUMMARY_ROWS:
        t = tallies[row]
        ncommits = len(t["commits"])
        out.append(
            {
                "source": row,
                "commits": ncommits,
                "related": t["related"],
                "related_avg": t["related"] / ncommits if ncommits else 0.0,
                "independent": t["independent"],
                "independent_avg": t["independent"] / ncommits if ncommits else 0.0,
            }
        )
    return out


def import_external(path) -> list[CommitRecord]:
    """Convert the published release layout into this corpus schema.

    The release format is one JSON document: {"commits": [{"sha", "diff",
    "message", "summary"?, "messages": [{"id", "role", "origin", "text",
    "derived_from": [...], "timestamp"?}]}]}. Roles map to node kinds,
    origins to sources, and derived_from links to typed derivation edges.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    role_kind = {"generated": KIND_GENERATED, "edited": KIND_EDITED}
    origin_source = {
        "model": SOURCE_MODEL,
        "expert": SOURCE_EXPERT,
        "backward": SOURCE_BACKWARD,
        "forward": SOURCE_FORWARD,
    }
    corpus = []
    seen: set[str] = set()
    for commit in data.get("commits", []):
        try:
            nodes = []
            edges = []
            for msg in commit.get("messages", []):
                kind = role_kind[msg["role"]]
                source = origin_source[msg["origin"]]
                nodes.append(
                    MessageNode(
                        node_id=msg["id"],
                        kind=kind,
                        source=source,
                        text=msg["text"],
                        created_at=msg.get("timestamp"),
                    )
                )
                for parent in msg.get("derived_from", []):
                    if source == SOURCE_BACKWARD:
                        edges.append(DerivationEdge(parent, msg["id"], METHOD_LLM_BACKWARD))
                    elif source == SOURCE_FORWARD:
                        edges.append(DerivationEdge(parent, msg["id"], METHOD_LLM_FORWARD))
                    else:
                        edges.append(DerivationEdge(parent, msg["id"], METHOD_HUMAN_EDIT))
            record = CommitRecord(
                commit_id=commit["sha"],
                diff=commit["diff"],
                original_message=commit["message"],
                nodes=nodes,
                edges=edges,
                summary=commit.get("summary"),
            )
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"malformed release commit object: {exc}") from exc
        validate_record(record)
        if record.commit_id in seen:
            raise CorpusError(f"duplicate commit sha {record.commit_id!r}")
        seen.add(record.commit_id)
        corpus.append(record)
    return corpus
