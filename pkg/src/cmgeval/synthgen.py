"""Synthetic corpus growth by prompting a language model in two directions.

Backward generation asks the model to reconstruct a plausible machine draft
from a human-edited message; forward generation asks it to edit a draft the
way a careful reviewer would. Candidates pass a content-change filter based
on character-level longest common subsequence, and every accepted node keeps
enough provenance (prompt hash, attempt index, raw response) to replay the
acceptance decision from a transcript file without network access.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import urllib.error
import urllib.request
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from . import corpus as cp
from .kernels import lcs_length

DIRECTION_BACKWARD = "backward"
DIRECTION_FORWARD = "forward"
_DIRECTIONS = (DIRECTION_BACKWARD, DIRECTION_FORWARD)

DEFAULT_BACKWARD_THRESHOLD = 0.5
DEFAULT_FORWARD_THRESHOLD = 0.75
DEFAULT_ATTEMPTS = 3
DEFAULT_ICL_COUNT = 15

# input node sources eligible per direction
_DEFAULT_SOURCES = {
    DIRECTION_BACKWARD: (cp.SOURCE_EXPERT,),
    DIRECTION_FORWARD: (cp.SOURCE_MODEL, cp.SOURCE_BACKWARD),
}
_NODE_SUFFIX = {DIRECTION_BACKWARD: "bwd", DIRECTION_FORWARD: "fwd"}


class LlmError(RuntimeError):
    """Transport or payload failure talking to a completion backend."""


class LlmClient(Protocol):
    def complete(self, prompt: str, meta: dict | None = None) -> str: ...


def added_fraction(input_text: str, output_text: str) -> float:
    """Share of the output that is not carried over from the input.

    Character-level: (len(output) - LCS(input, output)) / len(output).
    """
    if not output_text:
        raise ValueError("added_fraction needs a non-empty output")
    common = lcs_length(input_text, output_text)
    return (len(output_text) - common) / len(output_text)


def removed_fraction(input_text: str, output_text: str) -> float:
    """Share of the input that did not survive into the output."""
    if not input_text:
        raise ValueError("removed_fraction needs a non-empty input")
    common = lcs_length(input_text, output_text)
    return (len(input_text) - common) / len(input_text)


@dataclass(frozen=True)
class GenerationJob:
    direction: str
    input_node: str
    icl_examples: tuple[tuple[str, str], ...] = ()
    max_attempts: int = DEFAULT_ATTEMPTS
    threshold: float = DEFAULT_BACKWARD_THRESHOLD

    def __post_init__(self):
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be within [0, 1]")
        object.__setattr__(
            self, "icl_examples", tuple((g, e) for g, e in self.icl_examples)
        )


@dataclass(frozen=True)
class GenerationOutcome:
    """Result of one generation job, accepted or not."""

    commit_id: str
    job: GenerationJob
    job_index: int
    accepted: bool
    node: cp.MessageNode | None
    edge: cp.DerivationEdge | None
    attempts_used: int
    accepted_attempt: int | None
    fractions: tuple[float, ...]
    prompt_hash: str
    response: str | None

    def to_json_dict(self) -> dict:
        return {
            "commit": self.commit_id,
            "direction": self.job.direction,
            "input_node": self.job.input_node,
            "job": self.job_index,
            "accepted": self.accepted,
            "node": self.node.node_id if self.node else None,
            "attempts_used": self.attempts_used,
            "accepted_attempt": self.accepted_attempt,
            "fractions": [round(f, 6) for f in self.fractions],
            "prompt_sha256": self.prompt_hash,
            "response": self.response,
        }


_INSTRUCTIONS = {
    DIRECTION_BACKWARD: (
        "Reconstruct the assistant-written draft commit message that a"
        " reviewer edited into the final message below."
        " Reply with the draft text only."
    ),
    DIRECTION_FORWARD: (
        "Edit the draft commit message below the way a careful reviewer"
        " would, keeping it accurate and concise."
        " Reply with the edited text only."
    ),
}
_LABELS = {
    DIRECTION_BACKWARD: ("Final message", "Draft"),
    DIRECTION_FORWARD: ("Draft", "Final message"),
}


def build_prompt(
    direction: str,
    icl_pairs,
    target_text: str,
    context: str = "",
) -> str:
    """Deterministic prompt: instruction, optional diff, examples, target."""
    if direction not in _DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    src_label, dst_label = _LABELS[direction]
    parts = [_INSTRUCTIONS[direction]]
    if context:
        parts.append(f"Commit diff:\n{context}")
    for i, (g_text, e_text) in enumerate(icl_pairs, 1):
        src, dst = (e_text, g_text) if direction == DIRECTION_BACKWARD else (g_text, e_text)
        parts.append(f"Example {i}:\n{src_label}:\n{src}\n{dst_label}:\n{dst}")
    parts.append(f"{src_label}:\n{target_text}\n{dst_label}:")
    return "\n\n".join(parts)


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def expert_pairs(
    corpus, exclude_commit: str | None = None
) -> list[tuple[str, str]]:
    """(generated text, edited text) pairs joined by a human edit, sorted."""
    rows = []
    for record in corpus:
        if record.commit_id == exclude_commit:
            continue
        nodes = record.node_map()
        for edge in record.edges:
            if edge.method != cp.METHOD_HUMAN_EDIT:
                continue
            rows.append(
                (
                    record.commit_id,
                    edge.from_node,
                    edge.to_node,
                    nodes[edge.from_node].text,
                    nodes[edge.to_node].text,
                )
            )
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return [(g, e) for _, _, _, g, e in rows]


def _job_rng(seed: int, node_id: str, job_index: int) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{node_id}:{job_index}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


def sample_icl(
    corpus,
    commit_id: str,
    node_id: str,
    job_index: int,
    count: int = DEFAULT_ICL_COUNT,
    seed: int = 0,
) -> tuple[tuple[str, str], ...]:
    """Uniform sample without replacement from other commits' expert pairs."""
    pool = expert_pairs(corpus, exclude_commit=commit_id)
    rng = _job_rng(seed, node_id, job_index)
    k = min(count, len(pool))
    return tuple(rng.sample(pool, k))


class HttpLlmClient:
    """Chat-completion HTTP backend; bearer token read from an env var."""

    def __init__(
        self,
        url: str,
        model: str = "default",
        temperature: float = 1.0,
        api_key_env: str = "CMGEVAL_LLM_KEY",
        timeout: float = 60.0,
    ):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, prompt: str, meta: dict | None = None) -> str:
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        request = urllib.request.Request(
            self.url,
            data=json.dumps(payload).encode("utf-8"),
            headers=headers,
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise LlmError(f"completion request failed: {exc}") from exc
        try:
            return str(data["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise LlmError("malformed completion payload") from exc


class TranscriptRecorder:
    """Wraps a client and appends {prompt_hash, request, response} JSONL."""

    def __init__(self, inner, path):
        self._inner = inner
        self._path = Path(path)
        self._lock = threading.Lock()
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text("", encoding="utf-8")

    def complete(self, prompt: str, meta: dict | None = None) -> str:
        response = self._inner.complete(prompt, meta)
        digest = prompt_sha256(prompt)
        entry = {
            "prompt_hash": digest,
            "request": {**(meta or {}), "prompt_sha256": digest},
            "response": response,
        }
        line = json.dumps(entry, sort_keys=True, ensure_ascii=False)
        with self._lock, self._path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class TranscriptReplayClient:
    """Replays recorded responses keyed by prompt hash, FIFO per prompt.

    Recomputing the hash of the live prompt and requiring a queued entry for
    it is what verifies the replayed run builds prompts identical to the
    recorded one.
    """

    def __init__(self, path):
        self._queues: dict[str, deque[str]] = {}
        self._lock = threading.Lock()
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self._queues.setdefault(entry["prompt_hash"], deque()).append(
                    entry["response"]
                )

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def complete(self, prompt: str, meta: dict | None = None) -> str:
        digest = prompt_sha256(prompt)
        with self._lock:
            queue = self._queues.get(digest)
            if not queue:
                raise LlmError(
                    f"no recorded response for prompt {digest[:12]}; "
                    "transcript and run have diverged"
                )
            return queue.popleft()


def _execute_job(
    client, record: cp.CommitRecord, job: GenerationJob, job_index: int
) -> GenerationOutcome:
    node = record.node_map()[job.input_node]
    backward = job.direction == DIRECTION_BACKWARD
    expected_kind = cp.KIND_EDITED if backward else cp.KIND_GENERATED
    if node.kind != expected_kind:
        raise ValueError(
            f"{job.direction} generation needs a {expected_kind} input node,"
            f" got {node.kind} {node.node_id!r}"
        )
    prompt = build_prompt(job.direction, job.icl_examples, node.text, record.diff)
    digest = prompt_sha256(prompt)

    fractions: list[float] = []
    attempts_used = 0
    last_error: LlmError | None = None
    for attempt in range(1, job.max_attempts + 1):
        attempts_used = attempt
        meta = {
            "direction": job.direction,
            "input_node": job.input_node,
            "job": job_index,
            "attempt": attempt,
        }
        try:
            candidate = client.complete(prompt, meta)
        except LlmError as exc:
            last_error = exc
            continue
        if not candidate:
            fractions.append(1.0)
            continue
        if backward:
            frac = added_fraction(node.text, candidate)
        else:
            frac = removed_fraction(node.text, candidate)
        fractions.append(frac)
        if frac <= job.threshold:
            new_id = f"{job.input_node}.{_NODE_SUFFIX[job.direction]}{job_index}"
            if backward:
                new_node = cp.MessageNode(
                    new_id, cp.KIND_GENERATED, cp.SOURCE_BACKWARD, candidate
                )
                edge = cp.DerivationEdge(
                    job.input_node, new_id, cp.METHOD_LLM_BACKWARD
                )
            else:
                new_node = cp.MessageNode(
                    new_id, cp.KIND_EDITED, cp.SOURCE_FORWARD, candidate
                )
                edge = cp.DerivationEdge(
                    job.input_node, new_id, cp.METHOD_LLM_FORWARD
                )
            return GenerationOutcome(
                commit_id=record.commit_id,
                job=job,
                job_index=job_index,
                accepted=True,
                node=new_node,
                edge=edge,
                attempts_used=attempt,
                accepted_attempt=attempt,
                fractions=tuple(fractions),
                prompt_hash=digest,
                response=candidate,
            )
    if last_error is not None and not fractions:
        raise last_error
    return GenerationOutcome(
        commit_id=record.commit_id,
        job=job,
        job_index=job_index,
        accepted=False,
        node=None,
        edge=None,
        attempts_used=attempts_used,
        accepted_attempt=None,
        fractions=tuple(fractions),
        prompt_hash=digest,
        response=None,
    )


def generate_backward(
    client,
    record: cp.CommitRecord,
    node_id: str,
    icl_examples,
    threshold: float = DEFAULT_BACKWARD_THRESHOLD,
    attempts: int = DEFAULT_ATTEMPTS,
    job_index: int = 1,
) -> GenerationOutcome:
    job = GenerationJob(
        DIRECTION_BACKWARD, node_id, tuple(icl_examples), attempts, threshold
    )
    return _execute_job(client, record, job, job_index)


def generate_forward(
    client,
    record: cp.CommitRecord,
    node_id: str,
    icl_examples,
    threshold: float = DEFAULT_FORWARD_THRESHOLD,
    attempts: int = DEFAULT_ATTEMPTS,
    job_index: int = 1,
) -> GenerationOutcome:
    job = GenerationJob(
        DIRECTION_FORWARD, node_id, tuple(icl_examples), attempts, threshold
    )
    return _execute_job(client, record, job, job_index)


def extend_corpus(
    corpus,
    client,
    direction: str,
    threshold: float | None = None,
    attempts: int = DEFAULT_ATTEMPTS,
    icl_count: int = DEFAULT_ICL_COUNT,
    jobs_per_node: int = 1,
    seed: int = 0,
    sources: tuple[str, ...] | None = None,
    parallelism: int = 1,
) -> tuple[list[cp.CommitRecord], list[GenerationOutcome]]:
    """Run generation jobs over every eligible node and apply accepted results.

    Jobs may execute in a thread pool, but results are applied by this single
    caller in job submission order, so output is deterministic for a
    deterministic client.
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    if jobs_per_node < 1:
        raise ValueError("jobs_per_node must be >= 1")
    if threshold is None:
        threshold = (
            DEFAULT_BACKWARD_THRESHOLD
            if direction == DIRECTION_BACKWARD
            else DEFAULT_FORWARD_THRESHOLD
        )
    if sources is None:
        sources = _DEFAULT_SOURCES[direction]
    want_kind = (
        cp.KIND_EDITED if direction == DIRECTION_BACKWARD else cp.KIND_GENERATED
    )

    tasks: list[tuple[cp.CommitRecord, GenerationJob, int]] = []
    for record in corpus:
        for node in record.nodes:
            if node.kind != want_kind or node.source not in sources:
                continue
            for j in range(1, jobs_per_node + 1):
                icl = sample_icl(
                    corpus, record.commit_id, node.node_id, j, icl_count, seed
                )
                job = GenerationJob(direction, node.node_id, icl, attempts, threshold)
                tasks.append((record, job, j))

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(
                pool.map(lambda t: _execute_job(client, t[0], t[1], t[2]), tasks)
            )
    else:
        outcomes = [_execute_job(client, rec, job, j) for rec, job, j in tasks]

    additions: dict[str, tuple[list, list]] = {}
    for outcome in outcomes:
        if not outcome.accepted:
            continue
        nodes, edges = additions.setdefault(outcome.commit_id, ([], []))
        nodes.append(outcome.node)
        edges.append(outcome.edge)

    extended = []
    for record in corpus:
        extra = additions.get(record.commit_id)
        if extra is None:
            extended.append(record)
            continue
        new_record = replace(
            record,
            nodes=list(record.nodes) + extra[0],
            edges=list(record.edges) + extra[1],
        )
        cp.validate_record(new_record)
        extended.append(new_record)
    return extended, outcomes
