import http.server
import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmgeval import corpus as cp
from cmgeval import synthgen as sg

from oracles import lcs_exhaustive


def pair_commit(cid, g_text=None, e_text=None):
    g_text = g_text or f"draft for {cid}"
    e_text = e_text or f"final message for {cid}"
    return cp.CommitRecord(
        commit_id=cid,
        diff=f"diff --git {cid}",
        original_message=f"original {cid}",
        nodes=[
            cp.MessageNode(f"{cid}.g", cp.KIND_GENERATED, cp.SOURCE_MODEL, g_text),
            cp.MessageNode(f"{cid}.e", cp.KIND_EDITED, cp.SOURCE_EXPERT, e_text),
        ],
        edges=[cp.DerivationEdge(f"{cid}.g", f"{cid}.e", cp.METHOD_HUMAN_EDIT)],
    )


class ScriptedClient:
    """Returns canned entries in order; an Exception entry is raised."""

    def __init__(self, entries):
        self.entries = list(entries)
        self.calls = 0

    def complete(self, prompt, meta=None):
        self.calls += 1
        entry = self.entries[min(self.calls - 1, len(self.entries) - 1)]
        if isinstance(entry, Exception):
            raise entry
        return entry


class EchoTargetClient:
    """Parses the trailing target block out of the prompt and echoes it."""

    def __init__(self, transform=None):
        self.transform = transform or (lambda s: s)
        self.calls = 0

    def complete(self, prompt, meta=None):
        self.calls += 1
        block = prompt.rsplit("\n\n", 1)[1]
        lines = block.split("\n")
        return self.transform("\n".join(lines[1:-1]))


# --- content-change fractions ---------------------------------------------


def test_fraction_identity_is_zero():
    assert sg.added_fraction("same text", "same text") == 0.0
    assert sg.removed_fraction("same text", "same text") == 0.0


def test_fraction_degenerate_sides():
    assert sg.added_fraction("", "anything") == 1.0
    assert sg.removed_fraction("anything", "") == 1.0
    with pytest.raises(ValueError):
        sg.added_fraction("x", "")
    with pytest.raises(ValueError):
        sg.removed_fraction("", "x")


def test_fraction_lcs_example():
    assert lcs_exhaustive("fix bug", "fix bug in parser") == 7
    assert sg.added_fraction("fix bug", "fix bug in parser") == 10 / 17
    assert sg.removed_fraction("fix bug in parser", "fix bug") == 10 / 17


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1, max_size=40), st.text(min_size=1, max_size=40))
def test_fraction_duality_and_bounds(a, b):
    added = sg.added_fraction(a, b)
    removed = sg.removed_fraction(b, a)
    assert added == removed
    assert 0.0 <= added <= 1.0


# --- prompts ----------------------------------------------------------------


def test_prompt_without_examples_is_instruction_and_target():
    prompt = sg.build_prompt(sg.DIRECTION_BACKWARD, [], "final text")
    assert "Example" not in prompt
    assert "final text" in prompt
    assert prompt == sg.build_prompt(sg.DIRECTION_BACKWARD, [], "final text")


def test_prompt_numbers_every_example():
    pairs = [(f"g{i}", f"e{i}") for i in range(15)]
    prompt = sg.build_prompt(sg.DIRECTION_FORWARD, pairs, "target", context="ctx")
    assert prompt.count("Example ") == 15
    assert "Example 15:" in prompt
    assert "Commit diff:\nctx" in prompt


def test_prompt_example_order_tracks_direction():
    pair = [("GTEXT", "ETEXT")]
    backward = sg.build_prompt(sg.DIRECTION_BACKWARD, pair, "t")
    forward = sg.build_prompt(sg.DIRECTION_FORWARD, pair, "t")
    assert backward.index("ETEXT") < backward.index("GTEXT")
    assert forward.index("GTEXT") < forward.index("ETEXT")
    with pytest.raises(ValueError):
        sg.build_prompt("sideways", pair, "t")


def test_job_validation():
    with pytest.raises(ValueError):
        sg.GenerationJob("sideways", "n")
    with pytest.raises(ValueError):
        sg.GenerationJob(sg.DIRECTION_BACKWARD, "n", max_attempts=0)
    with pytest.raises(ValueError):
        sg.GenerationJob(sg.DIRECTION_BACKWARD, "n", threshold=1.5)


# --- single-node generation --------------------------------------------------


def test_backward_accepts_echo():
    rec = pair_commit("c1")
    out = sg.generate_backward(EchoTargetClient(), rec, "c1.e", [])
    assert out.accepted
    assert out.node.node_id == "c1.e.bwd1"
    assert out.node.kind == cp.KIND_GENERATED
    assert out.node.source == cp.SOURCE_BACKWARD
    assert out.edge == cp.DerivationEdge("c1.e", "c1.e.bwd1", cp.METHOD_LLM_BACKWARD)
    assert out.fractions == (0.0,)
    assert out.accepted_attempt == 1
    expected_prompt = sg.build_prompt(
        sg.DIRECTION_BACKWARD, [], rec.nodes[1].text, rec.diff
    )
    assert out.prompt_hash == sg.prompt_sha256(expected_prompt)


def test_backward_rejects_heavy_additions():
    rec = pair_commit("c1")
    client = EchoTargetClient(lambda s: s + "Z" * (2 * len(s)))
    out = sg.generate_backward(client, rec, "c1.e", [])
    assert not out.accepted
    assert out.node is None and out.edge is None
    assert client.calls == 3
    assert len(out.fractions) == 3
    assert all(f > 0.5 for f in out.fractions)


def test_forward_accepts_echo_and_rejects_truncation():
    rec = pair_commit("c1", g_text="d" * 200)
    ok = sg.generate_forward(EchoTargetClient(), rec, "c1.g", [])
    assert ok.accepted
    assert ok.node.node_id == "c1.g.fwd1"
    assert ok.node.source == cp.SOURCE_FORWARD
    assert ok.edge.method == cp.METHOD_LLM_FORWARD

    bad = sg.generate_forward(EchoTargetClient(lambda s: s[:1]), rec, "c1.g", [])
    assert not bad.accepted
    assert all(f > 0.75 for f in bad.fractions)


def test_empty_candidate_never_accepted():
    rec = pair_commit("c1")
    out = sg.generate_forward(
        EchoTargetClient(lambda s: ""), rec, "c1.g", [], threshold=1.0
    )
    assert not out.accepted
    assert out.fractions == (1.0, 1.0, 1.0)


def test_threshold_monotonicity():
    rec = pair_commit("c1")
    client = EchoTargetClient(lambda s: s + s[: len(s) // 2])
    frac = sg.added_fraction(
        rec.nodes[1].text, rec.nodes[1].text + rec.nodes[1].text[: len(rec.nodes[1].text) // 2]
    )
    tight = sg.generate_backward(EchoTargetClient(client.transform), rec, "c1.e", [], threshold=frac)
    looser = sg.generate_backward(EchoTargetClient(client.transform), rec, "c1.e", [], threshold=min(1.0, frac + 0.2))
    assert tight.accepted and looser.accepted


def test_attempt_budget_and_late_acceptance():
    rec = pair_commit("c1")
    good = rec.nodes[1].text
    bad = good + "Q" * (3 * len(good))
    client = ScriptedClient([bad, bad, good])
    out = sg.generate_backward(client, rec, "c1.e", [])
    assert out.accepted and out.accepted_attempt == 3
    assert client.calls == 3

    client2 = ScriptedClient([bad, bad, good])
    out2 = sg.generate_backward(client2, rec, "c1.e", [], attempts=2)
    assert not out2.accepted
    assert client2.calls == 2


def test_transport_errors_retry_then_surface():
    rec = pair_commit("c1")
    always = ScriptedClient([sg.LlmError("down")] * 3)
    with pytest.raises(sg.LlmError):
        sg.generate_backward(always, rec, "c1.e", [])
    assert always.calls == 3

    flaky = ScriptedClient([sg.LlmError("blip"), rec.nodes[1].text])
    out = sg.generate_backward(flaky, rec, "c1.e", [])
    assert out.accepted and out.accepted_attempt == 2
    assert out.fractions == (0.0,)


def test_direction_requires_matching_input_kind():
    rec = pair_commit("c1")
    with pytest.raises(ValueError, match="edited"):
        sg.generate_backward(EchoTargetClient(), rec, "c1.g", [])
    with pytest.raises(ValueError, match="generated"):
        sg.generate_forward(EchoTargetClient(), rec, "c1.e", [])


# --- ICL sampling -------------------------------------------------------------


def test_sample_icl_excludes_own_commit_and_is_deterministic():
    corpus = [pair_commit(f"c{i:02d}") for i in range(20)]
    icl = sg.sample_icl(corpus, "c03", "c03.e", 1, count=15, seed=7)
    assert len(icl) == 15
    assert len(set(icl)) == 15
    flat = [t for pair in icl for t in pair]
    assert not any("c03" in t for t in flat)
    assert icl == sg.sample_icl(corpus, "c03", "c03.e", 1, count=15, seed=7)
    assert icl != sg.sample_icl(corpus, "c03", "c03.e", 2, count=15, seed=7)
    assert icl != sg.sample_icl(corpus, "c03", "c03.e", 1, count=15, seed=8)


def test_sample_icl_small_pool_returns_everything():
    corpus = [pair_commit("a"), pair_commit("b"), pair_commit("c")]
    icl = sg.sample_icl(corpus, "a", "a.e", 1, count=15, seed=0)
    assert sorted(icl) == sorted(sg.expert_pairs(corpus, exclude_commit="a"))
    assert len(icl) == 2


def test_expert_pairs_sorted_and_filtered():
    corpus = [pair_commit("b"), pair_commit("a")]
    pairs = sg.expert_pairs(corpus)
    assert pairs == [
        ("draft for a", "final message for a"),
        ("draft for b", "final message for b"),
    ]
    assert sg.expert_pairs(corpus, exclude_commit="a") == pairs[1:]


# --- corpus extension -----------------------------------------------------------


def test_extend_corpus_backward_adds_nodes_per_job():
    corpus = [pair_commit(f"c{i}") for i in range(4)]
    extended, outcomes = sg.extend_corpus(
        corpus, EchoTargetClient(), sg.DIRECTION_BACKWARD, jobs_per_node=2, seed=3
    )
    assert len(outcomes) == 8
    assert all(o.accepted for o in outcomes)
    for rec, orig in zip(extended, corpus):
        ids = {n.node_id for n in rec.nodes}
        assert f"{orig.commit_id}.e.bwd1" in ids
        assert f"{orig.commit_id}.e.bwd2" in ids
        assert len(orig.nodes) == 2  # input untouched
        cp.validate_record(rec)


def test_extend_corpus_forward_targets_generated_sources():
    corpus = [pair_commit(f"c{i}") for i in range(3)]
    backed, _ = sg.extend_corpus(
        corpus, EchoTargetClient(), sg.DIRECTION_BACKWARD, seed=1
    )
    forward, outcomes = sg.extend_corpus(
        backed, EchoTargetClient(), sg.DIRECTION_FORWARD, seed=1
    )
    targets = {o.job.input_node for o in outcomes}
    assert targets == {
        "c0.g", "c1.g", "c2.g", "c0.e.bwd1", "c1.e.bwd1", "c2.e.bwd1",
    }
    for rec in forward:
        cp.validate_record(rec)


def test_extend_corpus_is_deterministic_and_parallel_safe():
    corpus = [pair_commit(f"c{i}") for i in range(5)]
    runs = []
    for workers in (1, 1, 3):
        extended, outcomes = sg.extend_corpus(
            corpus,
            EchoTargetClient(),
            sg.DIRECTION_BACKWARD,
            jobs_per_node=2,
            seed=11,
            parallelism=workers,
        )
        blob = "\n".join(cp.dumps_record(r) for r in extended)
        runs.append((blob, [o.to_json_dict() for o in outcomes]))
    assert runs[0] == runs[1] == runs[2]


def test_extend_corpus_config_errors():
    corpus = [pair_commit("c0")]
    with pytest.raises(ValueError):
        sg.extend_corpus(corpus, EchoTargetClient(), "sideways")
    with pytest.raises(ValueError):
        sg.extend_corpus(corpus, EchoTargetClient(), sg.DIRECTION_BACKWARD, attempts=0)
    with pytest.raises(ValueError):
        sg.extend_corpus(
            corpus, EchoTargetClient(), sg.DIRECTION_BACKWARD, jobs_per_node=0
        )


# --- transcripts ----------------------------------------------------------------


def test_transcript_replay_is_bit_exact(tmp_path):
    corpus = [pair_commit(f"c{i}") for i in range(4)]
    path = tmp_path / "transcript.jsonl"
    recorder = sg.TranscriptRecorder(EchoTargetClient(), path)
    live_corpus, live_out = sg.extend_corpus(
        corpus, recorder, sg.DIRECTION_BACKWARD, jobs_per_node=2, seed=5
    )

    entries = [json.loads(l) for l in path.read_text().splitlines()]
    assert len(entries) == 8
    for entry in entries:
        assert entry["prompt_hash"] == entry["request"]["prompt_sha256"]
        assert entry["request"]["direction"] == "backward"
        assert isinstance(entry["response"], str)

    replay = sg.TranscriptReplayClient(path)
    replay_corpus, replay_out = sg.extend_corpus(
        corpus, replay, sg.DIRECTION_BACKWARD, jobs_per_node=2, seed=5
    )
    assert [cp.dumps_record(r) for r in replay_corpus] == [
        cp.dumps_record(r) for r in live_corpus
    ]
    assert [o.to_json_dict() for o in replay_out] == [
        o.to_json_dict() for o in live_out
    ]
    assert replay.pending() == 0


def test_transcript_replay_rejects_divergence(tmp_path):
    corpus = [pair_commit(f"c{i}") for i in range(3)]
    path = tmp_path / "t.jsonl"
    sg.extend_corpus(
        corpus,
        sg.TranscriptRecorder(EchoTargetClient(), path),
        sg.DIRECTION_BACKWARD,
        seed=5,
    )
    replay = sg.TranscriptReplayClient(path)
    with pytest.raises(sg.LlmError, match="diverged"):
        sg.extend_corpus(corpus, replay, sg.DIRECTION_BACKWARD, seed=6)


def test_transcript_fifo_per_prompt(tmp_path):
    path = tmp_path / "t.jsonl"
    digest = sg.prompt_sha256("the prompt")
    with path.open("w") as fh:
        for response in ("first", "second"):
            fh.write(
                json.dumps(
                    {"prompt_hash": digest, "request": {}, "response": response}
                )
                + "\n"
            )
    replay = sg.TranscriptReplayClient(path)
    assert replay.pending() == 2
    assert replay.complete("the prompt") == "first"
    assert replay.complete("the prompt") == "second"
    with pytest.raises(sg.LlmError):
        replay.complete("the prompt")


# --- HTTP client -----------------------------------------------------------------


class _CompletionHandler(http.server.BaseHTTPRequestHandler):
    seen_auth = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.seen_auth.append(self.headers.get("Authorization"))
        if self.path == "/bad":
            payload = {"nope": True}
        else:
            content = body["messages"][0]["content"].upper()[:12]
            payload = {"choices": [{"message": {"content": content}}]}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def completion_server():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _CompletionHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_http_client_round_trip(completion_server, monkeypatch):
    monkeypatch.setenv("CMGEVAL_LLM_KEY", "sekrit")
    client = sg.HttpLlmClient(completion_server + "/v1", model="m")
    assert client.complete("hello there") == "HELLO THERE"
    assert _CompletionHandler.seen_auth[-1] == "Bearer sekrit"


def test_http_client_error_paths(completion_server, monkeypatch):
    monkeypatch.delenv("CMGEVAL_LLM_KEY", raising=False)
    bad = sg.HttpLlmClient(completion_server + "/bad")
    with pytest.raises(sg.LlmError, match="malformed"):
        bad.complete("x")
    unreachable = sg.HttpLlmClient("http://127.0.0.1:9/v1", timeout=0.5)
    with pytest.raises(sg.LlmError):
        unreachable.complete("x")
