"""Builds the bundled reference dataset shipped under cmgeval/data/released/.

The dataset is a fixed 15-commit corpus: one model draft per commit, a
planned number of expert edits, and synthetic expansion in both directions
produced by the real pipeline (extend_corpus) against deterministic builder
clients, with every completion recorded to transcript files. Replaying the
transcripts therefore reproduces the corpus bit for bit.

The builder asserts the planned per-commit acceptance counts and prints the
metric-vs-online correlation table so generator knobs can be tuned; once the
numbers land, the artifacts are frozen and committed.

Usage:
  python3 scripts/build_released_dataset.py --probe   # build + report only
  python3 scripts/build_released_dataset.py           # build + write files
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from pathlib import Path

from cmgeval import corpus as cp
from cmgeval import distcheck as dc
from cmgeval import selection as sel
from cmgeval import synthgen as sg
from cmgeval import textmetrics as tm

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "cmgeval" / "data" / "released"

# per commit: (expert edits, backward accepted, forward-from-draft accepted,
#              forward-from-backward accepted)
PLAN = {
    "c01": (12, 63, 1, 40),
    "c02": (11, 12, 1, 35),
    "c03": (11, 12, 1, 35),
    "c04": (1, 2, 14, 31),
    "c05": (1, 2, 13, 31),
    "c06": (1, 2, 13, 31),
    "c07": (1, 2, 13, 31),
    "c08": (1, 2, 13, 31),
    "c09": (1, 2, 13, 30),
    "c10": (4, 1, 16, 5),
    "c11": (3, 1, 16, 5),
    "c12": (3, 1, 16, 5),
    "c13": (3, 1, 16, 4),
    "c14": (3, 1, 15, 4),
    "c15": (1, 0, 16, 0),
}
BACKWARD_JOBS = 6
FORWARD_JOBS = 16

# generator knobs; tuned against the correlation targets, then frozen
KNOBS = {
    "seed": 951031,
    "pad_pool": 6,                    # boilerplate phrases in circulation
    "core_tokens": (60, 90),          # content words per commit
    "draft_target_mean": 601.0,       # chars, model draft (pad loop overshoots)
    "draft_scale_sd": 0.18,
    "draft_corrupt": (1, 4),          # words the draft gets wrong
    "expert_keep": (0.45, 0.70),      # fraction of core chunks an edit keeps
    "expert_chunk": (2, 4),           # tokens per keep-or-drop chunk
    "expert_replace": (1, 4),
    "expert_delete": (0, 3),
    "expert_insert": (0, 2),
    "expert_rotate": 0.6,             # chance an expert restructures the order
    "original_keep": 0.30,            # fraction of core words in the original
    "original_own": (6, 10),
    "gp_mut": (0, 14),                # backward candidate word replacements
    "gp_del": (0, 3),
    "gp_drop": (0.0, 0.0),            # fraction of clauses a draft lost
    "gp_junk": (0.0, 0.34),           # invented detail, relative to length
    "gp_pads": (1, 3),                # boilerplate phrases re-added
    "gp_toward": 0.0,                 # replacements re-add words peers kept
    "gp_reorder": 0.5,                # halves swapped at a random cut
    "fw0_tail_cut": (0.45, 0.75),     # forward from draft: tail fraction cut
    "fw0_scatter": (0.03, 0.20),
    "fw0_mut": (0, 5),
    "fwb_tail_cut": (0.0, 0.75),      # forward from backward nodes (0-biased)
    "fwb_scatter": (0.02, 0.25),
    "fwb_mut": (0, 6),
    "telemetry_rows": 500,
    "telemetry_zero_fraction": 0.78,
    "telemetry_mean_len": 360,
}

VERBS = [
    "add", "fix", "update", "remove", "refactor", "handle", "improve",
    "support", "avoid", "simplify", "extract", "validate", "cache", "rename",
    "restore", "guard", "batch", "merge", "split", "defer",
]
NOUNS = [
    "parser", "cache", "index", "query", "handler", "timeout", "retry",
    "logging", "config", "session", "worker", "queue", "schema", "migration",
    "endpoint", "token", "buffer", "stream", "socket", "thread", "lock",
    "cursor", "batch", "payload", "router", "metrics", "snapshot", "replica",
    "shard", "backoff", "checksum", "manifest", "registry", "watcher",
    "resolver", "planner", "decoder", "encoder", "lexer", "formatter",
]
MODIFIERS = [
    "stale", "incremental", "async", "nested", "duplicate", "invalid",
    "missing", "broken", "legacy", "internal", "partial", "lazy", "eager",
    "transient", "orphaned", "truncated", "malformed", "concurrent",
    "redundant", "implicit",
]
FILLER = [
    "when", "the", "for", "during", "after", "before", "under", "into",
    "across", "between", "without", "against", "within",
]
PAD_PHRASES = [
    "This change keeps behavior consistent across all supported platforms.",
    "No functional changes are intended for unrelated modules.",
    "Existing callers continue to work without modification.",
    "The public interface of the module remains unchanged.",
    "Additional test coverage accompanies this change.",
    "Error messages now include enough context for debugging.",
]
REPLACEMENT_VOCAB = VERBS + NOUNS + MODIFIERS


def _rng(*parts) -> random.Random:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def corrupt_tokens(tokens, n_replace, n_delete, n_insert, rng):
    toks = list(tokens)
    for _ in range(min(n_replace, len(toks))):
        i = rng.randrange(len(toks))
        toks[i] = rng.choice(REPLACEMENT_VOCAB)
    for _ in range(n_delete):
        if len(toks) <= 4:
            break
        del toks[rng.randrange(len(toks))]
    for _ in range(n_insert):
        toks.insert(rng.randrange(len(toks) + 1), rng.choice(REPLACEMENT_VOCAB))
    return toks


def make_core(cid: str):
    rng = _rng(KNOBS["seed"], cid, "core")
    n = rng.randint(*KNOBS["core_tokens"])
    toks = [
        rng.choice(VERBS),
        rng.choice(MODIFIERS),
        rng.choice(NOUNS),
        "in",
        rng.choice(NOUNS),
    ]
    while len(toks) < n:
        kind = rng.random()
        if kind < 0.45:
            toks.append(rng.choice(NOUNS))
        elif kind < 0.65:
            toks.append(rng.choice(VERBS))
        elif kind < 0.8:
            toks.append(rng.choice(MODIFIERS))
        else:
            toks.append(rng.choice(FILLER))
    return toks


def make_draft(cid: str, core):
    """Model draft: corrupted core plus boilerplate up to a length target."""
    rng = _rng(KNOBS["seed"], cid, "draft")
    scale = max(0.8, min(1.25, rng.gauss(1.0, KNOBS["draft_scale_sd"])))
    target = KNOBS["draft_target_mean"] * scale
    toks = corrupt_tokens(core, rng.randint(*KNOBS["draft_corrupt"]), 0, 0, rng)
    text = " ".join(toks)
    pads = []
    while len(text) + sum(len(p) + 1 for p in pads) < target:
        pads.append(rng.choice(PAD_PHRASES[:KNOBS["pad_pool"]]))
    return " ".join([text] + pads)


def make_expert(cid: str, core, idx: int):
    """Expert edit: keeps a sample of the core clauses, lightly reworded."""
    rng = _rng(KNOBS["seed"], cid, "expert", idx)
    chunks = []
    i = 0
    while i < len(core):
        width = rng.randint(*KNOBS["expert_chunk"])
        chunks.append(core[i:i + width])
        i += width
    keep = rng.uniform(*KNOBS["expert_keep"])
    kept = [c for c in chunks if rng.random() < keep]
    while len(kept) < 3:
        kept = [chunks[rng.randrange(len(chunks))]] + kept
    toks = [t for c in kept for t in c]
    if rng.random() < KNOBS["expert_rotate"]:
        r = rng.randrange(1, len(toks))
        toks = toks[r:] + toks[:r]
    toks = corrupt_tokens(
        toks,
        rng.randint(*KNOBS["expert_replace"]),
        rng.randint(*KNOBS["expert_delete"]),
        rng.randint(*KNOBS["expert_insert"]),
        rng,
    )
    return " ".join(toks)


def make_original(cid: str, core):
    rng = _rng(KNOBS["seed"], cid, "original")
    kept = [t for t in core if rng.random() < KNOBS["original_keep"]]
    own = [rng.choice(REPLACEMENT_VOCAB) for _ in range(rng.randint(*KNOBS["original_own"]))]
    toks = kept + own
    rng.shuffle(toks)
    return " ".join(toks) if toks else "initial import"


def make_diff(cid: str, core):
    rng = _rng(KNOBS["seed"], cid, "diff")
    module = rng.choice(NOUNS)
    lines = [
        f"diff --git a/src/{module}.py b/src/{module}.py",
        f"@@ -{rng.randint(10, 200)},{rng.randint(3, 9)} +{rng.randint(10, 200)},{rng.randint(3, 9)} @@",
    ]
    for _ in range(rng.randint(3, 6)):
        sign = rng.choice("-+")
        lines.append(f"{sign}    {rng.choice(core)} = {rng.choice(NOUNS)}({rng.choice(core)})")
    return "\n".join(lines)


def make_summary(cid: str, core):
    rng = _rng(KNOBS["seed"], cid, "summary")
    return (
        f"The project routes {rng.choice(NOUNS)} traffic through a {rng.choice(MODIFIERS)}"
        f" {rng.choice(NOUNS)} layer. Recent work focuses on {core[0]}ing the"
        f" {rng.choice(core)} path and keeping the {rng.choice(NOUNS)} stable."
    )


def build_base_corpus():
    records = []
    for cid, (n_expert, _, _, _) in PLAN.items():
        core = make_core(cid)
        nodes = [
            cp.MessageNode(f"{cid}.g", cp.KIND_GENERATED, cp.SOURCE_MODEL, make_draft(cid, core))
        ]
        edges = []
        for i in range(1, n_expert + 1):
            nid = f"{cid}.e{i:02d}"
            nodes.append(
                cp.MessageNode(nid, cp.KIND_EDITED, cp.SOURCE_EXPERT, make_expert(cid, core, i))
            )
            edges.append(cp.DerivationEdge(f"{cid}.g", nid, cp.METHOD_HUMAN_EDIT))
        record = cp.CommitRecord(
            commit_id=cid,
            diff=make_diff(cid, core),
            original_message=make_original(cid, core),
            summary=make_summary(cid, core),
            nodes=nodes,
            edges=edges,
        )
        cp.validate_record(record)
        records.append(record)
    return records


def distribute(total: int, slots: int, cap: int):
    """Spread `total` over `slots` with each share <= cap, front-loaded."""
    if total > slots * cap:
        raise ValueError(f"cannot place {total} into {slots} slots of {cap}")
    base = total // slots
    rem = total - base * slots
    shares = [base + (1 if i < rem else 0) for i in range(slots)]
    assert all(s <= cap for s in shares) and sum(shares) == total
    return shares


def backward_accept_plan():
    plan = {}
    for cid, (n_expert, n_backward, _, _) in PLAN.items():
        shares = distribute(n_backward, n_expert, BACKWARD_JOBS)
        for i, share in enumerate(shares, 1):
            plan[f"{cid}.e{i:02d}"] = set(range(1, share + 1))
    return plan


def forward_accept_plan(backward_plan):
    plan = {}
    for cid, (_, _, n_fwd_draft, n_fwd_backward) in PLAN.items():
        plan[f"{cid}.g"] = set(range(1, n_fwd_draft + 1))
        gprime_ids = sorted(
            f"{eid}.bwd{j}"
            for eid, jobs in backward_plan.items()
            if eid.startswith(f"{cid}.")
            for j in jobs
        )
        if not gprime_ids:
            continue
        shares = distribute(n_fwd_backward, len(gprime_ids), FORWARD_JOBS)
        for gid, share in zip(gprime_ids, shares):
            plan[gid] = set(range(1, share + 1))
    return plan


def parse_target(prompt: str) -> str:
    block = prompt.rsplit("\n\n", 1)[1]
    lines = block.split("\n")
    return "\n".join(lines[1:-1])


def make_backward_candidate(e_text: str, node_id: str, job: int, sib_texts) -> str:
    from collections import Counter

    rng = _rng(KNOBS["seed"], "gp", node_id, job)
    toks = e_text.split()
    # a reconstructed draft may have lacked whole clauses the edit added
    drop = rng.uniform(*KNOBS["gp_drop"])
    if drop > 0.0 and len(toks) > 12:
        chunks = []
        i = 0
        while i < len(toks):
            width = rng.randint(2, 5)
            chunks.append(toks[i:i + width])
            i += width
        kept = [c for c in chunks if rng.random() > drop]
        while len(kept) < 3:
            kept = [chunks[rng.randrange(len(chunks))]] + kept
        toks = [t for c in kept for t in c]
    # drift toward one peer edit: swapping in words that peer kept but this
    # edit dropped moves away from e_text without losing word overlap with
    # the rest of the commit's references
    missing = []
    if sib_texts:
        anchor = rng.choice(sib_texts)
        missing = list((Counter(anchor.split()) - Counter(toks)).elements())
    muts = rng.randint(*KNOBS["gp_mut"])
    out = list(toks)
    for _ in range(min(muts, len(out))):
        i = rng.randrange(len(out))
        if missing and rng.random() < KNOBS["gp_toward"]:
            out[i] = missing.pop(rng.randrange(len(missing)))
        else:
            out[i] = rng.choice(REPLACEMENT_VOCAB)
    out = corrupt_tokens(out, 0, rng.randint(*KNOBS["gp_del"]), 0, rng)
    # invented specifics no reference mentions
    junk_budget = round(rng.uniform(*KNOBS["gp_junk"]) * len(out))
    while junk_budget > 0:
        run = [rng.choice(REPLACEMENT_VOCAB + FILLER) for _ in range(min(junk_budget, rng.randint(2, 4)))]
        pos = rng.randrange(len(out) + 1)
        out[pos:pos] = run
        junk_budget -= len(run)
    # clause order often differs from the edited message entirely
    if len(out) > 10 and rng.random() < KNOBS["gp_reorder"]:
        cut = rng.randint(int(0.2 * len(out)), int(0.45 * len(out)))
        out = out[cut:] + out[:cut]
    pads = [rng.choice(PAD_PHRASES[:KNOBS["pad_pool"]]) for _ in range(rng.randint(*KNOBS["gp_pads"]))]
    while True:
        candidate = " ".join(out + [w for p in pads for w in p.split()])
        if sg.added_fraction(e_text, candidate) <= 0.45 or not pads:
            break
        pads.pop()
    if sg.added_fraction(e_text, candidate) > 0.45:
        candidate = " ".join(out)
    if sg.added_fraction(e_text, candidate) > 0.45:
        candidate = e_text
    return candidate


def make_forward_candidate(src_text: str, node_id: str, job: int) -> str:
    from_backward = ".bwd" in node_id
    prefix = "fwb" if from_backward else "fw0"
    rng = _rng(KNOBS["seed"], "fw", node_id, job)
    toks = src_text.split()
    for bump in (0.0, 0.1, 0.2, 0.3):
        tail_lo, tail_hi = KNOBS[f"{prefix}_tail_cut"]
        draw = rng.random()
        if from_backward:
            draw *= draw  # bias toward keeping the whole message
        tail_cut = max(0.0, tail_lo + (tail_hi - tail_lo) * draw - bump)
        keep_until = max(5, int(len(toks) * (1.0 - tail_cut)))
        kept = toks[:keep_until]
        scatter = rng.uniform(*KNOBS[f"{prefix}_scatter"])
        kept = [t for t in kept if rng.random() > scatter or len(kept) <= 5]
        kept = corrupt_tokens(kept, rng.randint(*KNOBS[f"{prefix}_mut"]), 0, 0, rng)
        candidate = " ".join(kept)
        if candidate and sg.removed_fraction(src_text, candidate) <= 0.70:
            return candidate
    return src_text


class BuilderClient:
    """Deterministic stand-in for the live model.

    Accept/reject per (node, job) follows the frozen plan; all text choices
    hash off (seed, node, job), so replay order does not matter.
    """

    def __init__(self, direction: str, accept_plan: dict, expert_texts: dict | None = None):
        self.direction = direction
        self.accept_plan = accept_plan
        self.expert_texts = expert_texts or {}

    def _sibling_texts(self, node_id: str):
        commit_id = node_id.split(".")[0]
        return [
            text
            for nid, text in sorted(self.expert_texts.get(commit_id, {}).items())
            if nid != node_id
        ]

    def _accept_attempt(self, node_id: str, job: int) -> int:
        jobs = self.accept_plan.get(node_id, set())
        if job not in jobs:
            return 0  # never accepted
        spread = _rng(KNOBS["seed"], "attempt", node_id, job).random()
        return 2 if spread < 0.2 else 1

    def complete(self, prompt: str, meta: dict | None = None) -> str:
        node_id = meta["input_node"]
        job = meta["job"]
        attempt = meta["attempt"]
        target = parse_target(prompt)
        when = self._accept_attempt(node_id, job)
        if attempt != when:
            if self.direction == sg.DIRECTION_BACKWARD:
                rng = _rng(KNOBS["seed"], "rej", node_id, job, attempt)
                extra = [rng.choice(REPLACEMENT_VOCAB) for _ in range(3 * len(target.split()) + 20)]
                return target + " " + " ".join(extra)
            return "wip"
        if self.direction == sg.DIRECTION_BACKWARD:
            return make_backward_candidate(target, node_id, job, self._sibling_texts(node_id))
        return make_forward_candidate(target, node_id, job)


def build_telemetry(corpus):
    rng = _rng(KNOBS["seed"], "telemetry")
    ed_values = dc.corpus_ed_values(corpus)
    rows = []
    n = KNOBS["telemetry_rows"]
    n_zero = round(n * KNOBS["telemetry_zero_fraction"])
    mean_len = KNOBS["telemetry_mean_len"]

    def gen_len():
        return max(140, int(rng.gauss(mean_len, 55)))

    lengths = [gen_len() for _ in range(n - n_zero)]
    # pin the retained-row mean length exactly
    target_sum = mean_len * (n - n_zero)
    for i in range(len(lengths)):
        need = target_sum - sum(lengths)
        if need == 0:
            break
        lengths[i] = max(140, lengths[i] + need)
    assert sum(lengths) == target_sum

    scale = dc.mean_generated_length(corpus) / mean_len
    for length in lengths:
        ed = max(1, round(rng.choice(ed_values) / scale + rng.gauss(0, 6)))
        rows.append((ed, length))
    for _ in range(n_zero):
        rows.append((0, gen_len()))
    rng.shuffle(rows)
    return dc.make_log(rows)


def build_all(write: bool):
    base = build_base_corpus()
    bwd_plan = backward_accept_plan()
    fwd_plan = forward_accept_plan(bwd_plan)

    expert_texts = {
        r.commit_id: {n.node_id: n.text for n in r.edited_nodes() if n.source == cp.SOURCE_EXPERT}
        for r in base
    }
    bwd_client = BuilderClient(sg.DIRECTION_BACKWARD, bwd_plan, expert_texts)
    fwd_client = BuilderClient(sg.DIRECTION_FORWARD, fwd_plan)
    if write:
        OUT_DIR.mkdir(parents=True, exist_ok=True)
        bwd_client = sg.TranscriptRecorder(bwd_client, OUT_DIR / "transcripts_backward.jsonl")
        fwd_client = sg.TranscriptRecorder(fwd_client, OUT_DIR / "transcripts_forward.jsonl")

    mid, bwd_outcomes = sg.extend_corpus(
        base, bwd_client, sg.DIRECTION_BACKWARD,
        jobs_per_node=BACKWARD_JOBS, seed=KNOBS["seed"],
    )
    full, fwd_outcomes = sg.extend_corpus(
        mid, fwd_client, sg.DIRECTION_FORWARD,
        jobs_per_node=FORWARD_JOBS, seed=KNOBS["seed"],
    )

    # planned counts must be exact
    by_commit_b = {}
    for o in bwd_outcomes:
        if o.accepted:
            by_commit_b[o.commit_id] = by_commit_b.get(o.commit_id, 0) + 1
    for cid, (_, want_b, _, _) in PLAN.items():
        got = by_commit_b.get(cid, 0)
        assert got == want_b, f"{cid}: backward accepted {got}, planned {want_b}"
    by_commit_f = {}
    for o in fwd_outcomes:
        if o.accepted:
            kind = "h" if ".bwd" in o.job.input_node else "f"
            key = (o.commit_id, kind)
            by_commit_f[key] = by_commit_f.get(key, 0) + 1
    for cid, (_, _, want_f, want_h) in PLAN.items():
        got_f = by_commit_f.get((cid, "f"), 0)
        got_h = by_commit_f.get((cid, "h"), 0)
        assert got_f == want_f, f"{cid}: forward-from-draft {got_f}, planned {want_f}"
        assert got_h == want_h, f"{cid}: forward-from-backward {got_h}, planned {want_h}"

    telemetry = build_telemetry(full)
    if write:
        cp.save_corpus(full, OUT_DIR / "corpus.jsonl")
        dc.save_telemetry(telemetry, OUT_DIR / "telemetry.csv")
        # everything a replay run needs to reproduce corpus.jsonl bit for bit
        config = {
            "seed": KNOBS["seed"],
            "backward_jobs_per_node": BACKWARD_JOBS,
            "forward_jobs_per_node": FORWARD_JOBS,
            "attempts": sg.DEFAULT_ATTEMPTS,
            "icl_count": sg.DEFAULT_ICL_COUNT,
            "backward_threshold": sg.DEFAULT_BACKWARD_THRESHOLD,
            "forward_threshold": sg.DEFAULT_FORWARD_THRESHOLD,
        }
        (OUT_DIR / "build_config.json").write_text(
            json.dumps(config, indent=2, sort_keys=True) + "\n"
        )
    return full, telemetry


def evaluate(corpus, telemetry):
    rows = cp.dataset_summary(corpus)
    summary = {r["source"]: r for r in rows}
    pairs = [cp.derive_pairs(r) for r in corpus]
    online = sel.online_scores(corpus, pairs)

    from cmgeval.stats import spearman

    report = {}
    for metric in tm.default_metrics():
        if metric.name == "embedding-score":
            continue
        offline = sel.offline_scores(corpus, pairs, metric)
        keys = sorted(set(online.values) & set(offline.values))
        res = spearman(
            [offline.values[k] for k in keys], [online.values[k] for k in keys]
        )
        report[metric.name] = res

    g_lengths = [
        len(n.text) for r in corpus for n in r.generated_nodes() if n.source == cp.SOURCE_MODEL
    ]
    e_lengths = [
        len(n.text) for r in corpus for n in r.edited_nodes() if n.source == cp.SOURCE_EXPERT
    ]
    o_lengths = [len(r.original_message) for r in corpus]

    expert_eds = []
    for record in corpus:
        nodes = record.node_map()
        for edge in record.edges:
            if edge.method == cp.METHOD_HUMAN_EDIT and nodes[edge.from_node].source == cp.SOURCE_MODEL:
                from cmgeval.kernels import levenshtein

                expert_eds.append(levenshtein(nodes[edge.from_node].text, nodes[edge.to_node].text))

    filtered, zero_rep = dc.filter_zero(telemetry)
    factor = dc.scale_factor(corpus, filtered)

    return {
        "summary": summary,
        "q": report,
        "mean_g": sum(g_lengths) / len(g_lengths),
        "mean_e": sum(e_lengths) / len(e_lengths),
        "mean_o": sum(o_lengths) / len(o_lengths),
        "expert_ed_mean": sum(expert_eds) / len(expert_eds),
        "expert_eds": sorted(expert_eds),
        "zero_fraction": zero_rep["removed_fraction"],
        "scale_factor": factor,
    }


TARGETS = {
    "edit-distance": (0.74, 0.05),
    "edit-similarity": (-0.36, 0.05),
    "rouge-1": (-0.19, 0.08),
    "rouge-2": (-0.20, 0.08),
    "rouge-l": (-0.26, 0.08),
    "bleu": (-0.17, None),
    "chrf": (0.05, None),
    "meteor": (0.04, None),
}


def debug_blocks(corpus):
    """Within-block correlation of offline metric scores vs the online signal."""
    from cmgeval.stats import spearman

    pairs = [cp.derive_pairs(r) for r in corpus]
    online = sel.online_scores(corpus, pairs)
    is_draft = {}
    for record in corpus:
        for node in record.generated_nodes():
            is_draft[(record.commit_id, node.node_id)] = node.source == cp.SOURCE_MODEL

    print("block decomposition (draft block 15, backward block 104):")
    for metric in tm.default_metrics():
        if metric.name == "embedding-score":
            continue
        offline = sel.offline_scores(corpus, pairs, metric)
        keys = sorted(set(online.values) & set(offline.values))
        parts = {}
        for block, flag in (("draft", True), ("backward", False)):
            sub = [k for k in keys if is_draft[k] == flag]
            x = [offline.values[k] for k in sub]
            y = [online.values[k] for k in sub]
            try:
                parts[block] = spearman(x, y).coefficient
            except Exception:
                parts[block] = float("nan")
        onl_d = sorted(online.values[k] for k in keys if is_draft[k])
        onl_b = sorted(online.values[k] for k in keys if not is_draft[k])
        off_d = sorted(offline.values[k] for k in keys if is_draft[k])
        off_b = sorted(offline.values[k] for k in keys if not is_draft[k])
        print(
            f"  {metric.name:<16} within draft {parts['draft']:+.3f}"
            f" backward {parts['backward']:+.3f}"
            f"  offline med draft {off_d[len(off_d) // 2]:.3f}"
            f" bwd {off_b[len(off_b) // 2]:.3f}"
            f"  online med draft {onl_d[len(onl_d) // 2]:.0f}"
            f" bwd {onl_b[len(onl_b) // 2]:.0f}"
        )


SEARCH_ORDER = (
    "edit-distance", "edit-similarity", "rouge-1", "rouge-l",
    "rouge-2", "bleu", "chrf", "meteor",
)


def staged_eval():
    """Evaluate windows metric by metric, bailing on the first miss."""
    from cmgeval.stats import spearman

    corpus, _ = build_all(write=False)
    pairs = [cp.derive_pairs(r) for r in corpus]
    online = sel.online_scores(corpus, pairs)
    registry = {m.name: m for m in tm.default_metrics()}
    results = {}
    loss = 0.0
    for name in SEARCH_ORDER:
        offline = sel.offline_scores(corpus, pairs, registry[name])
        keys = sorted(set(online.values) & set(offline.values))
        q = spearman(
            [offline.values[k] for k in keys], [online.values[k] for k in keys]
        ).coefficient
        results[name] = q
        target, tol = TARGETS[name]
        if tol is None:
            miss = max(0.0, abs(q) - 0.30)
            loss += max(0.0, abs(q) - 0.24) ** 2
        else:
            miss = max(0.0, abs(q - target) - tol)
            loss += max(0.0, abs(q - target) - 0.6 * tol) ** 2
        if miss > 0.0:
            return results, name, loss + miss + 0.25 * (len(SEARCH_ORDER) - len(results))
    return results, None, loss


def sample_config(rng):
    return {
        "seed": rng.randrange(10**6),
        "expert_keep": rng.choice([(0.40, 0.65), (0.45, 0.70), (0.50, 0.75)]),
        "expert_chunk": rng.choice([(2, 4), (2, 5), (3, 6)]),
        "expert_rotate": rng.choice([0.6, 0.85, 1.0]),
        "gp_mut": (0, rng.choice([8, 10, 12, 14])),
        "gp_del": (0, rng.choice([3, 5])),
        "gp_junk": (rng.choice([0.0, 0.1]), rng.choice([0.18, 0.22, 0.28, 0.34])),
        "gp_pads": rng.choice([(0, 2), (1, 3)]),
        "gp_toward": rng.choice([0.0, 0.1, 0.2]),
        "gp_reorder": rng.choice([0.5, 0.7, 0.9]),
        "fwb_tail_cut": (0.0, rng.choice([0.45, 0.65, 0.75])),
        "fwb_scatter": (0.02, rng.choice([0.15, 0.25])),
    }


def run_search(trials: int, search_seed: int, log_path: Path):
    rng = random.Random(search_seed)
    base_knobs = dict(KNOBS)
    best = None
    with log_path.open("a") as log:
        for trial in range(trials):
            config = sample_config(rng)
            KNOBS.clear()
            KNOBS.update(base_knobs)
            KNOBS.update(config)
            results, failed_at, loss = staged_eval()
            row = {
                "trial": trial,
                "loss": round(loss, 5),
                "failed_at": failed_at,
                "q": {k: round(v, 4) for k, v in results.items()},
                "config": {k: config[k] for k in sorted(config)},
            }
            log.write(json.dumps(row) + "\n")
            log.flush()
            if best is None or loss < best[0]:
                best = (loss, row)
                print(f"trial {trial}: loss {loss:.4f} failed_at {failed_at} q {row['q']}")
            if failed_at is None:
                print(f"trial {trial}: ALL WINDOWS PASS {json.dumps(row)}")
    KNOBS.clear()
    KNOBS.update(base_knobs)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--probe", action="store_true", help="report only, no files")
    parser.add_argument("--debug", action="store_true", help="print block decomposition")
    parser.add_argument("--search", type=int, default=0, help="run N search trials")
    parser.add_argument("--search-seed", type=int, default=1)
    parser.add_argument("--search-log", default="/tmp/dataset_search.jsonl")
    args = parser.parse_args(argv)

    if args.search:
        best = run_search(args.search, args.search_seed, Path(args.search_log))
        print("best:", json.dumps(best[1]) if best else "none")
        return 0

    corpus, telemetry = build_all(write=not args.probe)
    stats = evaluate(corpus, telemetry)
    if args.debug:
        debug_blocks(corpus)

    s = stats["summary"]
    print("pair counts:")
    for name in ("expert", "synthetic-backward", "synthetic-forward-from-model",
                 "synthetic-forward-from-backward", "full"):
        r = s[name]
        print(
            f"  {name:<34} commits {r['commits']:>2} related {r['related']:>4}"
            f" independent {r['independent']:>5}"
        )
    print(
        f"lengths: draft {stats['mean_g']:.1f} expert {stats['mean_e']:.1f}"
        f" original {stats['mean_o']:.1f}"
    )
    print(
        f"expert ED mean {stats['expert_ed_mean']:.1f}"
        f" min {stats['expert_eds'][0]} max {stats['expert_eds'][-1]}"
    )
    print(
        f"telemetry zero fraction {stats['zero_fraction']:.3f}"
        f" scale factor {stats['scale_factor']:.4f}"
    )
    print("correlations:")
    all_ok = True
    for name, (target, tol) in TARGETS.items():
        got = stats["q"][name]
        if tol is None:
            ok = abs(got.coefficient) < 0.3
            window = "|q| < 0.30"
        else:
            ok = abs(got.coefficient - target) <= tol
            window = f"{target:+.2f} +/- {tol:.2f}"
        all_ok &= ok
        print(
            f"  {name:<16} q {got.coefficient:+.3f} p {got.p_value:.4f}"
            f"  target {window:<16} {'ok' if ok else 'MISS'}"
        )
    print("ALL TARGETS MET" if all_ok else "targets missed")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
