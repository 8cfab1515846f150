"""Access to the reference dataset bundled with the package.

The dataset lives under ``cmgeval/data/released/`` and contains a 15-commit
corpus, the request/response transcripts that regenerate its synthetic nodes,
and an editing-telemetry sample for distribution checks.
"""

from importlib import resources
from pathlib import Path

from .corpus import CommitRecord, load_corpus
from .distcheck import TelemetryLog, load_telemetry

CORPUS_FILE = "corpus.jsonl"
TELEMETRY_FILE = "telemetry.csv"
TRANSCRIPTS_BACKWARD_FILE = "transcripts_backward.jsonl"
TRANSCRIPTS_FORWARD_FILE = "transcripts_forward.jsonl"
BUILD_CONFIG_FILE = "build_config.json"


def released_path(name: str = CORPUS_FILE) -> Path:
    """Filesystem path of one bundled dataset file."""
    root = resources.files("cmgeval") / "data" / "released"
    path = Path(str(root / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled dataset file named {name!r}")
    return path


def load_released_corpus() -> list[CommitRecord]:
    return load_corpus(released_path(CORPUS_FILE))


def load_released_telemetry() -> TelemetryLog:
    return load_telemetry(released_path(TELEMETRY_FILE))
