"""Tools for choosing offline quality metrics for commit message generators.

The package scores candidate reference-based metrics by how well they track
the editing effort observed when humans fix up generated commit messages:

* :mod:`cmgeval.corpus` stores commit records with derivation graphs and
  derives related / conditionally-independent reference pairs.
* :mod:`cmgeval.textmetrics` implements the candidate metrics.
* :mod:`cmgeval.selection` correlates offline metric scores against the
  online editing signal and ranks the metrics.
* :mod:`cmgeval.synthgen` grows a small expert-annotated corpus with
  filtered LLM generations, recording replayable transcripts.
* :mod:`cmgeval.distcheck` compares editing-telemetry distributions against
  a corpus before trusting transferred conclusions.
* :mod:`cmgeval.annotsvc` serves the expert annotation workflow over HTTP.
* :mod:`cmgeval.release` locates the bundled reference dataset.
"""

from .corpus import (
    CommitRecord,
    CorpusError,
    DerivationEdge,
    MessageNode,
    PairSet,
    dataset_summary,
    derive_pairs,
    dumps_record,
    import_external,
    load_corpus,
    save_corpus,
    validate_record,
)
from .distcheck import (
    TelemetryLog,
    TelemetryRecord,
    compare,
    corpus_ed_values,
    filter_zero,
    load_telemetry,
    make_log,
    scale_factor,
    scaled_values,
    two_sample_ks,
)
from .kernels import backend, lcs_length, levenshtein, set_backend
from .release import load_released_corpus, load_released_telemetry, released_path
from .selection import (
    NodeScores,
    SelectionReport,
    correlation_band,
    offline_scores,
    online_scores,
    q_matrix,
    q_metric,
    selection_report,
)
from .porter import stem
from .stats import CorrelationResult, UndefinedCorrelation, spearman
from .synthgen import (
    GenerationJob,
    GenerationOutcome,
    HttpLlmClient,
    LlmError,
    TranscriptRecorder,
    TranscriptReplayClient,
    added_fraction,
    extend_corpus,
    generate_backward,
    generate_forward,
    removed_fraction,
)
from .textmetrics import (
    HIGHER_BETTER,
    LOWER_BETTER,
    METRIC_NAMES,
    HttpEmbeddingProvider,
    MetricDescriptor,
    MetricUnavailable,
    compute,
    default_metrics,
    edit_similarity,
)

__version__ = "0.1.0"

__all__ = [
    "CommitRecord",
    "CorpusError",
    "CorrelationResult",
    "DerivationEdge",
    "GenerationJob",
    "GenerationOutcome",
    "HIGHER_BETTER",
    "HttpEmbeddingProvider",
    "HttpLlmClient",
    "LOWER_BETTER",
    "LlmError",
    "METRIC_NAMES",
    "MessageNode",
    "MetricDescriptor",
    "MetricUnavailable",
    "NodeScores",
    "PairSet",
    "SelectionReport",
    "TelemetryLog",
    "TelemetryRecord",
    "TranscriptRecorder",
    "TranscriptReplayClient",
    "UndefinedCorrelation",
    "added_fraction",
    "backend",
    "compare",
    "compute",
    "correlation_band",
    "corpus_ed_values",
    "dataset_summary",
    "default_metrics",
    "derive_pairs",
    "dumps_record",
    "edit_similarity",
    "extend_corpus",
    "filter_zero",
    "generate_backward",
    "generate_forward",
    "import_external",
    "lcs_length",
    "levenshtein",
    "load_corpus",
    "load_released_corpus",
    "load_released_telemetry",
    "load_telemetry",
    "make_log",
    "offline_scores",
    "online_scores",
    "q_matrix",
    "q_metric",
    "released_path",
    "save_corpus",
    "scale_factor",
    "scaled_values",
    "selection_report",
    "spearman",
    "stem",
    "two_sample_ks",
    "validate_record",
    "__version__",
]
