"""Tools for scoring, analyzing, and correcting ASR n-best lists."""

from .alignment import (
    Alignment,
    EmptyReferenceError,
    NormalizationPolicy,
    WerBreakdown,
    align,
    batch_wer,
    edit_distance,
    normalize,
    wer,
    wer_strings,
)
from .confnet import ConfusionNetwork, VoteConfig, build_cn, rover_vote
from .corpus import (
    Corpus,
    CorpusError,
    CorrectionResult,
    NBestEntry,
    corpus_stats,
    load_corpus,
    read_results,
    write_corpus,
    write_results,
)
from .llm import (
    BatchSettings,
    ConfigError,
    EndpointConfig,
    HttpTransport,
    MockTransport,
    ResponseCache,
    correct_batch,
    load_mock_fixtures,
)
from .ngram import (
    NGramModel,
    WeightedObjectiveConfig,
    perplexity,
    rescore,
    train,
    weighted_nbest_objective,
)
from .oracle import (
    OracleReport,
    lattice_errors,
    oracle_lattice,
    oracle_nbest,
    oracle_report,
    oracle_vocabulary,
)
from .prompts import (
    PromptTemplate,
    format_hypotheses,
    parse_response,
    prompt_template,
    render_prompt,
    select_demos,
)
from .report import (
    OracleDoc,
    ReportError,
    RunReport,
    ScoreDoc,
    ScoreRow,
    build_report,
    read_oracle_tsv,
    read_score_tsv,
    relative_reduction,
    render_oracle_tsv,
    render_score_tsv,
)
from .stats import (
    RankStats,
    case_i_probability,
    case_ii_probability,
    diversity,
    rank_statistics,
    word_frequency,
)

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "BatchSettings",
    "ConfigError",
    "ConfusionNetwork",
    "Corpus",
    "CorpusError",
    "CorrectionResult",
    "EmptyReferenceError",
    "EndpointConfig",
    "HttpTransport",
    "MockTransport",
    "NBestEntry",
    "NGramModel",
    "NormalizationPolicy",
    "OracleDoc",
    "OracleReport",
    "PromptTemplate",
    "RankStats",
    "ReportError",
    "ResponseCache",
    "RunReport",
    "ScoreDoc",
    "ScoreRow",
    "VoteConfig",
    "WerBreakdown",
    "WeightedObjectiveConfig",
    "align",
    "batch_wer",
    "build_cn",
    "build_report",
    "case_i_probability",
    "case_ii_probability",
    "correct_batch",
    "corpus_stats",
    "diversity",
    "edit_distance",
    "format_hypotheses",
    "lattice_errors",
    "load_corpus",
    "load_mock_fixtures",
    "normalize",
    "oracle_lattice",
    "oracle_nbest",
    "oracle_report",
    "oracle_vocabulary",
    "parse_response",
    "perplexity",
    "prompt_template",
    "rank_statistics",
    "read_oracle_tsv",
    "read_results",
    "read_score_tsv",
    "relative_reduction",
    "render_oracle_tsv",
    "render_prompt",
    "render_score_tsv",
    "rescore",
    "rover_vote",
    "select_demos",
    "train",
    "wer",
    "wer_strings",
    "weighted_nbest_objective",
    "word_frequency",
    "write_corpus",
    "write_results",
]
