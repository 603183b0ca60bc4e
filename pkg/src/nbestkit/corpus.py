"""JSONL corpus of N-best hypothesis lists with reference transcriptions.

One entry per line:

    {"id": str, "domain": str?, "hypotheses": [str, ...],
     "reference": str, "scores": [float, ...]?}

The legacy field names "nbest" (for "hypotheses") and "ground_truth"
(for "reference") are accepted on input; output always uses the
canonical names. Hypotheses are deduplicated on their raw strings in
rank order and then truncated to ``max_n``.
"""

from __future__ import annotations

import contextlib
import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

from .alignment import DEFAULT_POLICY, NormalizationPolicy, normalize

DEFAULT_MAX_N = 5
DEFAULT_DOMAIN = "unknown"


class CorpusError(ValueError):
    """A malformed corpus file or entry; the message names the location."""


def dedupe_hypotheses(
    hypotheses: Sequence[str], scores: Sequence[float] | None = None
) -> tuple[tuple[str, ...], tuple[float, ...] | None]:
    """Drop exact duplicate strings, keeping first occurrences in order.

    When scores are given they are filtered in lockstep so each kept
    hypothesis retains the score of its first occurrence.
    """
    seen: set[str] = set()
    kept_h: list[str] = []
    kept_s: list[float] = []
    for i, h in enumerate(hypotheses):
        if h in seen:
            continue
        seen.add(h)
        kept_h.append(h)
        if scores is not None:
            kept_s.append(scores[i])
    return tuple(kept_h), (tuple(kept_s) if scores is not None else None)


@dataclass(frozen=True)
class NBestEntry:
    """One utterance: ranked hypotheses plus the reference transcription."""

    id: str
    hypotheses: tuple[str, ...]
    reference: str
    domain: str = DEFAULT_DOMAIN
    scores: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if not self.id:
            raise ValueError("entry id must be a non-empty string")
        if not self.hypotheses:
            raise ValueError("entry must have at least one hypothesis")
        if len(set(self.hypotheses)) != len(self.hypotheses):
            raise ValueError("hypotheses contain exact duplicates")
        if self.scores is not None:
            if len(self.scores) != len(self.hypotheses):
                raise ValueError(
                    f"scores length {len(self.scores)} != "
                    f"hypotheses length {len(self.hypotheses)}"
                )
            if any(a < b for a, b in zip(self.scores, self.scores[1:])):
                raise ValueError("scores must be non-increasing with rank")

    def __len__(self) -> int:
        return len(self.hypotheses)


@dataclass(frozen=True)
class Corpus:
    """An immutable, validated sequence of entries."""

    entries: tuple[NBestEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[str] = set()
        for e in self.entries:
            if e.id in seen:
                raise ValueError(f"duplicate entry id {e.id!r}")
            seen.add(e.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[NBestEntry]:
        return iter(self.entries)

    @property
    def manifest(self) -> dict[str, int]:
        """Entry counts per domain tag."""
        return dict(Counter(e.domain for e in self.entries))


@dataclass(frozen=True)
class DomainStats:
    pair_count: int
    avg_ref_tokens: float


@dataclass(frozen=True)
class CorpusStats:
    """Pair counts and mean reference length, overall and per domain."""

    pair_count: int
    avg_ref_tokens: float
    domains: dict[str, DomainStats] = field(default_factory=dict)
    is_empty: bool = False


_HYP_KEYS = ("hypotheses", "nbest")
_REF_KEYS = ("reference", "ground_truth")


def _parse_entry(record: Mapping, max_n: int, where: str) -> NBestEntry:
    if not isinstance(record, Mapping):
        raise CorpusError(f"{where}: expected a JSON object, got {type(record).__name__}")
    entry_id = record.get("id")
    if not isinstance(entry_id, str) or not entry_id:
        raise CorpusError(f"{where}: missing or invalid 'id'")

    raw_hyps = None
    for key in _HYP_KEYS:
        if key in record:
            raw_hyps = record[key]
            break
    if raw_hyps is None:
        raise CorpusError(f"{where}: missing 'hypotheses'")
    if not isinstance(raw_hyps, list) or not all(isinstance(h, str) for h in raw_hyps):
        raise CorpusError(f"{where}: 'hypotheses' must be a list of strings")
    if not raw_hyps:
        raise CorpusError(f"{where}: 'hypotheses' is empty")

    reference = None
    for key in _REF_KEYS:
        if key in record:
            reference = record[key]
            break
    if reference is None:
        raise CorpusError(f"{where}: missing 'reference'")
    if not isinstance(reference, str):
        raise CorpusError(f"{where}: 'reference' must be a string")

    domain = record.get("domain", DEFAULT_DOMAIN)
    if not isinstance(domain, str) or not domain:
        raise CorpusError(f"{where}: 'domain' must be a non-empty string")

    scores = record.get("scores")
    if scores is not None:
        if not isinstance(scores, list) or not all(
            isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores
        ):
            raise CorpusError(f"{where}: 'scores' must be a list of numbers")
        if len(scores) != len(raw_hyps):
            raise CorpusError(
                f"{where}: 'scores' length {len(scores)} != hypotheses length {len(raw_hyps)}"
            )

    hyps, kept_scores = dedupe_hypotheses(raw_hyps, scores)
    hyps = hyps[:max_n]
    if kept_scores is not None:
        kept_scores = kept_scores[:max_n]
    try:
        return NBestEntry(
            id=entry_id,
            hypotheses=hyps,
            reference=reference,
            domain=domain,
            scores=kept_scores,
        )
    except ValueError as exc:
        raise CorpusError(f"{where}: {exc}") from None


def load_corpus(path: str | Path, max_n: int = DEFAULT_MAX_N) -> Corpus:
    """Load, validate, dedupe, and truncate a JSONL corpus file.

    Raises :class:`CorpusError` naming the offending line for malformed
    records, duplicate ids, or invariant violations.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    path = Path(path)
    entries: list[NBestEntry] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from None
            entry = _parse_entry(record, max_n, where)
            if entry.id in seen_ids:
                raise CorpusError(f"{where}: duplicate entry id {entry.id!r}")
            seen_ids.add(entry.id)
            entries.append(entry)
    return Corpus(tuple(entries))


@contextlib.contextmanager
def _open_sink(path: str | Path) -> Iterator[TextIO]:
    """Open a file for writing; the path "-" means stdout."""
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def write_corpus(path: str | Path, corpus: Corpus) -> None:
    """Write a corpus in the canonical JSONL schema (stable field order)."""
    with _open_sink(path) as fh:
        for e in corpus.entries:
            record: dict = {
                "id": e.id,
                "domain": e.domain,
                "hypotheses": list(e.hypotheses),
                "reference": e.reference,
            }
            if e.scores is not None:
                record["scores"] = list(e.scores)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def corpus_stats(
    corpus: Corpus, policy: NormalizationPolicy = DEFAULT_POLICY
) -> CorpusStats:
    """Pair count and average normalized reference length, per domain too."""
    if not corpus.entries:
        return CorpusStats(pair_count=0, avg_ref_tokens=0.0, domains={}, is_empty=True)
    counts: Counter[str] = Counter()
    token_sums: Counter[str] = Counter()
    total_tokens = 0
    for e in corpus.entries:
        n_tok = len(normalize(e.reference, policy))
        counts[e.domain] += 1
        token_sums[e.domain] += n_tok
        total_tokens += n_tok
    domains = {
        d: DomainStats(pair_count=counts[d], avg_ref_tokens=token_sums[d] / counts[d])
        for d in sorted(counts)
    }
    return CorpusStats(
        pair_count=len(corpus.entries),
        avg_ref_tokens=total_tokens / len(corpus.entries),
        domains=domains,
    )


PARSE_FAILURE = "<parse-failure>"


@dataclass(frozen=True)
class CorrectionResult:
    """Output of one corrector (rover, rescore, or llm:{model}) for one entry.

    ``corrected`` is the proposed transcription; when parsing the model
    response failed, ``failed`` is set and ``corrected`` holds the
    explicit :data:`PARSE_FAILURE` marker. The raw endpoint response is
    retained for audit when available.
    """

    id: str
    corrected: str
    corrector: str
    cached: bool = False
    failed: bool = False
    raw_response: str | None = None

    def __post_init__(self) -> None:
        if not self.failed and not self.corrected:
            raise ValueError(f"entry {self.id!r}: empty correction without failure marker")

    def to_record(self) -> dict:
        record: dict = {
            "id": self.id,
            "corrected": self.corrected,
            "corrector": self.corrector,
            "cached": self.cached,
            "failed": self.failed,
        }
        if self.raw_response is not None:
            record["raw_response"] = self.raw_response
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "CorrectionResult":
        return cls(
            id=record["id"],
            corrected=record["corrected"],
            corrector=record["corrector"],
            cached=bool(record.get("cached", False)),
            failed=bool(record.get("failed", False)),
            raw_response=record.get("raw_response"),
        )


def write_results(
    path: str | Path, results: Iterable[CorrectionResult | Mapping]
) -> None:
    """Write correction results as JSONL with stable field order."""
    with _open_sink(path) as fh:
        for r in results:
            record = r.to_record() if isinstance(r, CorrectionResult) else dict(r)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_results(path: str | Path) -> list[CorrectionResult]:
    """Read back a correction-result JSONL file."""
    out: list[CorrectionResult] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                out.append(CorrectionResult.from_record(record))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorpusError(f"{Path(path).name}:{lineno}: bad result row ({exc})") from None
    return out
