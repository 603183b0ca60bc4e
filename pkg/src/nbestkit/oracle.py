"""Oracle WER bounds over N-best lists.

Two families of bound:

* ``oracle_nbest`` picks the best list member; the ceiling for any
  re-ranking method.
* ``oracle_vocabulary`` / ``oracle_lattice`` compose a transcription
  from tokens occurring in the list; ceilings for list-constrained
  correction. The vocabulary variant ignores token order (a reference
  token is an error only if it appears nowhere in the list); the
  lattice variant respects order by minimizing WER over all confusion-
  network paths.
"""

from __future__ import annotations

from dataclasses import dataclass

from .alignment import (
    DEFAULT_POLICY,
    EmptyReferenceError,
    NormalizationPolicy,
    edit_distance,
    normalize,
)
from .confnet import ConfusionNetwork, build_cn
from .corpus import Corpus, NBestEntry


def _require_reference(entry: NBestEntry, ref: list[str]) -> None:
    if not ref:
        raise EmptyReferenceError(
            f"entry {entry.id!r}: reference normalizes to zero tokens"
        )


def _nbest_errors(
    entry: NBestEntry, policy: NormalizationPolicy
) -> tuple[int, int, int]:
    """(min error count, 1-based rank achieving it, ref token count)."""
    ref = normalize(entry.reference, policy)
    _require_reference(entry, ref)
    best_errors: int | None = None
    best_rank = 1
    for k, hyp in enumerate(entry.hypotheses, start=1):
        d = edit_distance(ref, normalize(hyp, policy))
        if best_errors is None or d < best_errors:
            best_errors = d
            best_rank = k
            if d == 0:
                break
    assert best_errors is not None
    return best_errors, best_rank, len(ref)


def _vocabulary_missing(
    entry: NBestEntry, policy: NormalizationPolicy
) -> tuple[int, int]:
    """(count of reference positions absent from the union vocabulary, ref len)."""
    ref = normalize(entry.reference, policy)
    _require_reference(entry, ref)
    union: set[str] = set()
    for hyp in entry.hypotheses:
        union.update(normalize(hyp, policy))
    missing = sum(1 for tok in ref if tok not in union)
    return missing, len(ref)


def lattice_errors(cn: ConfusionNetwork, ref: list[str]) -> int:
    """Minimum edit distance between ``ref`` and any path through ``cn``.

    DP over (slot, reference position); each slot either emits one of
    its tokens (matched, substituted, or inserted against the
    reference) or, via an epsilon arc, nothing.
    """
    r = len(ref)
    row = list(range(r + 1))
    for slot_index, slot in enumerate(cn.slots):
        tokens = cn.slot_tokens(slot_index)
        has_eps = any(a.token is None for a in slot)
        skip = 0 if has_eps else 1
        new = [0] * (r + 1)
        new[0] = row[0] + skip
        for i in range(1, r + 1):
            best = row[i] + skip
            c = new[i - 1] + 1
            if c < best:
                best = c
            c = row[i - 1] + (0 if ref[i - 1] in tokens else 1)
            if c < best:
                best = c
            new[i] = best
        row = new
    return row[r]


def _lattice_errors_entry(
    entry: NBestEntry, policy: NormalizationPolicy
) -> tuple[int, int]:
    ref = normalize(entry.reference, policy)
    _require_reference(entry, ref)
    cn = build_cn(entry, policy)
    return lattice_errors(cn, ref), len(ref)


def oracle_nbest(
    entry: NBestEntry, policy: NormalizationPolicy = DEFAULT_POLICY
) -> tuple[float, int]:
    """Best achievable WER by selecting one hypothesis, and its rank.

    Ties resolve to the smallest rank.
    """
    errors, rank, ref_len = _nbest_errors(entry, policy)
    return errors / ref_len, rank


def oracle_vocabulary(
    entry: NBestEntry, policy: NormalizationPolicy = DEFAULT_POLICY
) -> float:
    """Fraction of reference tokens absent from the list's union vocabulary.

    This is the order-free compositional bound: a freely reordered
    sequence built from list tokens leaves exactly the missing
    positions as errors.
    """
    missing, ref_len = _vocabulary_missing(entry, policy)
    return missing / ref_len


def oracle_lattice(
    entry: NBestEntry, policy: NormalizationPolicy = DEFAULT_POLICY
) -> float:
    """Minimum WER over all confusion-network paths (order-respecting bound)."""
    errors, ref_len = _lattice_errors_entry(entry, policy)
    return errors / ref_len


@dataclass(frozen=True)
class OracleEntryRow:
    """Per-entry oracle error counts; fractions need ref_len as denominator."""

    id: str
    ref_len: int
    rank1_errors: int
    nbest_errors: int | None = None
    nbest_rank: int | None = None
    vocab_missing: int | None = None
    lattice_errors: int | None = None


@dataclass(frozen=True)
class OracleAggregate:
    """Corpus-level oracle values: summed errors over summed ref lengths."""

    entry_count: int
    ref_len: int
    rank1_wer: float
    nbest_wer: float | None = None
    vocab_wer: float | None = None
    lattice_wer: float | None = None


@dataclass(frozen=True)
class OracleReport:
    rows: tuple[OracleEntryRow, ...]
    aggregate: OracleAggregate
    variant: str


VARIANTS = ("vocab", "lattice", "both")


def oracle_report(
    corpus: Corpus,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    variant: str = "both",
) -> OracleReport:
    """Per-entry oracle rows plus the sclite-style corpus aggregate.

    ``variant`` selects which compositional bounds are computed; the
    n-best oracle and the rank-1 baseline are always included.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    want_vocab = variant in ("vocab", "both")
    want_lattice = variant in ("lattice", "both")

    rows: list[OracleEntryRow] = []
    tot_ref = tot_rank1 = tot_nbest = tot_vocab = tot_lattice = 0
    for entry in corpus.entries:
        ref = normalize(entry.reference, policy)
        _require_reference(entry, ref)
        rank1 = edit_distance(ref, normalize(entry.hypotheses[0], policy))
        nbest, rank, ref_len = _nbest_errors(entry, policy)
        vocab = _vocabulary_missing(entry, policy)[0] if want_vocab else None
        lattice = _lattice_errors_entry(entry, policy)[0] if want_lattice else None
        rows.append(
            OracleEntryRow(
                id=entry.id,
                ref_len=ref_len,
                rank1_errors=rank1,
                nbest_errors=nbest,
                nbest_rank=rank,
                vocab_missing=vocab,
                lattice_errors=lattice,
            )
        )
        tot_ref += ref_len
        tot_rank1 += rank1
        tot_nbest += nbest
        tot_vocab += vocab or 0
        tot_lattice += lattice or 0

    def _ratio(total: int) -> float:
        return total / tot_ref if tot_ref else 0.0

    aggregate = OracleAggregate(
        entry_count=len(rows),
        ref_len=tot_ref,
        rank1_wer=_ratio(tot_rank1),
        nbest_wer=_ratio(tot_nbest),
        vocab_wer=_ratio(tot_vocab) if want_vocab else None,
        lattice_wer=_ratio(tot_lattice) if want_lattice else None,
    )
    return OracleReport(rows=tuple(rows), aggregate=aggregate, variant=variant)
