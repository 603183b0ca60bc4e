"""Corpus analyses of what lower-ranked hypotheses still have to offer.

Two per-rank quantities drive the analysis:

* case (i): how often the rank-k hypothesis outright beats rank 1 on
  WER (strict inequality);
* case (ii): how often a reference token that rank 1 got wrong
  (substituted or deleted) is aligned CORRECT at the same reference
  position by the rank-k hypothesis.

Case (ii) is counted alignment-positionally rather than by bag
membership: the token must be recovered at its own reference position,
otherwise incidental occurrences elsewhere would inflate the count.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .alignment import (
    CORRECT,
    DEFAULT_POLICY,
    INSERT,
    NormalizationPolicy,
    align,
    edit_distance,
    normalize,
)
from .corpus import Corpus, NBestEntry


def _ref_status(ref: Sequence[str], hyp: Sequence[str]) -> list[str]:
    """Per-reference-position op code (CORRECT/SUBSTITUTE/DELETE)."""
    status: list[str] = []
    for op, _, _ in align(ref, hyp).ops:
        if op != INSERT:
            status.append(op)
    return status


@dataclass(frozen=True)
class RankRow:
    rank: int
    p_case_i: float | None
    case_i_support: int
    p_case_ii: float | None
    case_ii_support: int
    skipped: int


@dataclass(frozen=True)
class RankStats:
    """Per-rank case (i)/(ii) probabilities with their denominators."""

    rows: tuple[RankRow, ...]

    def to_tsv(self) -> str:
        lines = ["rank\tp_case_i\tcase_i_support\tp_case_ii\tcase_ii_support\tskipped"]
        for r in self.rows:
            pi = f"{r.p_case_i:.4f}" if r.p_case_i is not None else "NA"
            pii = f"{r.p_case_ii:.4f}" if r.p_case_ii is not None else "NA"
            lines.append(
                f"{r.rank}\t{pi}\t{r.case_i_support}\t{pii}\t{r.case_ii_support}\t{r.skipped}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = [
            {
                "rank": r.rank,
                "p_case_i": r.p_case_i,
                "case_i_support": r.case_i_support,
                "p_case_ii": r.p_case_ii,
                "case_ii_support": r.case_ii_support,
                "skipped": r.skipped,
            }
            for r in self.rows
        ]
        return json.dumps(payload, indent=2) + "\n"


def rank_statistics(
    corpus: Corpus,
    ranks: Iterable[int],
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> RankStats:
    """Compute case (i)/(ii) for each requested rank in one corpus pass.

    Entries with fewer than k hypotheses are skipped for rank k (tallied
    in ``skipped``); entries whose rank-1 alignment has no substitution
    or deletion contribute nothing to the case (ii) denominator.
    """
    wanted = sorted(set(ranks))
    if any(k < 2 for k in wanted):
        raise ValueError("ranks start at 2 (rank 1 is the baseline)")

    counted = Counter()      # rank -> entries with >= k hypotheses
    wins = Counter()         # rank -> case (i) successes
    err_positions = Counter()  # rank -> reference positions wrong at rank 1
    recovered = Counter()    # rank -> those positions CORRECT at rank k
    skipped = Counter()

    for entry in corpus.entries:
        ref = normalize(entry.reference, policy)
        hyp1 = normalize(entry.hypotheses[0], policy)
        if not ref:
            # No reference positions: WER comparisons are undefined.
            for k in wanted:
                skipped[k] += 1
            continue
        d1 = edit_distance(ref, hyp1)
        status1 = _ref_status(ref, hyp1) if d1 else None
        bad_positions = (
            [i for i, s in enumerate(status1) if s != CORRECT] if status1 else []
        )
        for k in wanted:
            if len(entry.hypotheses) < k:
                skipped[k] += 1
                continue
            hyp_k = normalize(entry.hypotheses[k - 1], policy)
            counted[k] += 1
            if edit_distance(ref, hyp_k) < d1:
                wins[k] += 1
            if bad_positions:
                status_k = _ref_status(ref, hyp_k)
                err_positions[k] += len(bad_positions)
                recovered[k] += sum(1 for i in bad_positions if status_k[i] == CORRECT)

    rows = []
    for k in wanted:
        rows.append(
            RankRow(
                rank=k,
                p_case_i=(wins[k] / counted[k]) if counted[k] else None,
                case_i_support=counted[k],
                p_case_ii=(recovered[k] / err_positions[k]) if err_positions[k] else None,
                case_ii_support=err_positions[k],
                skipped=skipped[k],
            )
        )
    return RankStats(rows=tuple(rows))


def case_i_probability(
    corpus: Corpus, k: int, policy: NormalizationPolicy = DEFAULT_POLICY
) -> float:
    """Fraction of entries where the rank-k hypothesis has strictly lower WER."""
    row = rank_statistics(corpus, [k], policy).rows[0]
    if row.p_case_i is None:
        raise ValueError(f"no entries have a rank-{k} hypothesis")
    return row.p_case_i


def case_ii_probability(
    corpus: Corpus, k: int, policy: NormalizationPolicy = DEFAULT_POLICY
) -> float:
    """Fraction of rank-1 error positions recovered by the rank-k hypothesis."""
    row = rank_statistics(corpus, [k], policy).rows[0]
    if row.p_case_ii is None:
        raise ValueError(f"no rank-1 error positions at rank {k}")
    return row.p_case_ii


WORD_FREQUENCY_SIDES = ("references", "hypotheses")


def word_frequency(
    corpus: Corpus,
    side: str = "references",
    top: int = 10,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> list[tuple[str, int]]:
    """Most frequent normalized tokens on one side of the corpus.

    The hypotheses side counts tokens across all ranks. Descending by
    count, ties lexicographic.
    """
    if side not in WORD_FREQUENCY_SIDES:
        raise ValueError(f"side must be one of {WORD_FREQUENCY_SIDES}, got {side!r}")
    counts: Counter[str] = Counter()
    for entry in corpus.entries:
        if side == "references":
            counts.update(normalize(entry.reference, policy))
        else:
            for hyp in entry.hypotheses:
                counts.update(normalize(hyp, policy))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top]


def diversity(
    entry: NBestEntry, policy: NormalizationPolicy = DEFAULT_POLICY
) -> tuple[int, float]:
    """(distinct hypothesis count, mean pairwise normalized edit distance).

    Both are computed on normalized token sequences; the distance for a
    pair is divided by the longer length, and a pair of two empty
    sequences counts as 0. A single-hypothesis entry has diversity 0.
    """
    token_lists = [tuple(normalize(h, policy)) for h in entry.hypotheses]
    distinct = len(set(token_lists))
    n = len(token_lists)
    if n < 2:
        return distinct, 0.0
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            a, b = token_lists[i], token_lists[j]
            longest = max(len(a), len(b))
            total += edit_distance(a, b) / longest if longest else 0.0
            pairs += 1
    return distinct, total / pairs
