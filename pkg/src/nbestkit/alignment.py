"""Text normalization and minimum-edit-distance alignment for WER scoring.

The scoring conventions follow the usual sclite behaviour: tokens are
compared after a configurable normalization pass, errors are split into
substitutions, deletions, and insertions from a Levenshtein backtrace,
and corpus-level WER is the ratio of summed errors to summed reference
lengths (never the mean of per-utterance WERs).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Corpus

# Edit-operation codes, in backtrace preference order.
CORRECT = "C"
SUBSTITUTE = "S"
DELETE = "D"
INSERT = "I"

# An edit op is (code, ref_token | None, hyp_token | None).
EditOp = tuple[str, str | None, str | None]


class EmptyReferenceError(ValueError):
    """Raised when WER is requested against an empty reference."""


@dataclass(frozen=True)
class NormalizationPolicy:
    """Controls how raw transcription strings become token sequences.

    lowercase         case-fold before anything else
    strip_punctuation drop non-alphanumeric characters, keeping apostrophes
                      directly followed by a word character ("china's", "'s");
                      a trailing possessive apostrophe ("dogs'") is dropped
    collapse_whitespace
                      treat any whitespace run as a single separator; when
                      off, only literal spaces separate tokens
    apostrophe_split  detach clitics: "china's" -> "china 's"
    char_tokens       emit one token per character (CER-style scoring)
    """

    lowercase: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True
    apostrophe_split: bool = False
    char_tokens: bool = False


DEFAULT_POLICY = NormalizationPolicy()

_APOSTROPHE_SPLIT_RE = re.compile(r"(\w)'")
_NON_TOKEN_RE = re.compile(r"[^\w\s']+")
# An apostrophe survives only when it leads into a word character; that
# keeps clitics ("china's", and "'s" once split off) while making the
# output a fixed point of normalize.
_DETACHED_APOSTROPHE_RE = re.compile(r"'(?!\w)")


def normalize(text: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> list[str]:
    """Apply ``policy`` to ``text`` and return the token sequence.

    Idempotent: normalizing the space-joined output again yields the
    same tokens. Empty input yields an empty sequence.
    """
    if policy.lowercase:
        text = text.lower()
    # Strip before splitting clitics: removing punctuation can butt a
    # word up against an apostrophe, and that pair must see the split
    # pass for the output to be a fixed point.
    if policy.strip_punctuation:
        text = _NON_TOKEN_RE.sub("", text)
        text = _DETACHED_APOSTROPHE_RE.sub("", text)
    if policy.apostrophe_split:
        text = _APOSTROPHE_SPLIT_RE.sub(r"\1 '", text)
    if policy.collapse_whitespace:
        tokens = text.split()
    else:
        tokens = [t for t in text.split(" ") if t]
    if policy.char_tokens:
        tokens = [ch for tok in tokens for ch in tok]
    return tokens


@dataclass
class Alignment:
    """A minimum-edit-distance alignment between two token sequences."""

    ops: list[EditOp]
    correct: int
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int
    hyp_len: int

    @property
    def distance(self) -> int:
        """Total error count S+D+I (the classical edit distance)."""
        return self.substitutions + self.deletions + self.insertions


@dataclass
class WerBreakdown:
    """WER with its error decomposition, for one utterance or a corpus."""

    wer: float
    substitutions: int
    deletions: int
    insertions: int
    correct: int
    ref_len: int
    hyp_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


# The DP stores cost and backpointer in one int: value = cost * 4 + op,
# with op 0=CORRECT, 1=SUBSTITUTE, 2=DELETE, 3=INSERT. Taking the min of
# encoded candidates resolves cost ties toward the lower op code, which
# is exactly the documented preference order.
_OP_BY_CODE = (CORRECT, SUBSTITUTE, DELETE, INSERT)


def align(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Align ``hyp`` to ``ref`` with unit costs and a full backtrace.

    Ties are broken preferring CORRECT, then SUBSTITUTE, then DELETE,
    then INSERT, making the returned op sequence deterministic.
    """
    n = len(ref)
    m = len(hyp)
    width = m + 1
    rows: list[list[int]] = [[0] * width for _ in range(n + 1)]
    top = rows[0]
    for j in range(1, width):
        top[j] = (j << 2) | 3
    for i in range(1, n + 1):
        rows[i][0] = (i << 2) | 2
    for i in range(1, n + 1):
        rtok = ref[i - 1]
        prev = rows[i - 1]
        cur = rows[i]
        for j in range(1, width):
            d = prev[j - 1] >> 2
            if rtok == hyp[j - 1]:
                best = d << 2
            else:
                best = ((d + 1) << 2) | 1
            c = (((prev[j] >> 2) + 1) << 2) | 2
            if c < best:
                best = c
            c = (((cur[j - 1] >> 2) + 1) << 2) | 3
            if c < best:
                best = c
            cur[j] = best

    ops: list[EditOp] = []
    n_c = n_s = n_d = n_i = 0
    i, j = n, m
    while i or j:
        code = rows[i][j] & 3
        if code == 0:
            i -= 1
            j -= 1
            ops.append((CORRECT, ref[i], hyp[j]))
            n_c += 1
        elif code == 1:
            i -= 1
            j -= 1
            ops.append((SUBSTITUTE, ref[i], hyp[j]))
            n_s += 1
        elif code == 2:
            i -= 1
            ops.append((DELETE, ref[i], None))
            n_d += 1
        else:
            j -= 1
            ops.append((INSERT, None, hyp[j]))
            n_i += 1
    ops.reverse()
    return Alignment(ops, n_c, n_s, n_d, n_i, n, m)


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    """Levenshtein distance without the backtrace (two-row DP).

    Cheaper than :func:`align` when only the error total is needed,
    e.g. oracle rank selection over many hypotheses.
    """
    n = len(ref)
    m = len(hyp)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        cur[0] = i
        rtok = ref[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (rtok != hyp[j - 1])
            c = prev[j] + 1
            if c < best:
                best = c
            c = cur[j - 1] + 1
            if c < best:
                best = c
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def wer(ref: Sequence[str], hyp: Sequence[str]) -> WerBreakdown:
    """Score one hypothesis token sequence against a reference.

    Both sequences are assumed to be already normalized. An empty
    reference with a non-empty hypothesis has no defined denominator
    and raises :class:`EmptyReferenceError`; empty versus empty is 0.
    """
    if not ref:
        if hyp:
            raise EmptyReferenceError(
                "reference is empty but hypothesis has tokens; WER undefined"
            )
        return WerBreakdown(0.0, 0, 0, 0, 0, 0, 0)
    a = align(ref, hyp)
    return WerBreakdown(
        wer=a.distance / a.ref_len,
        substitutions=a.substitutions,
        deletions=a.deletions,
        insertions=a.insertions,
        correct=a.correct,
        ref_len=a.ref_len,
        hyp_len=a.hyp_len,
    )


def wer_strings(ref: str, hyp: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> WerBreakdown:
    """Convenience wrapper: normalize both strings, then score."""
    return wer(normalize(ref, policy), normalize(hyp, policy))


def batch_wer(
    corpus: "Corpus",
    policy: NormalizationPolicy = DEFAULT_POLICY,
    hyp_rank: int = 1,
) -> WerBreakdown:
    """Corpus-level WER of the rank-``hyp_rank`` hypotheses.

    Aggregation is sclite-style: summed errors over summed reference
    lengths. Entries with fewer than ``hyp_rank`` hypotheses are scored
    on their deepest available rank so every entry contributes. An
    empty-reference entry (with a non-empty hypothesis) aborts with the
    offending entry id.
    """
    if hyp_rank < 1:
        raise ValueError(f"hyp_rank must be >= 1, got {hyp_rank}")
    tot_s = tot_d = tot_i = tot_c = tot_ref = tot_hyp = 0
    for entry in corpus.entries:
        ref = normalize(entry.reference, policy)
        k = min(hyp_rank, len(entry.hypotheses))
        hyp = normalize(entry.hypotheses[k - 1], policy)
        try:
            b = wer(ref, hyp)
        except EmptyReferenceError as exc:
            raise EmptyReferenceError(f"entry {entry.id!r}: {exc}") from None
        tot_s += b.substitutions
        tot_d += b.deletions
        tot_i += b.insertions
        tot_c += b.correct
        tot_ref += b.ref_len
        tot_hyp += b.hyp_len
    errors = tot_s + tot_d + tot_i
    value = errors / tot_ref if tot_ref else 0.0
    return WerBreakdown(value, tot_s, tot_d, tot_i, tot_c, tot_ref, tot_hyp)
