"""Aggregate persisted score runs into comparison tables.

The report never rescores anything: it consumes the per-entry rows the
``score`` and ``oracle`` commands wrote, re-derives the corpus values
by summing error counts over reference lengths, and renders one row per
(test set, method) as machine TSV or human Markdown. WER columns are
percentages; the Markdown method column carries a signed relative
change, negative when the method reduced WER.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .oracle import OracleReport


class ReportError(ValueError):
    """Inconsistent or malformed report inputs."""


def relative_reduction(baseline: float, method: float) -> float:
    """Percent WER reduction, positive when the method improves.

    Rounded half-away-from-zero to one decimal, matching the published
    table style. The baseline must be positive.
    """
    if baseline <= 0:
        raise ValueError(f"baseline must be > 0, got {baseline}")
    value = (baseline - method) / baseline * 100.0
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ScoreRow:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass(frozen=True)
class ScoreDoc:
    """One scored run: per-entry error rows plus identifying tags."""

    test_set: str
    method: str
    rows: Mapping[str, ScoreRow]

    @property
    def wer(self) -> float:
        total_ref = sum(r.ref_len for r in self.rows.values())
        total_err = sum(r.errors for r in self.rows.values())
        return total_err / total_ref if total_ref else 0.0


_SCORE_MAGIC = "# nbestkit-scores"
_ORACLE_MAGIC = "# nbestkit-oracle"
AGGREGATE_ID = "ALL"


def render_score_tsv(doc: ScoreDoc) -> str:
    out = io.StringIO()
    out.write(f"{_SCORE_MAGIC}\ttest_set={doc.test_set}\tmethod={doc.method}\n")
    out.write("id\twer\tS\tD\tI\tref_len\n")
    tot_s = tot_d = tot_i = tot_ref = 0
    for entry_id, r in doc.rows.items():
        w = r.errors / r.ref_len if r.ref_len else 0.0
        out.write(
            f"{entry_id}\t{w:.6f}\t{r.substitutions}\t{r.deletions}\t{r.insertions}\t{r.ref_len}\n"
        )
        tot_s += r.substitutions
        tot_d += r.deletions
        tot_i += r.insertions
        tot_ref += r.ref_len
    total_err = tot_s + tot_d + tot_i
    agg = total_err / tot_ref if tot_ref else 0.0
    out.write(f"{AGGREGATE_ID}\t{agg:.6f}\t{tot_s}\t{tot_d}\t{tot_i}\t{tot_ref}\n")
    return out.getvalue()


def _parse_tags(header: str, magic: str, path: Path) -> dict[str, str]:
    if not header.startswith(magic):
        raise ReportError(f"{path.name}: not a {magic.lstrip('# ')} file")
    tags: dict[str, str] = {}
    for part in header.strip().split("\t")[1:]:
        key, _, value = part.partition("=")
        tags[key] = value
    return tags


def read_score_tsv(path: str | Path) -> ScoreDoc:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise ReportError(f"{path.name}: truncated score file")
    tags = _parse_tags(lines[0], _SCORE_MAGIC, path)
    rows: dict[str, ScoreRow] = {}
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ReportError(f"{path.name}:{lineno}: expected 6 columns")
        entry_id, _, s, d, i, ref_len = fields
        if entry_id == AGGREGATE_ID:
            continue
        if entry_id in rows:
            raise ReportError(f"{path.name}:{lineno}: duplicate id {entry_id!r}")
        rows[entry_id] = ScoreRow(int(s), int(d), int(i), int(ref_len))
    return ScoreDoc(
        test_set=tags.get("test_set", path.stem),
        method=tags.get("method", path.stem),
        rows=rows,
    )


@dataclass(frozen=True)
class OracleDoc:
    """Corpus-level oracle values re-aggregated from persisted rows."""

    test_set: str
    ids: frozenset[str]
    nbest_wer: float
    vocab_wer: float | None
    lattice_wer: float | None


def render_oracle_tsv(report: OracleReport, test_set: str) -> str:
    out = io.StringIO()
    out.write(f"{_ORACLE_MAGIC}\ttest_set={test_set}\tvariant={report.variant}\n")
    out.write("id\tref_len\trank1_errors\tnbest_errors\tnbest_rank\tvocab_missing\tlattice_errors\n")

    def cell(value: int | None) -> str:
        return "NA" if value is None else str(value)

    for r in report.rows:
        out.write(
            f"{r.id}\t{r.ref_len}\t{r.rank1_errors}\t{cell(r.nbest_errors)}"
            f"\t{cell(r.nbest_rank)}\t{cell(r.vocab_missing)}\t{cell(r.lattice_errors)}\n"
        )
    a = report.aggregate

    def pct(value: float | None) -> str:
        return "NA" if value is None else f"{value * 100:.2f}"

    out.write(
        f"{AGGREGATE_ID}\t{a.ref_len}\trank1_wer={pct(a.rank1_wer)}"
        f"\tnbest_wer={pct(a.nbest_wer)}\t-\tvocab_wer={pct(a.vocab_wer)}"
        f"\tlattice_wer={pct(a.lattice_wer)}\n"
    )
    return out.getvalue()


def read_oracle_tsv(path: str | Path) -> OracleDoc:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise ReportError(f"{path.name}: truncated oracle file")
    tags = _parse_tags(lines[0], _ORACLE_MAGIC, path)
    ids: set[str] = set()
    tot_ref = tot_nbest = 0
    tot_vocab: int | None = 0
    tot_lattice: int | None = 0
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] == AGGREGATE_ID:
            continue
        if len(fields) != 7:
            raise ReportError(f"{path.name}:{lineno}: expected 7 columns")
        entry_id, ref_len, _, nbest, _, vocab, lattice = fields
        if nbest == "NA":
            raise ReportError(f"{path.name}:{lineno}: row lacks the n-best oracle count")
        ids.add(entry_id)
        tot_ref += int(ref_len)
        tot_nbest += int(nbest)
        tot_vocab = None if (vocab == "NA" or tot_vocab is None) else tot_vocab + int(vocab)
        tot_lattice = None if (lattice == "NA" or tot_lattice is None) else tot_lattice + int(lattice)
    if not ids:
        raise ReportError(f"{path.name}: no oracle rows")
    return OracleDoc(
        test_set=tags.get("test_set", path.stem),
        ids=frozenset(ids),
        nbest_wer=tot_nbest / tot_ref if tot_ref else 0.0,
        vocab_wer=(tot_vocab / tot_ref) if (tot_vocab is not None and tot_ref) else None,
        lattice_wer=(tot_lattice / tot_ref) if (tot_lattice is not None and tot_ref) else None,
    )


@dataclass(frozen=True)
class ReportRow:
    test_set: str
    method: str
    baseline_wer: float       # percent
    method_wer: float         # percent
    reduction: float | None   # percent, positive = improvement
    oracle_nbest: float | None = None
    oracle_vocab: float | None = None
    oracle_lattice: float | None = None


@dataclass(frozen=True)
class RunReport:
    rows: tuple[ReportRow, ...]

    def render_tsv(self) -> str:
        out = [
            "test_set\tmethod\tbaseline_wer\tmethod_wer\treduction"
            "\toracle_nbest\toracle_vocab\toracle_lattice"
        ]
        for r in self.rows:
            out.append(
                "\t".join(
                    (
                        r.test_set,
                        r.method,
                        f"{r.baseline_wer:.2f}",
                        f"{r.method_wer:.2f}",
                        "NA" if r.reduction is None else f"{r.reduction:.1f}",
                        _num(r.oracle_nbest),
                        _num(r.oracle_vocab),
                        _num(r.oracle_lattice),
                    )
                )
            )
        return "\n".join(out) + "\n"

    def render_markdown(self) -> str:
        header = (
            "| Test set | Method | Baseline | Method WER | "
            "Oracle n-best | Oracle vocab | Oracle lattice |"
        )
        rule = "|---|---|---|---|---|---|---|"
        lines = [header, rule]
        for r in self.rows:
            if r.reduction is None:
                method_cell = f"{r.method_wer:.2f}"
            else:
                # Signed change: improvement shows as a negative delta.
                delta = -r.reduction
                method_cell = f"{r.method_wer:.2f} ({delta:+.1f}%)"
            lines.append(
                f"| {r.test_set} | {r.method} | {r.baseline_wer:.2f} | {method_cell} "
                f"| {_num(r.oracle_nbest)} | {_num(r.oracle_vocab)} "
                f"| {_num(r.oracle_lattice)} |"
            )
        return "\n".join(lines) + "\n"


def _num(value: float | None) -> str:
    return "NA" if value is None else f"{value:.2f}"


def build_report(
    baseline: ScoreDoc,
    methods: Sequence[ScoreDoc] = (),
    oracle: OracleDoc | None = None,
) -> RunReport:
    """One row per method (or a lone baseline row), deterministic order.

    All inputs must describe the same test set and the same entry ids;
    mismatches are configuration mistakes and raise :class:`ReportError`.
    """
    base_ids = set(baseline.rows)
    for doc in methods:
        if doc.test_set != baseline.test_set:
            raise ReportError(
                f"method {doc.method!r} is tagged test_set={doc.test_set!r}, "
                f"baseline is {baseline.test_set!r}"
            )
        if set(doc.rows) != base_ids:
            raise ReportError(
                f"method {doc.method!r} scores different entries than the baseline"
            )
    if oracle is not None and oracle.ids != base_ids:
        raise ReportError("oracle report covers different entries than the baseline")

    o_nb = oracle.nbest_wer * 100 if oracle else None
    o_vocab = oracle.vocab_wer * 100 if oracle and oracle.vocab_wer is not None else None
    o_lattice = (
        oracle.lattice_wer * 100 if oracle and oracle.lattice_wer is not None else None
    )
    baseline_pct = baseline.wer * 100

    rows: list[ReportRow] = []
    if not methods:
        rows.append(
            ReportRow(
                test_set=baseline.test_set,
                method=baseline.method,
                baseline_wer=baseline_pct,
                method_wer=baseline_pct,
                reduction=None,
                oracle_nbest=o_nb,
                oracle_vocab=o_vocab,
                oracle_lattice=o_lattice,
            )
        )
    for doc in sorted(methods, key=lambda d: d.method):
        method_pct = doc.wer * 100
        rows.append(
            ReportRow(
                test_set=baseline.test_set,
                method=doc.method,
                baseline_wer=baseline_pct,
                method_wer=method_pct,
                reduction=(
                    relative_reduction(baseline_pct, method_pct) if baseline_pct > 0 else None
                ),
                oracle_nbest=o_nb,
                oracle_vocab=o_vocab,
                oracle_lattice=o_lattice,
            )
        )
    return RunReport(rows=tuple(sorted(rows, key=lambda r: (r.test_set, r.method))))


def score_docs_from_files(paths: Iterable[str | Path]) -> list[ScoreDoc]:
    return [read_score_tsv(p) for p in paths]
