"""Command line interface.

Subcommands:

- ``stats``    corpus summary, rank-k probability tables, word frequency
- ``score``    per-entry WER rows as TSV (from a rank or a results file)
- ``oracle``   n-best / vocabulary / lattice oracle bounds
- ``correct``  slot-vote correction or an external chat endpoint
- ``rescore``  n-gram perplexity reranking
- ``report``   comparison tables from persisted score files
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus as corpus_io
from . import figures, ngram, prompts, report, stats
from .alignment import NormalizationPolicy, align, batch_wer, normalize
from .confnet import VoteConfig, build_cn, rover_vote
from .corpus import Corpus, CorrectionResult, CorpusError, NBestEntry, load_corpus
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
from .oracle import VARIANTS, oracle_report
from .report import ReportError


def _add_policy_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("normalization")
    group.add_argument("--no-lowercase", action="store_true", help="keep original casing")
    group.add_argument("--keep-punctuation", action="store_true", help="do not strip punctuation")
    group.add_argument(
        "--apostrophe-split",
        action="store_true",
        help="split clitics: don't -> don 't",
    )
    group.add_argument(
        "--char-tokens", action="store_true", help="score characters instead of words"
    )


def _policy(args: argparse.Namespace) -> NormalizationPolicy:
    return NormalizationPolicy(
        lowercase=not args.no_lowercase,
        strip_punctuation=not args.keep_punctuation,
        apostrophe_split=args.apostrophe_split,
        char_tokens=args.char_tokens,
    )


def _write_output(text: str, destination: str | None) -> None:
    if destination in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


def _parse_ranks(expr: str) -> list[int]:
    ranks: list[int] = []
    for part in expr.split(","):
        part = part.strip()
        if ".." in part:
            lo_s, _, hi_s = part.partition("..")
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise ValueError(f"empty rank range {part!r}")
            ranks.extend(range(lo, hi + 1))
        elif part:
            ranks.append(int(part))
    if not ranks:
        raise ValueError(f"no ranks in {expr!r}")
    return sorted(set(ranks))


def _parse_weights(expr: str) -> tuple[float, ...]:
    return tuple(float(part) for part in expr.split(",") if part.strip())


# ---------------------------------------------------------------- stats


def cmd_stats(args: argparse.Namespace) -> int:
    policy = _policy(args)
    ranks = _parse_ranks(args.ranks) if args.ranks else None
    max_n = args.nbest
    if max_n is None:
        max_n = max(corpus_io.DEFAULT_MAX_N, max(ranks)) if ranks else corpus_io.DEFAULT_MAX_N
    corpus = load_corpus(args.input, max_n=max_n)

    summary = corpus_io.corpus_stats(corpus, policy)
    lines = [
        f"entries\t{summary.pair_count}",
        f"avg_ref_tokens\t{summary.avg_ref_tokens:.2f}",
    ]
    for name, dom in sorted(summary.domains.items()):
        lines.append(f"domain\t{name}\t{dom.pair_count}\t{dom.avg_ref_tokens:.2f}")
    sys.stderr.write("\n".join(lines) + "\n")

    out_parts: list[str] = []
    rank_table: stats.RankStats | None = None
    if ranks:
        rank_table = stats.rank_statistics(corpus, ranks, policy)
        out_parts.append(rank_table.to_json() if args.emit == "json" else rank_table.to_tsv())
    freq: list[tuple[str, int]] | None = None
    if args.word_freq:
        freq = stats.word_frequency(corpus, args.word_freq, top=args.top, policy=policy)
        out_parts.append(
            "\n".join(f"{token}\t{count}" for token, count in freq) + "\n"
        )
    if out_parts:
        _write_output("".join(out_parts), args.output)

    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        if rank_table is not None:
            figures.save_rank_curves(rank_table, fig_dir / "rank_curves.png")
        if freq:
            figures.save_word_frequency(
                freq, fig_dir / "word_frequency.png", title=f"top tokens ({args.word_freq})"
            )
    return 0


# ---------------------------------------------------------------- score


def _results_as_corpus(
    corpus: Corpus, results_path: str | Path
) -> list[tuple[str, list[str], str]]:
    """Pair each correction result with its reference text.

    Returns (id, hypothesis-as-singleton-or-empty, reference). A failed
    result scores as an empty hypothesis: every reference token counts
    as a deletion, which keeps the denominator honest.
    """
    by_id = {entry.id: entry for entry in corpus.entries}
    rows: list[tuple[str, list[str], str]] = []
    for result in corpus_io.read_results(results_path):
        entry = by_id.get(result.id)
        if entry is None:
            raise CorpusError(f"result id {result.id!r} not present in the corpus")
        hyp = [] if result.failed else [result.corrected]
        rows.append((result.id, hyp, entry.reference))
    return rows


def cmd_score(args: argparse.Namespace) -> int:
    policy = _policy(args)
    corpus = load_corpus(args.input, max_n=args.nbest)
    rows: dict[str, report.ScoreRow] = {}
    if args.results:
        method = args.method or "results"
        for entry_id, hyps, reference in _results_as_corpus(corpus, args.results):
            ref_tokens = normalize(reference, policy)
            hyp_tokens = normalize(hyps[0], policy) if hyps else []
            a = align(ref_tokens, hyp_tokens)
            rows[entry_id] = report.ScoreRow(
                a.substitutions, a.deletions, a.insertions, a.ref_len
            )
    else:
        method = args.method or f"hyp{args.hyp_rank}"
        for entry in corpus.entries:
            rank = min(args.hyp_rank, len(entry.hypotheses))
            ref_tokens = normalize(entry.reference, policy)
            hyp_tokens = normalize(entry.hypotheses[rank - 1], policy)
            a = align(ref_tokens, hyp_tokens)
            rows[entry.id] = report.ScoreRow(
                a.substitutions, a.deletions, a.insertions, a.ref_len
            )
    doc = report.ScoreDoc(
        test_set=args.test_set or Path(args.input).stem, method=method, rows=rows
    )
    _write_output(report.render_score_tsv(doc), args.output)
    return 0


# ---------------------------------------------------------------- oracle


def cmd_oracle(args: argparse.Namespace) -> int:
    policy = _policy(args)
    corpus = load_corpus(args.input, max_n=args.nbest)
    result = oracle_report(corpus, policy=policy, variant=args.variant)
    test_set = args.test_set or Path(args.input).stem
    _write_output(report.render_oracle_tsv(result, test_set), args.output)
    return 0


# ---------------------------------------------------------------- correct


def _load_demos(path: str | Path, shots: int) -> list[tuple[NBestEntry, str]]:
    pool_corpus = load_corpus(path)
    return prompts.select_demos(pool_corpus.entries, shots)


def cmd_correct(args: argparse.Namespace) -> int:
    policy = _policy(args)
    corpus = load_corpus(args.input, max_n=args.nbest)

    if args.method == "rover":
        cfg = VoteConfig(
            weights=_parse_weights(args.weights) if args.weights else VoteConfig().weights,
            epsilon_penalty=args.eps_penalty,
        )
        results = []
        for entry in corpus.entries:
            cn = build_cn(entry, policy)
            tokens = rover_vote(cn, cfg)
            results.append(
                CorrectionResult(id=entry.id, corrected=" ".join(tokens), corrector="rover")
            )
    else:
        kind = {"instruction": "instruction", "tap0": "zero_shot_tap", "tapN": "few_shot_tap"}[
            args.template
        ]
        template = prompts.prompt_template(kind)
        demos: list[tuple[NBestEntry, str]] = []
        if kind == "few_shot_tap":
            if not args.demo_pool:
                raise ConfigError("--template tapN requires --demo-pool")
            demos = _load_demos(args.demo_pool, args.shots)
        endpoint = EndpointConfig(
            base_url=args.endpoint or "http://localhost:8000/v1",
            model=args.model,
            temperature=args.temperature,
            max_tokens=args.max_tokens,
            timeout=args.timeout,
        )
        if args.mock:
            transport = MockTransport(load_mock_fixtures(args.mock))
        else:
            if not args.endpoint:
                raise ConfigError("--endpoint is required unless --mock is given")
            transport = HttpTransport(endpoint)
        cache = ResponseCache(args.cache) if args.cache else None
        settings = BatchSettings(concurrency=args.concurrency)
        results = correct_batch(
            corpus,
            template,
            transport,
            endpoint,
            demos=demos,
            domain=args.domain,
            cache=cache,
            settings=settings,
        )
        failed = sum(1 for r in results if r.failed)
        if failed:
            sys.stderr.write(f"{failed}/{len(results)} corrections failed\n")

    corpus_io.write_results(args.output or "-", results)
    return 0


# ---------------------------------------------------------------- rescore


def _training_sentences(path: str | Path, policy: NormalizationPolicy) -> list[list[str]]:
    """JSONL corpora contribute references; anything else is plain text."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        corpus = load_corpus(path)
        return [normalize(entry.reference, policy) for entry in corpus.entries]
    return [normalize(line, policy) for line in text.splitlines() if line.strip()]


def cmd_rescore(args: argparse.Namespace) -> int:
    policy = _policy(args)
    if bool(args.train_refs) == bool(args.model):
        raise ConfigError("give exactly one of --train-refs or --model")
    if args.model:
        model = ngram.NGramModel.load(args.model)
    else:
        sentences = _training_sentences(args.train_refs, policy)
        model = ngram.train(sentences, order=args.order, add_k=args.addk)
    if args.save_model:
        model.save(args.save_model)

    corpus = load_corpus(args.input, max_n=args.nbest)
    corrector = f"ngram{model.order}"
    out_entries: list[NBestEntry] = []
    results: list[CorrectionResult] = []
    for entry in corpus.entries:
        reordered = ngram.rescore(
            entry, model, policy=policy, acoustic_weight=args.acoustic_weight
        )
        results.append(
            CorrectionResult(id=entry.id, corrected=reordered[0], corrector=corrector)
        )
        if args.emit == "corpus":
            # Scores are rank-ordered by contract, so they cannot follow
            # the permutation; the reordered corpus drops them.
            out_entries.append(
                NBestEntry(
                    id=entry.id,
                    hypotheses=tuple(reordered),
                    reference=entry.reference,
                    domain=entry.domain,
                )
            )
    if args.emit == "corpus":
        corpus_io.write_corpus(args.output or "-", Corpus(tuple(out_entries)))
    else:
        corpus_io.write_results(args.output or "-", results)
    return 0


# ---------------------------------------------------------------- report


def cmd_report(args: argparse.Namespace) -> int:
    docs = report.score_docs_from_files(args.scores)
    baseline, methods = docs[0], docs[1:]
    oracle_doc = report.read_oracle_tsv(args.oracle) if args.oracle else None
    run = report.build_report(baseline, methods, oracle_doc)
    rendered = run.render_markdown() if args.format == "md" else run.render_tsv()
    _write_output(rendered, args.output)
    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.save_wer_comparison(run, fig_dir / "wer_comparison.png")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbestkit",
        description="Score, analyze, and correct ASR n-best hypothesis lists.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="corpus summary and rank statistics")
    p_stats.add_argument("--input", required=True, help="JSONL corpus")
    p_stats.add_argument("--nbest", type=int, default=None, help="truncate lists to N")
    p_stats.add_argument("--ranks", help="ranks to analyze, e.g. 2..20 or 2,3,5")
    p_stats.add_argument("--emit", choices=("tsv", "json"), default="tsv")
    p_stats.add_argument(
        "--word-freq", choices=stats.WORD_FREQUENCY_SIDES, help="also emit top token counts"
    )
    p_stats.add_argument("--top", type=int, default=10, help="word-frequency list size")
    p_stats.add_argument("--figures", help="directory for rendered PNG figures")
    p_stats.add_argument("-o", "--output", help="write tables here instead of stdout")
    _add_policy_args(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_score = sub.add_parser("score", help="per-entry WER rows as TSV")
    p_score.add_argument("--input", required=True, help="JSONL corpus")
    p_score.add_argument("--hyp-rank", type=int, default=1, help="score the k-th hypothesis")
    p_score.add_argument("--results", help="score a correction-results JSONL instead")
    p_score.add_argument("--nbest", type=int, default=corpus_io.DEFAULT_MAX_N)
    p_score.add_argument("--test-set", help="tag recorded in the score header")
    p_score.add_argument("--method", help="method tag recorded in the score header")
    p_score.add_argument("-o", "--output", help="output TSV path (default stdout)")
    _add_policy_args(p_score)
    p_score.set_defaults(func=cmd_score)

    p_oracle = sub.add_parser("oracle", help="oracle WER bounds")
    p_oracle.add_argument("--input", required=True, help="JSONL corpus")
    p_oracle.add_argument("--nbest", type=int, default=corpus_io.DEFAULT_MAX_N)
    p_oracle.add_argument("--variant", choices=VARIANTS, default="both")
    p_oracle.add_argument("--test-set", help="tag recorded in the oracle header")
    p_oracle.add_argument("-o", "--output", help="output TSV path (default stdout)")
    _add_policy_args(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_correct = sub.add_parser("correct", help="produce corrected transcriptions")
    p_correct.add_argument("--method", choices=("rover", "llm"), required=True)
    p_correct.add_argument("--input", required=True, help="JSONL corpus")
    p_correct.add_argument("--nbest", type=int, default=corpus_io.DEFAULT_MAX_N)
    p_correct.add_argument("--weights", help="rover: comma list of per-rank vote weights")
    p_correct.add_argument(
        "--eps-penalty", type=float, default=1.0, help="rover: weight scale for empty arcs"
    )
    p_correct.add_argument(
        "--template", choices=("instruction", "tap0", "tapN"), default="instruction"
    )
    p_correct.add_argument("--endpoint", help="llm: base URL of a chat-completions service")
    p_correct.add_argument("--model", default="gpt-3.5-turbo", help="llm: model name")
    p_correct.add_argument("--shots", type=int, default=8, help="llm: demos for tapN")
    p_correct.add_argument("--demo-pool", help="llm: JSONL corpus to draw demos from")
    p_correct.add_argument("--domain", help="llm: override the domain named in prompts")
    p_correct.add_argument("--cache", help="llm: directory for the response cache")
    p_correct.add_argument("--mock", help="llm: JSONL fixture file instead of a network call")
    p_correct.add_argument("--concurrency", type=int, default=4)
    p_correct.add_argument("--temperature", type=float, default=0.0)
    p_correct.add_argument("--max-tokens", type=int, default=256)
    p_correct.add_argument("--timeout", type=float, default=30.0)
    p_correct.add_argument("-o", "--output", help="results JSONL path (default stdout)")
    _add_policy_args(p_correct)
    p_correct.set_defaults(func=cmd_correct)

    p_rescore = sub.add_parser("rescore", help="rerank lists with an n-gram model")
    p_rescore.add_argument("--input", required=True, help="JSONL corpus")
    p_rescore.add_argument("--nbest", type=int, default=corpus_io.DEFAULT_MAX_N)
    p_rescore.add_argument("--train-refs", help="training text: JSONL corpus or one line per sentence")
    p_rescore.add_argument("--model", help="load a saved model instead of training")
    p_rescore.add_argument("--save-model", help="persist the trained model as JSON")
    p_rescore.add_argument("--order", type=int, default=3)
    p_rescore.add_argument("--addk", type=float, default=0.1)
    p_rescore.add_argument(
        "--acoustic-weight",
        type=float,
        default=0.0,
        help="blend recognizer scores into the reranking objective",
    )
    p_rescore.add_argument("--emit", choices=("results", "corpus"), default="results")
    p_rescore.add_argument("-o", "--output", help="output path (default stdout)")
    _add_policy_args(p_rescore)
    p_rescore.set_defaults(func=cmd_rescore)

    p_report = sub.add_parser("report", help="comparison tables from score files")
    p_report.add_argument(
        "--scores", nargs="+", required=True, help="score TSVs; the first is the baseline"
    )
    p_report.add_argument("--oracle", help="oracle TSV for the same corpus")
    p_report.add_argument("--format", choices=("tsv", "md"), default="tsv")
    p_report.add_argument("--figures", help="directory for rendered PNG figures")
    p_report.add_argument("-o", "--output", help="output path (default stdout)")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ReportError, ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
