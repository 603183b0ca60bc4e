"""Acceptance gate: ten numbered criteria, one summary line each.

Every test here is self-contained and seeded, checks its own runtime
budget where one applies, and reports a single line through the
terminal-summary hook in conftest.py. Criterion 10 needs locally
downloaded corpora and is skipped unless the matching environment
variables point at them.
"""

from __future__ import annotations

import functools
import itertools
import os
import random
import socket
import time
from pathlib import Path

import pytest

from nbestkit.alignment import (
    NormalizationPolicy,
    align,
    edit_distance,
    normalize,
    wer,
    wer_strings,
)
from nbestkit.confnet import build_cn, build_cn_from_token_lists, rover_vote
from nbestkit.corpus import Corpus, NBestEntry, corpus_stats
from nbestkit.llm import EndpointConfig, MockTransport, correct_batch
from nbestkit.ngram import (
    WeightedObjectiveConfig,
    rescore,
    train,
    weighted_nbest_objective,
)
from nbestkit.oracle import (
    lattice_errors,
    oracle_lattice,
    oracle_nbest,
    oracle_report,
    oracle_vocabulary,
)
from nbestkit.prompts import prompt_template, render_prompt
from nbestkit.report import ReportRow, RunReport, relative_reduction
from nbestkit.stats import rank_statistics

from conftest import record_criterion
from test_prompts import DEMO_1, DEMO_2, FIXTURE_ENTRY, canonical


def test_criterion_01_alignment_matches_recursive_oracle():
    @functools.lru_cache(maxsize=None)
    def oracle(a: tuple[str, ...], b: tuple[str, ...]) -> int:
        if not a:
            return len(b)
        if not b:
            return len(a)
        head = 0 if a[0] == b[0] else 1
        return min(
            oracle(a[1:], b[1:]) + head,
            oracle(a[1:], b) + 1,
            oracle(a, b[1:]) + 1,
        )

    alphabet = ("a", "b", "c")
    sequences: list[tuple[str, ...]] = []
    for length in range(7):
        sequences.extend(itertools.product(alphabet, repeat=length))
    assert len(sequences) == 1093

    started = time.monotonic()
    checksum = 0
    mismatches = 0
    for ref in sequences:
        for hyp in sequences:
            a = align(ref, hyp)
            errors = a.substitutions + a.deletions + a.insertions
            if errors != oracle(ref, hyp):
                mismatches += 1
            checksum += errors
    elapsed = time.monotonic() - started

    assert mismatches == 0
    # Total error count over the full sweep, frozen from the recursive
    # oracle: any kernel regression shows up as a checksum shift even
    # if the per-pair comparison above were ever loosened.
    assert checksum == 4212552
    assert elapsed < 30.0
    record_criterion(
        1,
        f"exhaustive sweep, {len(sequences) ** 2:,} pairs, "
        f"0 mismatches, {elapsed:.1f}s",
    )


def test_criterion_02_oracle_invariant_fuzz():
    rng = random.Random(20240817)
    vocab = [f"w{i}" for i in range(8)]

    def sentence(max_len: int, min_len: int = 0) -> str:
        return " ".join(rng.choice(vocab) for _ in range(rng.randint(min_len, max_len)))

    started = time.monotonic()
    violations = 0
    slack = 1e-12
    for i in range(10_000):
        ref = sentence(12, min_len=1)
        hyps = list(dict.fromkeys(sentence(12) for _ in range(rng.randint(1, 5))))
        entry = NBestEntry(id=f"f{i}", hypotheses=tuple(hyps), reference=ref)

        ref_tokens = ref.split()
        hyp1_tokens = hyps[0].split()
        w1 = wer(ref_tokens, hyp1_tokens).wer
        nbest_wer, rank = oracle_nbest(entry)
        vocab_wer = oracle_vocabulary(entry)
        lat_wer = oracle_lattice(entry)

        if not (0.0 <= vocab_wer <= nbest_wer + slack <= w1 + 2 * slack):
            violations += 1
        if not (0.0 <= lat_wer <= w1 + slack):
            violations += 1
        if not 1 <= rank <= len(hyps):
            violations += 1

        extra = sentence(12)
        while extra in hyps:
            extra = extra + " w0" if extra else "w0"
        bigger = NBestEntry(
            id=entry.id, hypotheses=entry.hypotheses + (extra,), reference=ref
        )
        if oracle_nbest(bigger)[0] > nbest_wer + slack:
            violations += 1
        if oracle_vocabulary(bigger) > vocab_wer + slack:
            violations += 1
        if oracle_lattice(bigger) > lat_wer + slack:
            violations += 1

        a = align(ref_tokens, hyp1_tokens)
        if a.correct + a.substitutions + a.deletions != len(ref_tokens):
            violations += 1
        if a.correct + a.substitutions + a.insertions != len(hyp1_tokens):
            violations += 1
    elapsed = time.monotonic() - started

    assert violations == 0
    assert elapsed < 60.0
    record_criterion(2, f"10,000 fuzzed entries, 0 violations, {elapsed:.1f}s")


def test_criterion_03_lattice_oracle_equals_brute_force():
    rng = random.Random(31415)
    alphabet = ["a", "b", "c", "d", "e"]

    def tokens(max_len: int, min_len: int = 0) -> list[str]:
        return [rng.choice(alphabet) for _ in range(rng.randint(min_len, max_len))]

    started = time.monotonic()
    mismatches = 0
    checked = 0
    for i in range(1_000):
        ref = tokens(5, min_len=1)
        hyps = list(
            dict.fromkeys(" ".join(tokens(5)) for _ in range(rng.randint(1, 3)))
        )
        entry = NBestEntry(id=f"l{i}", hypotheses=tuple(hyps), reference=" ".join(ref))
        cn = build_cn(entry)

        choices = [
            sorted({arc.token for arc in slot}, key=lambda t: (t is None, t or ""))
            for slot in cn.slots
        ]
        paths = {
            tuple(t for t in combo if t is not None)
            for combo in itertools.product(*choices)
        }
        brute = min(edit_distance(ref, list(p)) for p in paths)
        checked += 1
        if lattice_errors(cn, ref) != brute:
            mismatches += 1
        if oracle_lattice(entry) != brute / len(ref):
            mismatches += 1
    elapsed = time.monotonic() - started

    assert mismatches == 0
    assert elapsed < 30.0
    record_criterion(3, f"{checked} entries enumerated exhaustively, {elapsed:.1f}s")


def test_criterion_04_lm_normalization_and_rescore_determinism():
    rng = random.Random(271828)
    worst = 0.0
    for m in range(50):
        vocab_size = rng.randint(2, 20)
        vocab = [f"w{j}" for j in range(vocab_size)]
        order = rng.randint(1, 3)
        add_k = rng.choice([0.01, 0.1, 0.5, 1.0])
        sentences = [
            [rng.choice(vocab) for _ in range(rng.randint(0, 8))]
            for _ in range(rng.randint(3, 40))
        ]
        if not any(sentences):
            sentences.append([vocab[0]])
        model = train(sentences, order=order, add_k=add_k)

        contexts = [
            (),
            (rng.choice(vocab),),
            (rng.choice(vocab), rng.choice(vocab)),
            ("<unk>",),
            ("never-seen-token",),
        ]
        for context in contexts:
            total = sum(model.prob(t, context) for t in model.vocabulary)
            worst = max(worst, abs(total - 1.0))
            assert total == pytest.approx(1.0, abs=1e-9)

        hyps = list(
            dict.fromkeys(
                " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
                for _ in range(rng.randint(1, 5))
            )
        )
        entry = NBestEntry(id=f"m{m}", hypotheses=tuple(hyps), reference=hyps[0])
        reordered = rescore(entry, model)
        assert sorted(reordered) == sorted(hyps)
        assert rescore(entry, model) == reordered

    # Hypotheses that normalize identically share a perplexity; their
    # raw-order must survive the sort no matter what the model says.
    tie_model = train([["a", "b"]], order=2, add_k=0.5)
    tied = NBestEntry(
        id="ties", hypotheses=("a  b", "A b", "a b."), reference="a b"
    )
    assert rescore(tied, tie_model) == ["a  b", "A b", "a b."]
    record_criterion(
        4, f"50 models, max |sum p - 1| = {worst:.2e}, rescore permutes deterministically"
    )


def test_criterion_05_weighted_objective_reference_values():
    one_best = WeightedObjectiveConfig((1.0, 0.0, 0.0, 0.0))
    assert weighted_nbest_objective([-2.0, -9.0, -9.0, -9.0], one_best) == -2.0
    assert weighted_nbest_objective([-1.0, -2.0, -3.0, -4.0]) == -0.55
    record_criterion(5, "both reference sums hold to float equality")


def test_criterion_06_rover_improves_synthetic_corpus():
    vocab = [f"t{i}" for i in range(50)]
    seeds = range(20)
    started = time.monotonic()
    improved = 0
    regressions = 0
    base_wers: list[float] = []
    rover_wers: list[float] = []
    for seed in seeds:
        rng = random.Random(1000 + seed)
        base_errors = 0
        rover_errors = 0
        total_ref = 0
        for i in range(500):
            ref = [rng.choice(vocab) for _ in range(10)]

            def noisy() -> str:
                out = []
                for token in ref:
                    if rng.random() < 0.2:
                        wrong = rng.choice(vocab)
                        while wrong == token:
                            wrong = rng.choice(vocab)
                        out.append(wrong)
                    else:
                        out.append(token)
                return " ".join(out)

            hyps: list[str] = []
            seen: set[str] = set()
            while len(hyps) < 5:
                candidate = noisy()
                if candidate not in seen:
                    seen.add(candidate)
                    hyps.append(candidate)
            entry = NBestEntry(
                id=f"s{seed}e{i}", hypotheses=tuple(hyps), reference=" ".join(ref)
            )
            voted = rover_vote(build_cn(entry))
            base_errors += edit_distance(ref, hyps[0].split())
            rover_errors += edit_distance(ref, voted)
            total_ref += len(ref)
        base_wers.append(base_errors / total_ref)
        rover_wers.append(rover_errors / total_ref)
        if rover_errors > base_errors:
            regressions += 1
        elif rover_errors < base_errors:
            improved += 1
    elapsed = time.monotonic() - started

    assert regressions == 0
    assert improved >= 0.9 * len(seeds)
    assert elapsed < 60.0
    record_criterion(
        6,
        f"{improved}/{len(seeds)} seeds strictly improved "
        f"(mean {sum(base_wers) / len(base_wers):.3f} -> "
        f"{sum(rover_wers) / len(rover_wers):.3f}), {elapsed:.1f}s",
    )


SINOPEC_REFERENCE = (
    "Bankers in Hong Kong expect Sinopec to return for more loans "
    "as it develops China's petrochemical industry."
)
SINOPEC_HYP1 = (
    "Bankers in Hong Kong expect xinnepec to return for more loans "
    "as it develops China's petro chemical industry."
)
SINOPEC_HYP2 = (
    "Bankers in Hong Kong expect xinepec to return for more loans "
    "as it develops China's petrochemical industry."
)
SINOPEC_CORRECTED = (
    "Bankers in Hong Kong expect Sinopec to return for more loans "
    "as it develops China's petrochemical industry."
)


def test_criterion_07_sinopec_fixture_across_policies():
    policies = [
        ("default", NormalizationPolicy()),
        ("apostrophe_split", NormalizationPolicy(apostrophe_split=True)),
        ("keep_punctuation", NormalizationPolicy(strip_punctuation=False)),
        ("char_tokens", NormalizationPolicy(char_tokens=True)),
    ]
    printed: list[str] = []
    for name, policy in policies:
        ref_tokens = normalize(SINOPEC_REFERENCE, policy)
        w1 = wer_strings(SINOPEC_REFERENCE, SINOPEC_HYP1, policy)
        w2 = wer_strings(SINOPEC_REFERENCE, SINOPEC_HYP2, policy)
        wc = wer_strings(SINOPEC_REFERENCE, SINOPEC_CORRECTED, policy)
        line = (
            f"{name}: ref_tokens={len(ref_tokens)} "
            f"hyp1={w1.wer * 100:.1f}% hyp2={w2.wer * 100:.1f}% "
            f"corrected={wc.wer * 100:.1f}%"
        )
        printed.append(line)
        print(line)

    default = NormalizationPolicy()
    w1 = wer_strings(SINOPEC_REFERENCE, SINOPEC_HYP1, default)
    w2 = wer_strings(SINOPEC_REFERENCE, SINOPEC_HYP2, default)
    wc = wer_strings(SINOPEC_REFERENCE, SINOPEC_CORRECTED, default)
    assert w1.wer > w2.wer > 0.0
    assert wc.wer == 0.0

    split = NormalizationPolicy(apostrophe_split=True)
    split_ref = normalize(SINOPEC_REFERENCE, split)
    assert len(split_ref) == 18
    w1_split = wer_strings(SINOPEC_REFERENCE, SINOPEC_HYP1, split)
    assert w1_split.substitutions + w1_split.deletions + w1_split.insertions == 3
    assert round(w1_split.wer * 100, 1) == 16.7

    record_criterion(7, "; ".join(printed[:2]))


GOLDEN_DIR = Path(__file__).parent / "data" / "golden"


def test_criterion_08_prompt_goldens_and_offline_batch(monkeypatch):
    rendered = {
        "instruction.json": render_prompt(
            prompt_template("instruction"), FIXTURE_ENTRY
        ),
        "zero_shot_tap.json": render_prompt(
            prompt_template("zero_shot_tap"), FIXTURE_ENTRY
        ),
        "few_shot_tap_1shot.json": render_prompt(
            prompt_template("few_shot_tap"),
            FIXTURE_ENTRY,
            demos=[(DEMO_1, DEMO_1.reference)],
        ),
        "few_shot_tap_2shot.json": render_prompt(
            prompt_template("few_shot_tap"),
            FIXTURE_ENTRY,
            demos=[(DEMO_1, DEMO_1.reference), (DEMO_2, DEMO_2.reference)],
        ),
    }
    matched = 0
    for filename, turns in rendered.items():
        golden = (GOLDEN_DIR / filename).read_text(encoding="utf-8")
        assert canonical(turns) == golden, f"{filename} drifted from its fixture"
        matched += 1

    def no_network(*args, **kwargs):
        raise AssertionError("network access attempted during a mock batch")

    monkeypatch.setattr(socket, "socket", no_network)

    corpus = Corpus(
        entries=(
            NBestEntry(
                id="a1",
                hypotheses=("the cat sad", "the cat sat"),
                reference="the cat sat",
            ),
            NBestEntry(
                id="a2",
                hypotheses=("he went home", "she went home"),
                reference="she went home",
            ),
        )
    )
    transport = MockTransport(
        {"a1": "Response: the cat sat", "a2": "Response: she went home"}
    )
    endpoint = EndpointConfig(base_url="https://unused.example.test", model="test-model")
    results = correct_batch(corpus, prompt_template("instruction"), transport, endpoint)

    assert transport.calls == len(corpus.entries)
    assert all(not r.failed for r in results)
    base_errors = 0
    corrected_errors = 0
    total_ref = 0
    for entry, result in zip(corpus.entries, results):
        ref_tokens = normalize(entry.reference, NormalizationPolicy())
        base_errors += edit_distance(
            ref_tokens, normalize(entry.hypotheses[0], NormalizationPolicy())
        )
        corrected_errors += edit_distance(
            ref_tokens, normalize(result.corrected, NormalizationPolicy())
        )
        total_ref += len(ref_tokens)
    assert base_errors > 0
    assert corrected_errors == 0
    record_criterion(
        8,
        f"{matched} goldens byte-identical; offline batch WER "
        f"{base_errors / total_ref:.3f} -> {corrected_errors / total_ref:.3f}, "
        "0 sockets",
    )


def test_criterion_09_report_arithmetic():
    assert relative_reduction(4.5, 2.7) == 40.0
    assert relative_reduction(8.3, 1.7) == 79.5
    rows = (
        ReportRow(
            test_set="t", method="a", baseline_wer=4.5, method_wer=2.7, reduction=40.0
        ),
        ReportRow(
            test_set="t", method="b", baseline_wer=8.3, method_wer=1.7, reduction=79.5
        ),
    )
    text = RunReport(rows=rows).render_markdown()
    assert "2.70 (-40.0%)" in text
    assert "1.70 (-79.5%)" in text
    record_criterion(9, "4.5->2.7 = -40.0%, 8.3->1.7 = -79.5%, exact")


CHIME4_ENV = "NBESTKIT_CORPUS_CHIME4_TRAIN"
WSJ_ENV = "NBESTKIT_CORPUS_WSJ_TEST"
LIBRISPEECH_ENV = "NBESTKIT_CORPUS_LIBRISPEECH_TEST"

record_criterion(
    10,
    "optional external-corpus checks; set "
    f"{CHIME4_ENV} / {WSJ_ENV} / {LIBRISPEECH_ENV} to enable",
)


def _load_external(env_name: str) -> Corpus:
    from nbestkit.corpus import load_corpus

    return load_corpus(os.environ[env_name])


@pytest.mark.skipif(
    CHIME4_ENV not in os.environ,
    reason=f"set {CHIME4_ENV} to a local JSONL split to enable",
)
def test_criterion_10_chime4_train_pair_count():
    corpus = _load_external(CHIME4_ENV)
    summary = corpus_stats(corpus, NormalizationPolicy())
    assert summary.pair_count == 8738
    record_criterion(10, f"chime4 train pairs = {summary.pair_count}")


@pytest.mark.skipif(
    WSJ_ENV not in os.environ,
    reason=f"set {WSJ_ENV} to a local JSONL split to enable",
)
def test_criterion_10_wsj_oracle_bracket():
    corpus = _load_external(WSJ_ENV)
    policies = [
        NormalizationPolicy(),
        NormalizationPolicy(apostrophe_split=True),
    ]
    hits = []
    for policy in policies:
        report = oracle_report(corpus, policy=policy)
        nbest = report.aggregate.nbest_wer * 100
        candidates = [
            v * 100
            for v in (report.aggregate.vocab_wer, report.aggregate.lattice_wer)
            if v is not None
        ]
        if abs(nbest - 4.1) <= 0.5 and any(abs(c - 1.2) <= 0.5 for c in candidates):
            hits.append((policy, nbest, candidates))
    assert hits, "no normalization policy brackets the published oracle values"
    record_criterion(10, f"wsj oracle bracketed under {len(hits)} policies")


@pytest.mark.skipif(
    LIBRISPEECH_ENV not in os.environ,
    reason=f"set {LIBRISPEECH_ENV} to a local JSONL split to enable",
)
def test_criterion_10_librispeech_rank2_probabilities():
    corpus = _load_external(LIBRISPEECH_ENV)
    policies = [
        NormalizationPolicy(),
        NormalizationPolicy(apostrophe_split=True),
    ]
    hits = 0
    for policy in policies:
        stats = rank_statistics(corpus, [2], policy)
        row = stats.rows[0]
        if row.p_case_i is None or row.p_case_ii is None:
            continue
        if abs(row.p_case_i - 0.14) <= 0.03 and abs(row.p_case_ii - 0.34) <= 0.05:
            hits += 1
    assert hits, "no counting protocol lands inside the published intervals"
    record_criterion(10, f"librispeech rank-2 probabilities matched under {hits} protocols")
