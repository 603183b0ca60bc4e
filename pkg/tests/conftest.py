import json
import re
from pathlib import Path

import pytest

from nbestkit.corpus import Corpus, NBestEntry

# One detail line per acceptance criterion, filled in by the tests in
# test_acceptance.py and echoed after the run so every criterion shows
# a single pass/fail line even under default output capture.
ACCEPTANCE_DETAILS: dict[int, str] = {}


def record_criterion(number: int, detail: str) -> None:
    ACCEPTANCE_DETAILS[number] = detail


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    order = {"FAIL": 2, "PASS": 1, "SKIPPED": 0}
    outcomes: dict[int, str] = {}
    for category, label in (
        ("passed", "PASS"),
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("skipped", "SKIPPED"),
    ):
        for report in terminalreporter.stats.get(category, ()):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            match = re.search(r"criterion_0*(\d+)", nodeid)
            if not match:
                continue
            number = int(match.group(1))
            if order[label] > order.get(outcomes.get(number, ""), -1):
                outcomes[number] = label
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        line = f"criterion {number:2d}: {outcomes[number]}"
        detail = ACCEPTANCE_DETAILS.get(number)
        if detail:
            line = f"{line} - {detail}"
        terminalreporter.line(line)


def make_entry(
    entry_id: str = "u1",
    hypotheses=("a b c",),
    reference: str = "a b c",
    domain: str = "unknown",
    scores=None,
) -> NBestEntry:
    return NBestEntry(
        id=entry_id,
        hypotheses=tuple(hypotheses),
        reference=reference,
        domain=domain,
        scores=tuple(scores) if scores is not None else None,
    )


def make_corpus(*entries: NBestEntry) -> Corpus:
    return Corpus(entries=tuple(entries))


def write_jsonl(path: Path, records) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def tiny_corpus() -> Corpus:
    return make_corpus(
        make_entry("u1", ("the cat sat", "the cat sad", "a cat sat"), "the cat sat"),
        make_entry("u2", ("he went home", "she went home"), "she went home"),
        make_entry("u3", ("dogs bark loud", "dog barks loud"), "dogs bark loudly"),
    )


@pytest.fixture
def data_dir() -> Path:
    return Path(__file__).parent / "data"
