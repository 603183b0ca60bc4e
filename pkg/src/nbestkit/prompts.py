"""Prompt construction and response parsing for LLM-based correction.

Three template kinds:

* ``instruction`` is one user turn asking for the true transcription
  given the best hypothesis and the other hypotheses.
* ``zero_shot_tap`` is a fixed warm-up dialogue about ASR and rescoring
  (replayed verbatim, assistant turns canned) followed by the request.
* ``few_shot_tap`` is the same dialogue with one or more demonstration
  examples spliced into the final turn.

Hypothesis lists are rendered as numbered lines, matching the worked
example inside the dialogue itself. Square brackets and braces around
template variables are placeholder delimiters, not literal text, and
are dropped on substitution.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .corpus import NBestEntry

TEMPLATE_KINDS = ("instruction", "zero_shot_tap", "few_shot_tap")

INSTRUCTION_TEXT = (
    "Below is a best-hypotheses that is transcribed from an automatic speech "
    "recognition system. Write a response to predict the true transcription "
    "using the tokens from other-hypotheses."
    "### best-hypothesis:{best_hypothesis}"
    "### other-hypothesis:{other_hypotheses} ###Response:"
)

_TAP_WARMUP: tuple[tuple[str, str], ...] = (
    (
        "user",
        "Are you familiar with speech recognition?",
    ),
    (
        "assistant",
        "Yes, I am familiar with speech recognition. Speech recognition, also "
        "known as automatic speech recognition (ASR) or speech-to-text, is the "
        "process of converting spoken language into text. This technology "
        "involves using algorithms and machine learning models to analyze and "
        "transcribe the acoustic features of spoken words and phrases. Speech "
        "recognition has many applications, including voice-controlled "
        "assistants, automated phone systems, and transcription services.",
    ),
    (
        "user",
        "Are you familiar with language model rescoring in ASR?",
    ),
    (
        "assistant",
        "Yes, I am familiar with language model rescoring for speech "
        "recognition. Language model rescoring is a technique used to improve "
        "the accuracy of speech recognition systems. It involves using a "
        "separate language model to evaluate the likelihood of a given "
        "hypothese list. This separate model is typically more complex and "
        "powerful than the initial language model used for the transcription, "
        "and it is used to re-score the transcription based on the probability "
        "of the words occurring in the given context. The rescoring process "
        "involves taking the output of the initial language model, which is "
        "usually based on statistical methods such as Hidden Markov Models, "
        "and then applying a more advanced language model, such as a neural "
        "network-based language model, to generate a more accurate "
        "transcription. This is accomplished by re-ranking the possible "
        "transcriptions based on the probabilities assigned by the more "
        "advanced language model. Language model rescoring has been shown to "
        "significantly improve the accuracy of speech recognition systems, "
        "particularly in noisy or challenging environments where the initial "
        "language model may not perform well.",
    ),
    (
        "user",
        "Can you give a possible example on language model rescoring with "
        "5-best hypotheses?",
    ),
    (
        "assistant",
        "Sure, here is an example of language model rescoring for ASR with "
        "5-best hypotheses:\n"
        "1. I want to go to the store.\n"
        "2. I want to go to the storm.\n"
        "3. I want to go to the stove.\n"
        "4. I want to go to the star.\n"
        "5. I want to go to the storage.\n"
        "After rescoring, I think the ground-truth of this speech should be: "
        "I want to go to the store.",
    ),
)

FEW_SHOT_FINAL_TEXT = (
    "Nice job, i will give you a real example as a demonstration from "
    "{domain}. {demo_block}Following this example, can you report the true "
    "transcription from the following 5-best hypotheses:? {test_hypotheses}"
)

DEMO_FRAGMENT_TEXT = (
    "The 5-best hypothesis is:{demo_hypotheses}, and I expect your output "
    "is: {demo_reference}. "
)

ZERO_SHOT_FINAL_TEXT = (
    "Can you report the true transcription from the following 5-best "
    "hypotheses:? {test_hypotheses}"
)


@dataclass(frozen=True)
class PromptTemplate:
    """A fixed turn sequence with placeholder slots to bind at render time."""

    kind: str
    turns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if self.kind not in TEMPLATE_KINDS:
            raise ValueError(f"kind must be one of {TEMPLATE_KINDS}, got {self.kind!r}")


def prompt_template(kind: str) -> PromptTemplate:
    """The built-in template of the given kind."""
    if kind == "instruction":
        return PromptTemplate(kind=kind, turns=(("user", INSTRUCTION_TEXT),))
    if kind == "zero_shot_tap":
        return PromptTemplate(kind=kind, turns=_TAP_WARMUP + (("user", ZERO_SHOT_FINAL_TEXT),))
    if kind == "few_shot_tap":
        return PromptTemplate(kind=kind, turns=_TAP_WARMUP + (("user", FEW_SHOT_FINAL_TEXT),))
    raise ValueError(f"kind must be one of {TEMPLATE_KINDS}, got {kind!r}")


def format_hypotheses(hypotheses: Sequence[str]) -> str:
    """Numbered-line rendering of a hypothesis list."""
    return "\n".join(f"{i}. {h}" for i, h in enumerate(hypotheses, start=1))


def render_prompt(
    template: PromptTemplate,
    entry: NBestEntry,
    demos: Sequence[tuple[NBestEntry, str]] = (),
    n_shot: int | None = None,
    domain: str | None = None,
) -> list[tuple[str, str]]:
    """Bind an entry (and any demonstrations) into the template's turns.

    ``demos`` pairs each demonstration entry with its reference
    transcription. ``n_shot`` defaults to ``len(demos)`` and must match
    it; the instruction and zero-shot kinds reject demonstrations.
    Rendering is deterministic and leaves no unbound placeholders.
    """
    if n_shot is None:
        n_shot = len(demos)
    if n_shot != len(demos):
        raise ValueError(f"n_shot={n_shot} but {len(demos)} demos supplied")
    if template.kind == "few_shot_tap":
        if not demos:
            raise ValueError("few_shot_tap requires at least one demonstration")
    elif demos:
        raise ValueError(f"{template.kind} takes no demonstrations")

    subs = {
        "domain": domain if domain is not None else entry.domain,
        "test_hypotheses": format_hypotheses(entry.hypotheses),
        "best_hypothesis": entry.hypotheses[0],
        "other_hypotheses": "\n".join(entry.hypotheses[1:]),
        "demo_block": "".join(
            DEMO_FRAGMENT_TEXT.format(
                demo_hypotheses=format_hypotheses(demo.hypotheses),
                demo_reference=reference,
            )
            for demo, reference in demos
        ),
    }
    return [(role, text.format(**subs)) for role, text in template.turns]


def select_demos(
    pool: Sequence[NBestEntry], n_shot: int
) -> list[tuple[NBestEntry, str]]:
    """Pick demonstrations longest-reference-first (ties by entry id)."""
    if n_shot < 1:
        raise ValueError(f"n_shot must be >= 1, got {n_shot}")
    if n_shot > len(pool):
        raise ValueError(f"n_shot={n_shot} exceeds pool size {len(pool)}")
    ranked = sorted(pool, key=lambda e: (-len(e.reference.split()), e.id))
    return [(e, e.reference) for e in ranked[:n_shot]]


PARSE_LABEL_RE = re.compile(
    r"(?:###\s*)?\b(?:response|answer|output|correction|corrected\s+transcription|"
    r"true\s+transcription|transcription|ground[-\s]?truth(?:\s+of\s+this\s+speech)?)"
    r"\b[^:\n]{0,16}:[ \t]*",
    re.IGNORECASE,
)
_ROLE_PREFIX_RE = re.compile(r"^(?:assistant|system|model|a|r)\s*:\s*", re.IGNORECASE)
_QUOTE_PAIRS = {('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"), ("`", "`")}


def parse_response(raw: str, kind: str = "instruction") -> str | None:
    """Extract the transcription line from free-form model output.

    Takes the text after the last recognizable label (``Response:``,
    ``the true transcription is:`` and similar), then the first
    non-empty line, stripped of role prefixes and surrounding quotes.
    Returns None when nothing usable remains. No normalization happens
    here; scoring applies its own policy later.
    """
    if kind not in TEMPLATE_KINDS:
        raise ValueError(f"kind must be one of {TEMPLATE_KINDS}, got {kind!r}")
    text = raw
    last = None
    for match in PARSE_LABEL_RE.finditer(text):
        last = match
    if last is not None:
        text = text[last.end():]
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        line = _ROLE_PREFIX_RE.sub("", line).strip()
        while len(line) >= 2 and (line[0], line[-1]) in _QUOTE_PAIRS:
            line = line[1:-1].strip()
        if line:
            return line
        # The line was pure decoration (a bare quote or role tag); keep looking.
    return None
