"""Count-based n-gram language model for N-best rescoring.

Deliberately simple and dependency-free: interpolated add-k smoothing
over a single unk type, giving exact normalization (every conditional
distribution sums to 1) and strictly positive probabilities, so
perplexity is finite on arbitrary input. The rescoring contract is a
stable ascending sort of the hypothesis list by perplexity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .alignment import DEFAULT_POLICY, NormalizationPolicy, normalize
from .corpus import NBestEntry

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_MODEL_FORMAT = "nbestkit-ngram"
_MODEL_VERSION = 1
_CTX_JOINER = ""


class NGramModel:
    """Immutable trained model; build via :func:`train` or :meth:`load`."""

    def __init__(
        self,
        order: int,
        add_k: float,
        tables: dict[tuple[str, ...], dict[str, int]],
    ) -> None:
        self.order = order
        self.add_k = add_k
        self._tables = tables
        self._totals = {ctx: sum(counts.values()) for ctx, counts in tables.items()}
        tokens: set[str] = set()
        for counts in tables.values():
            tokens.update(counts)
        # Prediction vocabulary: everything the model can emit.
        self.vocabulary = frozenset(tokens | {EOS, UNK})

    def _map_token(self, token: str) -> str:
        return token if token in self.vocabulary else UNK

    def prob(self, token: str, context: Sequence[str] = ()) -> float:
        """P(token | context), interpolated down to a uniform prior.

        Unknown target tokens are mapped to unk; unknown context tokens
        simply never match a stored context, so shorter orders take
        over. Always in (0, 1].
        """
        w = self._map_token(token)
        ctx = tuple(context)[max(0, len(context) - (self.order - 1)):]
        k_mass = self.add_k * len(self.vocabulary)
        p = 1.0 / len(self.vocabulary)
        # Evaluate from the empty context up to the full-order context.
        for start in range(len(ctx), -1, -1):
            sub = ctx[start:]
            counts = self._tables.get(sub)
            if counts is None:
                continue
            total = self._totals[sub]
            p = (counts.get(w, 0) + k_mass * p) / (total + k_mass)
        return p

    def logprob(self, token: str, context: Sequence[str] = ()) -> float:
        return math.log(self.prob(token, context))

    def sequence_logprob(self, tokens: Sequence[str]) -> float:
        """Total log-probability of the token sequence plus the end marker."""
        history = [BOS] * (self.order - 1) + [self._map_token(t) for t in tokens] + [EOS]
        span = self.order - 1
        total = 0.0
        for i in range(span, len(history)):
            total += self.logprob(history[i], history[i - span:i])
        return total

    def save(self, path: str | Path) -> None:
        """Persist as a versioned JSON table file (see module README)."""
        records: dict[str, dict[str, int]] = {}
        for ctx, counts in self._tables.items():
            if any(_CTX_JOINER in tok for tok in ctx):
                raise ValueError("context tokens may not contain U+001F")
            records[_CTX_JOINER.join(ctx)] = counts
        payload = {
            "format": _MODEL_FORMAT,
            "version": _MODEL_VERSION,
            "order": self.order,
            "add_k": self.add_k,
            "tables": records,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != _MODEL_FORMAT:
            raise ValueError(f"{path}: not a {_MODEL_FORMAT} file")
        if payload.get("version") != _MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {payload.get('version')}")
        tables = {
            tuple(key.split(_CTX_JOINER)) if key else (): counts
            for key, counts in payload["tables"].items()
        }
        return cls(order=payload["order"], add_k=payload["add_k"], tables=tables)


def train(
    sentences: Iterable[Sequence[str]], order: int = 3, add_k: float = 0.1
) -> NGramModel:
    """Count n-grams of every order up to ``order`` over padded sentences.

    Each sentence is surrounded by start markers and one end marker, so
    the model scores sentence endings. Requires at least one non-empty
    sentence and a strictly positive smoothing constant.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if add_k <= 0:
        raise ValueError(f"add_k must be > 0, got {add_k}")
    tables: dict[tuple[str, ...], dict[str, int]] = {}
    any_tokens = False
    for sentence in sentences:
        tokens = list(sentence)
        if tokens:
            any_tokens = True
        padded = [BOS] * (order - 1) + tokens + [EOS]
        for i in range(order - 1, len(padded)):
            target = padded[i]
            for ctx_len in range(order):
                ctx = tuple(padded[i - ctx_len:i])
                counts = tables.get(ctx)
                if counts is None:
                    counts = tables[ctx] = {}
                counts[target] = counts.get(target, 0) + 1
    if not any_tokens:
        raise ValueError("training corpus has no non-empty sentences")
    return NGramModel(order=order, add_k=add_k, tables=tables)


def perplexity(model: NGramModel, tokens: Sequence[str]) -> float:
    """exp of the mean negative log-probability over tokens plus the end marker."""
    total = model.sequence_logprob(tokens)
    return math.exp(-total / (len(tokens) + 1))


def rescore(
    entry: NBestEntry,
    model: NGramModel,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    acoustic_weight: float = 0.0,
) -> list[str]:
    """Re-rank an entry's hypotheses, best (lowest perplexity) first.

    Returns a permutation of the raw hypothesis strings; ties keep the
    original rank order. ``acoustic_weight`` > 0 subtracts that multiple
    of the entry's decoder scores (unscaled log-domain) from the mean
    negative log-probability before sorting; the default 0 ranks on
    perplexity alone.
    """
    if acoustic_weight and entry.scores is None:
        raise ValueError(
            f"entry {entry.id!r} has no scores; acoustic_weight requires them"
        )
    keyed: list[tuple[float, int, str]] = []
    for i, hyp in enumerate(entry.hypotheses):
        nll = math.log(perplexity(model, normalize(hyp, policy)))
        if acoustic_weight:
            assert entry.scores is not None
            nll -= acoustic_weight * entry.scores[i]
        keyed.append((nll, i, hyp))
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [hyp for _, _, hyp in keyed]


@dataclass(frozen=True)
class WeightedObjectiveConfig:
    """Per-rank mixing weights for the weighted N-best likelihood."""

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas:
            raise ValueError("alphas must be non-empty")
        if any(a < 0 for a in self.alphas):
            raise ValueError("alphas must be non-negative")
        if not any(a > 0 for a in self.alphas):
            raise ValueError("alphas must not all be zero")


# The published profile: the top hypothesis carries double weight.
DEFAULT_ALPHAS = WeightedObjectiveConfig((0.1, 0.05, 0.05, 0.05))


def weighted_nbest_objective(
    logprobs: Sequence[float], cfg: WeightedObjectiveConfig = DEFAULT_ALPHAS
) -> float:
    """Weighted sum of per-hypothesis total log-probabilities."""
    if len(logprobs) != len(cfg.alphas):
        raise ValueError(
            f"got {len(logprobs)} logprobs for {len(cfg.alphas)} alphas"
        )
    return sum(a * lp for a, lp in zip(cfg.alphas, logprobs))
