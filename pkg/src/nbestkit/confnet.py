"""Confusion networks ("sausages") over N-best lists, with ROVER voting.

The network is grown incrementally: the rank-1 hypothesis is the pivot,
and each later hypothesis is aligned against the current slot sequence
by minimum edit distance, where a hypothesis token matches a slot if the
slot already contains that token. Every input hypothesis remains a path
through the finished network (one arc per slot, epsilon for skips).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .alignment import DEFAULT_POLICY, NormalizationPolicy, normalize
from .corpus import NBestEntry

# Epsilon ("emit nothing") arcs carry None instead of a token.
EPSILON = None


class Arc(NamedTuple):
    token: str | None
    rank: int


@dataclass
class ConfusionNetwork:
    """Slot sequence where each slot holds one arc per input hypothesis."""

    slots: list[list[Arc]]
    pivot_rank: int = 1
    hypothesis_count: int = 0

    def slot_tokens(self, index: int) -> set[str]:
        """Distinct non-epsilon tokens competing in one slot."""
        return {a.token for a in self.slots[index] if a.token is not None}

    def path(self, rank: int) -> list[str]:
        """Reconstruct the token sequence hypothesis ``rank`` contributed."""
        out: list[str] = []
        for slot in self.slots:
            for arc in slot:
                if arc.rank == rank and arc.token is not None:
                    out.append(arc.token)
        return out


@dataclass(frozen=True)
class VoteConfig:
    """Per-rank vote weights plus the epsilon discount.

    Ranks beyond the weights list reuse the last weight. The default
    profile gives the top hypothesis twice the say of each runner-up.
    """

    weights: tuple[float, ...] = (1.0, 0.5, 0.5, 0.5, 0.5)
    epsilon_penalty: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights:
            raise ValueError("weights must be non-empty")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one weight must be positive")
        if not 0.0 <= self.epsilon_penalty <= 1.0:
            raise ValueError("epsilon_penalty must lie in [0, 1]")

    def weight_for_rank(self, rank: int) -> float:
        return self.weights[min(rank, len(self.weights)) - 1]


def _align_to_slots(
    slot_tokens: list[set[str]], hyp: Sequence[str]
) -> list[tuple[str, int | None, str | None]]:
    """Edit ops between the current slot sequence and one hypothesis.

    Returns ops over (slot_index, hyp_token): ("M", i, tok) token joins
    slot i; ("E", i, None) hypothesis skips slot i; ("N", None, tok)
    token opens a new slot. Tie order: join, skip, new.
    """
    n = len(slot_tokens)
    m = len(hyp)
    width = m + 1
    rows: list[list[int]] = [[0] * width for _ in range(n + 1)]
    top = rows[0]
    for j in range(1, width):
        top[j] = (j << 2) | 3
    for i in range(1, n + 1):
        rows[i][0] = (i << 2) | 2
    for i in range(1, n + 1):
        tokens = slot_tokens[i - 1]
        prev = rows[i - 1]
        cur = rows[i]
        for j in range(1, width):
            d = prev[j - 1] >> 2
            if hyp[j - 1] in tokens:
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

    ops: list[tuple[str, int | None, str | None]] = []
    i, j = n, m
    while i or j:
        code = rows[i][j] & 3
        if code <= 1:
            i -= 1
            j -= 1
            ops.append(("M", i, hyp[j]))
        elif code == 2:
            i -= 1
            ops.append(("E", i, None))
        else:
            j -= 1
            ops.append(("N", None, hyp[j]))
    ops.reverse()
    return ops


def build_cn_from_token_lists(token_lists: Sequence[Sequence[str]]) -> ConfusionNetwork:
    """Build a network from already-normalized hypothesis token lists."""
    if not token_lists:
        raise ValueError("need at least one hypothesis")
    slots: list[list[Arc]] = [[Arc(tok, 1)] for tok in token_lists[0]]
    slot_tokens: list[set[str]] = [{tok} for tok in token_lists[0]]
    for rank, tokens in enumerate(token_lists[1:], start=2):
        ops = _align_to_slots(slot_tokens, tokens)
        new_slots: list[list[Arc]] = []
        new_sets: list[set[str]] = []
        earlier = range(1, rank)
        for op, slot_idx, tok in ops:
            if op == "M":
                slot = slots[slot_idx]
                slot.append(Arc(tok, rank))
                slot_tokens[slot_idx].add(tok)
                new_slots.append(slot)
                new_sets.append(slot_tokens[slot_idx])
            elif op == "E":
                slot = slots[slot_idx]
                slot.append(Arc(EPSILON, rank))
                new_slots.append(slot)
                new_sets.append(slot_tokens[slot_idx])
            else:
                slot = [Arc(EPSILON, r) for r in earlier]
                slot.append(Arc(tok, rank))
                new_slots.append(slot)
                new_sets.append({tok})
        slots = new_slots
        slot_tokens = new_sets
    return ConfusionNetwork(slots=slots, pivot_rank=1, hypothesis_count=len(token_lists))


def build_cn(
    entry: NBestEntry, policy: NormalizationPolicy = DEFAULT_POLICY
) -> ConfusionNetwork:
    """Normalize an entry's hypotheses and build their confusion network."""
    return build_cn_from_token_lists([normalize(h, policy) for h in entry.hypotheses])


def rover_vote(cn: ConfusionNetwork, cfg: VoteConfig = VoteConfig()) -> list[str]:
    """Weighted plurality vote per slot; epsilon winners delete the slot.

    Ties go to the pivot hypothesis's own arc in that slot, then
    lexicographically among tokens, with epsilon losing last.
    """
    out: list[str] = []
    for slot in cn.slots:
        scores: dict[str | None, float] = {}
        pivot_token: str | None = None
        pivot_seen = False
        for arc in slot:
            w = cfg.weight_for_rank(arc.rank)
            if arc.token is None:
                w *= cfg.epsilon_penalty
            scores[arc.token] = scores.get(arc.token, 0.0) + w
            if arc.rank == cn.pivot_rank:
                pivot_token = arc.token
                pivot_seen = True
        best = max(scores.values())
        tied = [t for t, s in scores.items() if s == best]
        if len(tied) == 1:
            winner = tied[0]
        elif pivot_seen and pivot_token in tied:
            winner = pivot_token
        else:
            # Epsilon sorts after every real token.
            winner = sorted(tied, key=lambda t: (t is None, t or ""))[0]
        if winner is not None:
            out.append(winner)
    return out
