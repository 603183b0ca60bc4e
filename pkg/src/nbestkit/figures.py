"""Render report figures to image files.

matplotlib is imported lazily and forced onto the Agg backend so the
functions work in headless environments and the dependency stays out of
the import path of everything else.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .report import RunReport
    from .stats import RankStats


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_wer_comparison(report: RunReport, path: str | Path) -> Path:
    """Grouped bar chart of baseline vs method WER, one group per row."""
    plt = _pyplot()
    path = Path(path)
    labels = [f"{r.test_set}\n{r.method}" for r in report.rows]
    baseline = [r.baseline_wer for r in report.rows]
    method = [r.method_wer for r in report.rows]

    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(labels)), 3.6))
    xs = range(len(labels))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], baseline, width, label="baseline", color="#888888")
    ax.bar([x + width / 2 for x in xs], method, width, label="method", color="#2b7a78")
    oracle = [r.oracle_nbest for r in report.rows]
    if any(v is not None for v in oracle):
        ax.plot(
            list(xs),
            [v if v is not None else float("nan") for v in oracle],
            "k--",
            marker="v",
            label="oracle n-best",
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("WER (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_rank_curves(stats: RankStats, path: str | Path) -> Path:
    """Both rank probabilities as curves over the hypothesis rank."""
    plt = _pyplot()
    path = Path(path)
    ranks = [row.rank for row in stats.rows]
    beats = [row.p_case_i for row in stats.rows]
    recovers = [row.p_case_ii for row in stats.rows]

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(ranks, beats, marker="o", label="P(rank k beats rank 1)")
    ax.plot(ranks, recovers, marker="s", label="P(rank-1 error recovered at k)")
    ax.set_xlabel("hypothesis rank k")
    ax.set_ylabel("probability")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_word_frequency(
    counts: Sequence[tuple[str, int]], path: str | Path, title: str = "word frequency"
) -> Path:
    """Horizontal bars for a top-N token count list, largest at the top."""
    plt = _pyplot()
    path = Path(path)
    tokens = [t for t, _ in counts]
    values = [c for _, c in counts]

    fig, ax = plt.subplots(figsize=(5.0, max(2.0, 0.32 * len(tokens) + 1.0)))
    ys = range(len(tokens))
    ax.barh(list(ys), values, color="#3a6ea5")
    ax.set_yticks(list(ys))
    ax.set_yticklabels(tokens, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("count")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
