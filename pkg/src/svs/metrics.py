"""Evaluation metrics: AUC-ROC via the rank (Mann-Whitney) formulation and
anomaly-run scoring with confusion counts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class UndefinedAUCError(ValueError):
    """AUC needs at least one positive and one negative label."""


def auc_roc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative, ties
    counted at half weight. Computed from average ranks, O(n log n)."""
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores, {len(labels)} labels")
    n_pos = sum(1 for l in labels if l == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("need at least one positive and one negative label")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0  # 1-based average rank of the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    rank_sum_pos = sum(r for r, l in zip(ranks, labels) if l == 1)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class AnomalyEvaluation:
    auc: float
    flags: int
    false_pos: int
    false_neg: int


def evaluate_anomaly_run(scores: Sequence[float], labels: Sequence[int],
                         threshold: float) -> AnomalyEvaluation:
    """AUC over frame scores plus confusion counts at the flagging threshold."""
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores, {len(labels)} labels")
    auc = auc_roc(scores, labels)
    flags = false_pos = false_neg = 0
    for s, l in zip(scores, labels):
        flagged = s >= threshold
        if flagged:
            flags += 1
            if l == 0:
                false_pos += 1
        elif l == 1:
            false_neg += 1
    return AnomalyEvaluation(auc=auc, flags=flags, false_pos=false_pos, false_neg=false_neg)
