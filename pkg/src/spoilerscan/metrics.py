"""Skew-aware evaluation: rank-based ROC AUC, confusion counts, reports.

AUC is computed with the Mann-Whitney rank formulation using midranks for
tied scores:

    auc = (R_pos - P(P+1)/2) / (P * N)

where R_pos is the rank sum of the positives.  Midranks make this equal the
pairwise definition (fraction of positive/negative pairs ordered correctly,
ties counting one half), which `auc_oracle` computes directly as a slow,
independent cross-check.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import SentenceExample
from .network import ModelParams, forward, sigmoid
from .textprep import Vocabulary, encode_nonempty

__all__ = [
    "EvalReport",
    "roc_auc",
    "auc_oracle",
    "confusion",
    "report_from_scores",
    "evaluate",
]


def _as_score_label_arrays(
    scores: Sequence[float], labels: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    v = values[order]
    is_group_start = np.r_[True, v[1:] != v[:-1]]
    starts = np.flatnonzero(is_group_start)
    ends = np.r_[starts[1:], len(v)]
    group_rank = (starts + ends - 1) / 2.0 + 1.0
    ranks = np.empty(len(v), dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via midranked Mann-Whitney statistics."""
    s, y = _as_score_label_arrays(scores, labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    rank_sum_pos = _midranks(s)[y == 1].sum()
    return float((rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_oracle(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Pairwise AUC definition, quadratic in sample count; the test oracle."""
    s, y = _as_score_label_arrays(scores, labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (len(pos) * len(neg)))


def confusion(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) counts, predicting positive when score >= threshold."""
    s, y = _as_score_label_arrays(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return tp, fp, tn, fn


@dataclass
class EvalReport:
    auc: float
    n_pos: int
    n_neg: int
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float  # 0.0 when undefined; see precision_defined
    recall: float
    precision_defined: bool
    recall_defined: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def report_from_scores(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> EvalReport:
    """Assemble an EvalReport from raw scores at the given operating point."""
    s, y = _as_score_label_arrays(scores, labels)
    tp, fp, tn, fn = confusion(s, y, threshold)
    precision_defined = (tp + fp) > 0
    recall_defined = (tp + fn) > 0
    return EvalReport(
        auc=roc_auc(s, y),
        n_pos=int((y == 1).sum()),
        n_neg=int((y == 0).sum()),
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision=tp / (tp + fp) if precision_defined else 0.0,
        recall=tp / (tp + fn) if recall_defined else 0.0,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


def score_examples(
    params: ModelParams, vocab: Vocabulary, examples: Iterable[SentenceExample]
) -> np.ndarray:
    """Spoiler probabilities for each example, scored in eval mode."""
    scores = []
    for ex in examples:
        seq = encode_nonempty(vocab, ex.title, ex.sentence)
        logit, _ = forward(params, seq)
        scores.append(float(sigmoid(logit)))
    return np.asarray(scores, dtype=np.float64)


def evaluate(
    params: ModelParams,
    vocab: Vocabulary,
    examples: Sequence[SentenceExample],
    threshold: float = 0.5,
) -> EvalReport:
    """Score every example in eval mode and assemble the report."""
    labels = np.asarray([ex.label for ex in examples], dtype=np.int64)
    scores = score_examples(params, vocab, examples)
    return report_from_scores(scores, labels, threshold)
