"""DF-IIF word-specificity scores and a handcrafted-feature logistic baseline.

DF-IIF scores how book-specific a word is.  Treating each review as one
document and each book as one item:

    DF(w, i)   = (# documents of book i containing w) / (# documents of book i)
    IIF(w)     = ln(n_items / n_items_containing(w))
    DFIIF(w,i) = DF(w, i) * IIF(w)

High scores mark words frequent within one book's reviews but rare across
books, i.e. likely plot-specific vocabulary.  The baseline classifier turns
these scores plus simple surface statistics into a five-feature logistic
regression trained by full-batch gradient descent, giving the learned
network a handcrafted-feature contrast point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import SentenceExample
from .network import bce_with_logits, sigmoid
from .textprep import normalize

__all__ = [
    "FEATURE_NAMES",
    "DfIifTable",
    "FeatureVector",
    "BaselineModel",
    "build_df_iif",
    "featurize",
    "featurize_all",
    "train_baseline",
    "predict_baseline",
    "save_baseline",
    "load_baseline",
]

FEATURE_NAMES = ("max_dfiif", "mean_dfiif", "char_len", "token_count", "title_overlap")

BASELINE_FILE_VERSION = 1


@dataclass
class DfIifTable:
    n_items: int  # distinct books
    item_doc_counts: dict[str, int]  # book -> review-document count
    df: dict[tuple[str, str], float]  # (word, book) -> document frequency, sparse
    iif: dict[str, float]  # word -> inverse item frequency

    def score(self, word: str, book_id: str) -> float:
        """DFIIF(word, book); 0.0 for unseen words or (word, book) pairs."""
        return self.df.get((word, book_id), 0.0) * self.iif.get(word, 0.0)


def build_df_iif(examples: Iterable[SentenceExample]) -> DfIifTable:
    """Build the DF-IIF table, treating each review as one document.

    Word occurrence is counted on normalized tokens.  Fit this on the
    training partition only, so that baseline and network evaluations stay
    comparable.
    """
    # book -> review_id -> set of tokens seen in that review's sentences
    doc_tokens: dict[str, dict[str, set[str]]] = {}
    for ex in examples:
        book_docs = doc_tokens.setdefault(ex.book_id, {})
        book_docs.setdefault(ex.review_id, set()).update(normalize(ex.sentence))
    if not doc_tokens:
        raise ValueError("DF-IIF needs at least one book")

    n_items = len(doc_tokens)
    item_doc_counts = {book: len(docs) for book, docs in doc_tokens.items()}
    df: dict[tuple[str, str], float] = {}
    items_containing: dict[str, int] = {}
    for book, docs in doc_tokens.items():
        containing: dict[str, int] = {}
        for tokens in docs.values():
            for word in tokens:
                containing[word] = containing.get(word, 0) + 1
        n_docs = len(docs)
        for word, count in containing.items():
            df[(word, book)] = count / n_docs
            items_containing[word] = items_containing.get(word, 0) + 1
    iif = {word: math.log(n_items / count) for word, count in items_containing.items()}
    return DfIifTable(n_items=n_items, item_doc_counts=item_doc_counts, df=df, iif=iif)


@dataclass
class FeatureVector:
    max_dfiif: float
    mean_dfiif: float
    char_len: float  # sentence character count / 100
    token_count: float  # normalized token count / 10
    title_overlap: float  # distinct normalized tokens shared by title and sentence

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.max_dfiif, self.mean_dfiif, self.char_len, self.token_count, self.title_overlap]
        )


def featurize(table: DfIifTable, example: SentenceExample) -> FeatureVector:
    """Handcrafted features for one example against a fitted table.

    Words the table has never seen score 0.  The /100 and /10 scalings keep
    all features O(1) so full-batch descent stays well conditioned.
    """
    tokens = normalize(example.sentence)
    scores = [table.score(tok, example.book_id) for tok in tokens]
    title_tokens = set(normalize(example.title))
    return FeatureVector(
        max_dfiif=max(scores) if scores else 0.0,
        mean_dfiif=sum(scores) / len(scores) if scores else 0.0,
        char_len=len(example.sentence) / 100.0,
        token_count=len(tokens) / 10.0,
        title_overlap=float(len(title_tokens & set(tokens))),
    )


def featurize_all(table: DfIifTable, examples: Sequence[SentenceExample]) -> np.ndarray:
    """Feature matrix [n, 5] for a batch of examples."""
    return np.array([featurize(table, ex).as_array() for ex in examples])


@dataclass
class BaselineModel:
    weights: np.ndarray  # one weight per feature
    bias: float


def train_baseline(
    features: np.ndarray,
    labels: Sequence[int],
    lr: float = 0.1,
    epochs: int = 300,
    seed: int = 0,
) -> tuple[BaselineModel, float]:
    """Logistic regression by full-batch gradient descent on mean BCE.

    Weights start at zero, so the run is deterministic regardless of seed;
    the seed parameter is kept for interface stability.  Returns the model
    and the final mean loss.
    """
    del seed  # zero init + full-batch descent leaves nothing to randomize
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be [n, d] with one label per row")
    if not ((y == 1).any() and (y == 0).any()):
        raise ValueError("training needs at least one positive and one negative label")
    n = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(epochs):
        z = X @ w + b
        residual = sigmoid(z) - y
        w -= lr * (X.T @ residual) / n
        b -= lr * float(residual.mean())
    final_loss = float(np.mean(bce_with_logits(X @ w + b, y)))
    return BaselineModel(weights=w, bias=b), final_loss


def predict_baseline(model: BaselineModel, features) -> float | np.ndarray:
    """sigmoid(w . x + b); accepts a FeatureVector, a row, or a matrix."""
    if isinstance(features, FeatureVector):
        features = features.as_array()
    X = np.asarray(features, dtype=np.float64)
    z = X @ model.weights + model.bias
    return sigmoid(z)


def save_baseline(model: BaselineModel, path: str | Path) -> None:
    payload = {
        "version": BASELINE_FILE_VERSION,
        "weights": list(model.weights),
        "bias": model.bias,
        "feature_names": list(FEATURE_NAMES),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_baseline(path: str | Path) -> BaselineModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != BASELINE_FILE_VERSION:
        raise ValueError(f"unsupported baseline file version: {payload.get('version')}")
    if list(payload["feature_names"]) != list(FEATURE_NAMES):
        raise ValueError("baseline file feature names do not match this build")
    return BaselineModel(weights=np.array(payload["weights"], dtype=np.float64), bias=float(payload["bias"]))
