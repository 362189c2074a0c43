"""Mini-batch training loop with seeded shuffling, per-epoch validation AUC,
best-epoch model selection, checkpointing, and single-example prediction.

Determinism contract: (dataset, config, seed) fully determines the training
log and the returned parameters.  Epoch e shuffles with seed + e and draws
its dropout masks from a generator seeded by (seed, e), so training resumed
from a checkpoint at an epoch boundary replays exactly the schedule an
uninterrupted run would have used.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import DatasetSplit, SentenceExample
from .metrics import roc_auc
from .network import (
    AdamState,
    ModelParams,
    NetworkConfig,
    adam_step,
    backward,
    bce_with_logits,
    forward,
    init_adam_state,
    init_params,
    sigmoid,
    zero_grads,
)
from .textprep import EncoderConfig, TokenSequence, Vocabulary, encode_nonempty

__all__ = [
    "TrainConfig",
    "EpochLog",
    "TrainLog",
    "make_batches",
    "train",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    batch_size: int = 256
    epochs: int = 5
    lr: float = 0.003
    seed: int = 0
    network: NetworkConfig = field(default_factory=NetworkConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.network.vocab_size != self.encoder.vocab_size:
            raise ValueError("network and encoder disagree on vocab_size")
        if self.network.max_len != self.encoder.max_len:
            raise ValueError("network and encoder disagree on max_len")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr": self.lr,
            "seed": self.seed,
            "network": self.network.to_dict(),
            "encoder": {
                "vocab_size": self.encoder.vocab_size,
                "max_len": self.encoder.max_len,
            },
        }


@dataclass
class EpochLog:
    epoch: int
    loss: float  # mean training loss over all examples this epoch
    val_auc: float
    secs: float


@dataclass
class TrainLog:
    seed: int
    n_train: int
    n_val: int
    entries: list[EpochLog] = field(default_factory=list)

    def to_jsonl(self, path: str | Path, deterministic: bool = False) -> None:
        """One JSON line per epoch; wall time is zeroed under deterministic."""
        lines = []
        for e in self.entries:
            row = asdict(e)
            if deterministic:
                row["secs"] = 0.0
            lines.append(json.dumps(row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_batches(
    examples: Sequence, batch_size: int, epoch_seed: int
) -> list[list]:
    """Seeded shuffle, then contiguous chunks; the last batch may be short."""
    if not examples:
        raise ValueError("cannot batch an empty example list")
    import random as _random

    order = list(range(len(examples)))
    _random.Random(epoch_seed).shuffle(order)
    return [
        [examples[i] for i in order[start : start + batch_size]]
        for start in range(0, len(order), batch_size)
    ]


def _encode_all(
    vocab: Vocabulary, examples: Sequence[SentenceExample]
) -> list[tuple[TokenSequence, int]]:
    return [(encode_nonempty(vocab, ex.title, ex.sentence), ex.label) for ex in examples]


def _validation_auc(
    params: ModelParams, encoded_val: Sequence[tuple[TokenSequence, int]]
) -> float:
    scores = np.empty(len(encoded_val))
    labels = np.empty(len(encoded_val), dtype=np.int64)
    for i, (seq, label) in enumerate(encoded_val):
        logit, _ = forward(params, seq)
        scores[i] = sigmoid(logit)
        labels[i] = label
    return roc_auc(scores, labels)


def train(
    config: TrainConfig,
    split: DatasetSplit,
    vocab: Vocabulary,
    *,
    start_params: ModelParams | None = None,
    start_adam: AdamState | None = None,
    start_epoch: int = 0,
) -> tuple[ModelParams, TrainLog]:
    """Train on split.train, validate per epoch, return the best-AUC params.

    Gradients are accumulated over each batch in example-index order and
    averaged before a single Adam step.  The optional start_* arguments
    resume from a checkpoint at an epoch boundary; the remaining epochs then
    match an uninterrupted run exactly.
    """
    if not split.train:
        raise ValueError("training partition is empty")
    if not split.validation:
        raise ValueError("validation partition is empty")
    val_labels = {ex.label for ex in split.validation}
    if val_labels != {0, 1}:
        raise ValueError("validation needs both classes, AUC is undefined otherwise")

    encoded_train = _encode_all(vocab, split.train)
    encoded_val = _encode_all(vocab, split.validation)

    params = start_params.copy() if start_params is not None else init_params(
        config.network, config.seed
    )
    adam = start_adam.copy() if start_adam is not None else init_adam_state(params)

    log = TrainLog(seed=config.seed, n_train=len(encoded_train), n_val=len(encoded_val))
    best_auc = -1.0
    best_params = params.copy()
    n_train = len(encoded_train)

    for epoch in range(start_epoch, config.epochs):
        t_start = time.perf_counter()
        batches = make_batches(list(range(n_train)), config.batch_size, config.seed + epoch)
        drop_rng = np.random.default_rng((config.seed, epoch))
        loss_sum = 0.0
        for batch in batches:
            grads = zero_grads(params)
            for idx in batch:
                seq, label = encoded_train[idx]
                logit, cache = forward(params, seq, rng=drop_rng)
                loss_sum += bce_with_logits(logit, label)
                backward(params, cache, label, acc=grads)
            inv = 1.0 / len(batch)
            for arr in grads.values():
                arr *= inv
            adam_step(params, grads, adam, lr=config.lr)
        val_auc = _validation_auc(params, encoded_val)
        log.entries.append(
            EpochLog(
                epoch=epoch,
                loss=loss_sum / n_train,
                val_auc=val_auc,
                secs=time.perf_counter() - t_start,
            )
        )
        if val_auc > best_auc:
            best_auc = val_auc
            best_params = params.copy()
    return best_params, log


def predict(params: ModelParams, vocab: Vocabulary, title: str, sentence: str) -> float:
    """Spoiler probability for one (title, sentence) pair in eval mode.

    Text that normalizes to nothing is scored as a single unknown token.
    """
    seq = encode_nonempty(vocab, title, sentence)
    logit, _ = forward(params, seq)
    return float(sigmoid(logit))


def _tensor_payload(tensors: dict[str, np.ndarray]) -> dict:
    return {
        name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
        for name, arr in tensors.items()
    }


def _tensors_from_payload(
    payload: dict, expected: dict[str, np.ndarray], what: str
) -> dict[str, np.ndarray]:
    if set(payload) != set(expected):
        raise ValueError(f"checkpoint {what} tensors do not match the model layout")
    out = {}
    for name, spec in payload.items():
        shape = tuple(spec["shape"])
        if shape != expected[name].shape:
            raise ValueError(
                f"checkpoint {what} tensor {name!r} has shape {shape}, "
                f"expected {expected[name].shape}"
            )
        arr = np.array(spec["data"], dtype=np.float64).reshape(shape)
        out[name] = arr
    return out


def save_checkpoint(
    params: ModelParams, adam_state: AdamState | None, path: str | Path
) -> None:
    """Write params (and optionally optimizer state) as exact-round-trip JSON."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "tensors": _tensor_payload(params.tensors()),
        "adam": None
        if adam_state is None
        else {"m": _tensor_payload(adam_state.m), "v": _tensor_payload(adam_state.v)},
        "step": 0 if adam_state is None else adam_state.t,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, AdamState | None]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {version}")
    config = NetworkConfig.from_dict(payload["config"])
    reference = init_params(config, seed=0)
    tensors = _tensors_from_payload(payload["tensors"], reference.tensors(), "model")
    layers = []
    for idx in range(config.n_lstm_layers):
        layers.append(
            type(reference.layers[0])(
                W=tensors[f"lstm{idx}.W"], U=tensors[f"lstm{idx}.U"], b=tensors[f"lstm{idx}.b"]
            )
        )
    params = ModelParams(
        config=config,
        embedding=tensors["embedding"],
        layers=layers,
        dense_w=tensors["dense.w"],
        dense_b=tensors["dense.b"],
    )
    adam = None
    if payload.get("adam") is not None:
        adam = AdamState(
            m=_tensors_from_payload(payload["adam"]["m"], reference.tensors(), "adam.m"),
            v=_tensors_from_payload(payload["adam"]["v"], reference.tensors(), "adam.v"),
            t=int(payload.get("step", 0)),
        )
    return params, adam
