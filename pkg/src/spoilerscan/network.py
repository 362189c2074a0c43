"""From-scratch embedding + stacked-LSTM binary classifier in float64 numpy.

Architecture: embedding lookup, two LSTM layers, inverted dropout on the
final hidden state, and a single-unit dense head producing a logit.  Padding
is never processed; each sequence runs for exactly its true length.

Gate layout: the 4H rows of W, U, b are blocks [i | f | g | o] for the
input gate, forget gate, cell candidate, and output gate.  Cell update:

    i, f, o = sigmoid(pre_i), sigmoid(pre_f), sigmoid(pre_o)
    g       = tanh(pre_g)
    c'      = f * c + i * g
    h'      = o * tanh(c')

`backward` is exact backpropagation through time over the cached forward
pass; `finite_difference_grads` is the independent numeric oracle and
`grad_check` compares the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .textprep import TokenSequence

__all__ = [
    "NetworkConfig",
    "LstmLayerParams",
    "ModelParams",
    "ForwardCache",
    "AdamState",
    "sigmoid",
    "bce_with_logits",
    "dropout_mask",
    "init_params",
    "init_adam_state",
    "lstm_cell",
    "forward",
    "backward",
    "adam_step",
    "zero_grads",
    "finite_difference_grads",
    "max_relative_error",
    "grad_check",
]


@dataclass(frozen=True)
class NetworkConfig:
    vocab_size: int = 8000
    embed_dim: int = 32
    hidden_dim: int = 32
    n_lstm_layers: int = 2
    dropout_rate: float = 0.4
    max_len: int = 600

    def __post_init__(self) -> None:
        for name in ("vocab_size", "embed_dim", "hidden_dim", "n_lstm_layers", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "n_lstm_layers": self.n_lstm_layers,
            "dropout_rate": self.dropout_rate,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        return cls(**data)


@dataclass
class LstmLayerParams:
    W: np.ndarray  # [4H, in_dim] input weights
    U: np.ndarray  # [4H, H] recurrent weights
    b: np.ndarray  # [4H]


@dataclass
class ModelParams:
    config: NetworkConfig
    embedding: np.ndarray  # [vocab_size, embed_dim]
    layers: list[LstmLayerParams]
    dense_w: np.ndarray  # [hidden_dim]
    dense_b: np.ndarray  # [1]

    def tensors(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every trainable tensor."""
        out = {"embedding": self.embedding}
        for idx, layer in enumerate(self.layers):
            out[f"lstm{idx}.W"] = layer.W
            out[f"lstm{idx}.U"] = layer.U
            out[f"lstm{idx}.b"] = layer.b
        out["dense.w"] = self.dense_w
        out["dense.b"] = self.dense_b
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            embedding=self.embedding.copy(),
            layers=[
                LstmLayerParams(W=l.W.copy(), U=l.U.copy(), b=l.b.copy()) for l in self.layers
            ],
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
        )


def sigmoid(x):
    """Numerically stable logistic function for scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def bce_with_logits(logit, label):
    """Binary cross-entropy on a pre-sigmoid logit, stable at large |logit|.

    loss = max(z, 0) - z*y + log(1 + exp(-|z|));  dloss/dz = sigmoid(z) - y.
    """
    z = np.asarray(logit, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(loss) if loss.ndim == 0 else loss


def dropout_mask(rng: np.random.Generator, size: int, rate: float) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or 1/(1-rate), so eval is identity."""
    if rate == 0.0:
        return np.ones(size, dtype=np.float64)
    keep = rng.random(size) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def init_params(config: NetworkConfig, seed: int) -> ModelParams:
    """Seeded initialization.

    Embedding ~ U(-0.05, 0.05); W, U, and the dense weights use the scaled
    uniform bound sqrt(6 / (fan_in + fan_out)); biases are zero except the
    forget-gate block, which starts at 1.0 to keep early gradients alive.
    """
    rng = np.random.default_rng(seed)
    H = config.hidden_dim
    embedding = rng.uniform(-0.05, 0.05, size=(config.vocab_size, config.embed_dim))
    layers = []
    for layer_idx in range(config.n_lstm_layers):
        in_dim = config.embed_dim if layer_idx == 0 else H
        w_bound = math.sqrt(6.0 / (in_dim + 4 * H))
        u_bound = math.sqrt(6.0 / (H + 4 * H))
        W = rng.uniform(-w_bound, w_bound, size=(4 * H, in_dim))
        U = rng.uniform(-u_bound, u_bound, size=(4 * H, H))
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0
        layers.append(LstmLayerParams(W=W, U=U, b=b))
    d_bound = math.sqrt(6.0 / (H + 1))
    dense_w = rng.uniform(-d_bound, d_bound, size=H)
    dense_b = np.zeros(1)
    return ModelParams(
        config=config, embedding=embedding, layers=layers, dense_w=dense_w, dense_b=dense_b
    )


def lstm_cell(
    layer: LstmLayerParams, x: np.ndarray, h: np.ndarray, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """One LSTM step. Returns (h', c', (gates, tanh(c'))) for the BPTT cache.

    `gates` holds the post-activation blocks [i | f | g | o].
    """
    H = h.shape[0]
    pre = layer.W @ x + layer.U @ h + layer.b
    gates = np.empty_like(pre)
    gates[: 2 * H] = sigmoid(pre[: 2 * H])  # i, f
    gates[2 * H : 3 * H] = np.tanh(pre[2 * H : 3 * H])  # g
    gates[3 * H :] = sigmoid(pre[3 * H :])  # o
    c_new = gates[H : 2 * H] * c + gates[:H] * gates[2 * H : 3 * H]
    tc = np.tanh(c_new)
    h_new = gates[3 * H :] * tc
    return h_new, c_new, (gates, tc)


@dataclass
class _LayerCache:
    X: np.ndarray  # [T, in_dim] layer inputs
    H: np.ndarray  # [T+1, H] hidden states, H[0] is the initial zero state
    C: np.ndarray  # [T+1, H] cell states
    gates: np.ndarray  # [T, 4H] post-activation gate values
    TC: np.ndarray  # [T, H] tanh of the new cell state


@dataclass
class ForwardCache:
    """Everything backward needs; covers exactly true_len steps."""

    ids: np.ndarray  # the true_len real token ids
    true_len: int
    layer_caches: list[_LayerCache] = field(default_factory=list)
    mask: np.ndarray = field(default_factory=lambda: np.ones(1))
    h_drop: np.ndarray = field(default_factory=lambda: np.zeros(1))
    logit: float = 0.0


def forward(
    params: ModelParams, seq: TokenSequence, rng: np.random.Generator | None = None
) -> tuple[float, ForwardCache]:
    """Run the classifier over the real tokens of `seq`; padding is ignored.

    Pass a generator as `rng` to enable train-mode dropout on the final
    hidden state; with rng=None (eval) the pass is deterministic.  Returns
    the pre-sigmoid logit and the cache for `backward`.
    """
    config = params.config
    T = seq.true_len
    if T < 1:
        raise ValueError("cannot run forward on an empty sequence (true_len = 0)")
    ids = np.asarray(seq.ids[:T], dtype=np.int64)
    cache = ForwardCache(ids=ids.copy(), true_len=T)

    H = config.hidden_dim
    layer_input = params.embedding[ids]  # [T, embed_dim]
    for layer in params.layers:
        lc = _LayerCache(
            X=layer_input,
            H=np.zeros((T + 1, H)),
            C=np.zeros((T + 1, H)),
            gates=np.empty((T, 4 * H)),
            TC=np.empty((T, H)),
        )
        for t in range(T):
            h_new, c_new, (gates, tc) = lstm_cell(layer, layer_input[t], lc.H[t], lc.C[t])
            lc.H[t + 1] = h_new
            lc.C[t + 1] = c_new
            lc.gates[t] = gates
            lc.TC[t] = tc
        cache.layer_caches.append(lc)
        layer_input = lc.H[1:]

    if rng is not None:
        cache.mask = dropout_mask(rng, H, config.dropout_rate)
    else:
        cache.mask = np.ones(H)
    h_last = cache.layer_caches[-1].H[T]
    cache.h_drop = h_last * cache.mask
    cache.logit = float(params.dense_w @ cache.h_drop + params.dense_b[0])
    return cache.logit, cache


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    """A fresh gradient accumulator matching every parameter tensor."""
    return {name: np.zeros_like(arr) for name, arr in params.tensors().items()}


def _lstm_layer_backward(
    layer: LstmLayerParams,
    lc: _LayerCache,
    dh_inject: np.ndarray,
    grads: dict[str, np.ndarray],
    prefix: str,
) -> np.ndarray:
    """BPTT through one layer given per-step gradients flowing into h_t.

    Accumulates into grads[prefix.W/U/b] and returns dX [T, in_dim].
    """
    T, H = lc.TC.shape
    dX = np.empty_like(lc.X)
    dh_rec = np.zeros(H)
    dc = np.zeros(H)
    dW, dU, db = grads[f"{prefix}.W"], grads[f"{prefix}.U"], grads[f"{prefix}.b"]
    for t in range(T - 1, -1, -1):
        g = lc.gates[t]
        i, f, gg, o = g[:H], g[H : 2 * H], g[2 * H : 3 * H], g[3 * H :]
        tc = lc.TC[t]
        dh = dh_inject[t] + dh_rec
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * gg
        dg = dc * i
        df = dc * lc.C[t]
        dpre = np.empty(4 * H)
        dpre[:H] = di * i * (1.0 - i)
        dpre[H : 2 * H] = df * f * (1.0 - f)
        dpre[2 * H : 3 * H] = dg * (1.0 - gg * gg)
        dpre[3 * H :] = do * o * (1.0 - o)
        dW += np.outer(dpre, lc.X[t])
        dU += np.outer(dpre, lc.H[t])
        db += dpre
        dX[t] = layer.W.T @ dpre
        dh_rec = layer.U.T @ dpre
        dc = dc * f
    return dX


def backward(
    params: ModelParams,
    cache: ForwardCache,
    label: float,
    acc: dict[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of bce_with_logits(logit, label) for every tensor.

    Untouched embedding rows get zero gradient.  Pass `acc` to add this
    example's gradients into an existing accumulator (done in index order by
    the trainer for determinism); otherwise a fresh dict is returned.
    """
    config = params.config
    if len(cache.layer_caches) != len(params.layers):
        raise ValueError("cache does not match params: wrong layer count")
    if cache.layer_caches[0].X.shape[1] != config.embed_dim or cache.layer_caches[0].TC.shape[
        1
    ] != config.hidden_dim:
        raise ValueError("cache does not match params: wrong dimensions")
    grads = acc if acc is not None else zero_grads(params)

    dlogit = sigmoid(cache.logit) - label
    grads["dense.w"] += dlogit * cache.h_drop
    grads["dense.b"] += dlogit

    T = cache.true_len
    H = config.hidden_dim
    dh_inject = np.zeros((T, H))
    dh_inject[T - 1] = dlogit * params.dense_w * cache.mask
    for layer_idx in range(len(params.layers) - 1, -1, -1):
        dX = _lstm_layer_backward(
            params.layers[layer_idx],
            cache.layer_caches[layer_idx],
            dh_inject,
            grads,
            f"lstm{layer_idx}",
        )
        dh_inject = dX
    # dh_inject is now [T, embed_dim]: scatter-add into the touched rows.
    np.add.at(grads["embedding"], cache.ids, dh_inject)
    return grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            t=self.t,
        )


def init_adam_state(params: ModelParams) -> AdamState:
    return AdamState(m=zero_grads(params), v=zero_grads(params), t=0)


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 0.003,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """Standard bias-corrected Adam update, applied in place."""
    tensors = params.tensors()
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for tensor {name!r}")
    state.t += 1
    t = state.t
    for name, theta in tensors.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


def finite_difference_grads(
    params: ModelParams, seq: TokenSequence, label: float, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central-difference gradients of the loss over every parameter element.

    Independent of `backward`: each element is perturbed by +/-eps and the
    loss recomputed with an eval-mode forward pass.  Intended for small
    configurations only.
    """

    def loss() -> float:
        logit, _ = forward(params, seq)
        return bce_with_logits(logit, label)

    numeric: dict[str, np.ndarray] = {}
    for name, arr in params.tensors().items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + eps
            loss_plus = loss()
            flat[k] = original - eps
            loss_minus = loss()
            flat[k] = original
            gflat[k] = (loss_plus - loss_minus) / (2.0 * eps)
        numeric[name] = g
    return numeric


def max_relative_error(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> float:
    """Worst per-tensor relative error |a - b| / max(|a|, |b|, 1e-12).

    |.| is the L2 norm over each parameter group.  Comparing group norms
    keeps the check meaningful in double precision: single elements with
    true gradient ~1e-10 sit below the noise floor of a central difference
    of an O(1) loss, while any structural mistake shifts a whole group.
    """
    worst = 0.0
    for name in a:
        num = float(np.linalg.norm(a[name] - b[name]))
        den = max(float(np.linalg.norm(a[name])), float(np.linalg.norm(b[name])), 1e-12)
        worst = max(worst, num / den)
    return worst


def grad_check(config: NetworkConfig, seed: int, eps: float = 1e-5) -> float:
    """Compare backward against central finite differences on a random example.

    Builds seeded params and a full-length random token sequence, then
    reports the worst relative error over all parameter groups.  Dropout is
    off (eval-mode passes) so both routes see the same function.
    """
    params = init_params(config, seed)
    rng = np.random.default_rng(seed + 1)
    T = config.max_len
    ids = np.zeros(config.max_len, dtype=np.int64)
    ids[:T] = rng.integers(1, config.vocab_size, size=T)  # non-pad ids only
    label = float(rng.integers(0, 2))
    seq = TokenSequence(ids=ids, true_len=T)

    _, cache = forward(params, seq)
    analytic = backward(params, cache, label)
    numeric = finite_difference_grads(params, seq, label, eps=eps)
    return max_relative_error(analytic, numeric)
