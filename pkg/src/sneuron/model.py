"""Toy decoder-only transformer with neuron capture and early exit.

Architecture: learned absolute positions, pre-norm RMSNorm, causal
multi-head attention, gated FFN ``down(act(gate @ x + b) * (up @ x))``.
A "neuron" is one of the ``d_ffn`` gate channels; its activation is the
post-``act`` gate value.

All network arithmetic is float32. Projections go through ``np.einsum``
rather than ``@`` because BLAS results for a row depend on how many rows
are in the batch; einsum keeps each position's result independent of the
sequence length, so a full-sequence pass and a prefix pass agree bit for
bit. Softmaxes over the vocabulary are taken in float64.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, InputError

ACTIVATIONS = ("silu-glu", "relu")
NORM_EPS = np.float32(1e-6)

LAYER_TENSORS = (
    "attn_q",
    "attn_k",
    "attn_v",
    "attn_o",
    "attn_norm",
    "ffn_norm",
    "ffn_gate",
    "ffn_gate_bias",
    "ffn_up",
    "ffn_down",
)


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    n_heads: int
    d_ffn: int
    vocab_size: int
    max_seq_len: int
    activation_kind: str = "silu-glu"

    def __post_init__(self):
        for name in ("n_layers", "d_model", "n_heads", "d_ffn", "max_seq_len"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.vocab_size, int) or self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {self.vocab_size!r}")
        if self.d_model % self.n_heads:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.activation_kind not in ACTIVATIONS:
            raise ConfigError(
                f"activation_kind must be one of {ACTIVATIONS}, got {self.activation_kind!r}"
            )

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """Names and shapes of every weight tensor, in container order."""
        d, f = self.d_model, self.d_ffn
        shapes = {
            "token_embedding": (self.vocab_size, d),
            "position_embedding": (self.max_seq_len, d),
        }
        per_layer = {
            "attn_q": (d, d),
            "attn_k": (d, d),
            "attn_v": (d, d),
            "attn_o": (d, d),
            "attn_norm": (d,),
            "ffn_norm": (d,),
            "ffn_gate": (f, d),
            "ffn_gate_bias": (f,),
            "ffn_up": (f, d),
            "ffn_down": (d, f),
        }
        for j in range(self.n_layers):
            for name in LAYER_TENSORS:
                shapes[f"layers.{j}.{name}"] = per_layer[name]
        shapes["final_norm"] = (d,)
        shapes["vocab_head"] = (self.vocab_size, d)
        return shapes


@dataclass(frozen=True)
class ModelWeights:
    """Immutable weight set. ``tensors`` maps container names to float32 arrays."""

    config: ModelConfig
    tensors: dict = field(repr=False)

    def __post_init__(self):
        expected = self.config.tensor_shapes()
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ConfigError(f"tensor set mismatch: missing={missing} extra={extra}")
        frozen = {}
        for name, shape in expected.items():
            arr = np.array(self.tensors[name], dtype=np.float32, copy=True)
            if arr.shape != shape:
                raise ConfigError(f"tensor {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"tensor {name} has non-finite entries")
            arr.flags.writeable = False
            frozen[name] = arr
        object.__setattr__(self, "tensors", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def layer(self, j: int, name: str) -> np.ndarray:
        return self.tensors[f"layers.{j}.{name}"]

    def replace(self, **updates: np.ndarray) -> "ModelWeights":
        """Copy with some tensors swapped out (names as in ``tensor_shapes``)."""
        tensors = dict(self.tensors)
        tensors.update(updates)
        return ModelWeights(self.config, tensors)


@dataclass(frozen=True)
class DeactivationMask:
    """Set of ``(layer, neuron)`` coordinates forced to zero in every forward."""

    coords: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self, "coords", frozenset((int(j), int(i)) for j, i in self.coords)
        )

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(sorted(self.coords))

    def __contains__(self, item):
        return item in self.coords

    def check_bounds(self, config: ModelConfig) -> None:
        for j, i in self.coords:
            if not (0 <= j < config.n_layers and 0 <= i < config.d_ffn):
                raise InputError(
                    f"mask coordinate ({j}, {i}) outside model bounds "
                    f"({config.n_layers} layers x {config.d_ffn} neurons)"
                )

    def by_layer(self, n_layers: int) -> list[np.ndarray]:
        out = [[] for _ in range(n_layers)]
        for j, i in sorted(self.coords):
            out[j].append(i)
        return [np.asarray(ix, dtype=np.intp) for ix in out]


@dataclass(frozen=True)
class LayerDistributions:
    """Early-exit next-token distributions; row 0 is the embedding layer."""

    probs: np.ndarray  # (n_layers + 1, vocab_size), float64

    @property
    def final(self) -> np.ndarray:
        return self.probs[-1]

    @property
    def n_layers(self) -> int:
        return self.probs.shape[0] - 1


@dataclass(frozen=True)
class ActivationTrace:
    values: np.ndarray  # (n_layers, seq_len, d_ffn), float32


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _linear(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("td,ed->te", x, w)


def _rmsnorm(x: np.ndarray, gain: np.ndarray) -> np.ndarray:
    ms = np.einsum("td,td->t", x, x)[:, None] / np.float32(x.shape[-1])
    return x / np.sqrt(ms + NORM_EPS) * gain


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        out = np.maximum(x, np.float32(0))
    else:
        with np.errstate(over="ignore"):  # exp(-x) -> inf gives the right limit, 0
            out = x / (np.float32(1) + np.exp(-x))
    # folds -0.0 into +0.0 so zeroing an inactive neuron is a bitwise no-op
    return out + np.float32(0)


def _attention(h: np.ndarray, weights: ModelWeights, j: int) -> np.ndarray:
    cfg = weights.config
    T, H, dh = h.shape[0], cfg.n_heads, cfg.head_dim
    q = _linear(h, weights.layer(j, "attn_q")).reshape(T, H, dh)
    k = _linear(h, weights.layer(j, "attn_k")).reshape(T, H, dh)
    v = _linear(h, weights.layer(j, "attn_v")).reshape(T, H, dh)
    scores = np.einsum("ihd,jhd->hij", q, k) / np.sqrt(np.float32(dh))
    future = np.triu(np.ones((T, T), dtype=bool), k=1)
    scores = np.where(future, np.float32(-np.inf), scores)
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    # left-to-right cumulative sums: trailing masked zeros never change a
    # prefix's sum, so position t is the same whatever follows it
    denom = np.cumsum(e, axis=-1)[..., -1:]
    att = e / denom
    mixed = np.cumsum(att[..., None] * v.transpose(1, 0, 2)[:, None, :, :], axis=2)[:, :, -1, :]
    out = mixed.transpose(1, 0, 2).reshape(T, cfg.d_model)
    return _linear(out, weights.layer(j, "attn_o"))


def _check_tokens(config: ModelConfig, tokens: Sequence[int]) -> np.ndarray:
    ids = np.asarray(list(tokens), dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise InputError("token sequence must be a non-empty 1-d sequence")
    if ids.size > config.max_seq_len:
        raise CapacityError(
            f"sequence length {ids.size} exceeds max_seq_len {config.max_seq_len}"
        )
    bad = (ids < 0) | (ids >= config.vocab_size)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise InputError(
            f"token id {int(ids[pos])} at position {pos} outside vocabulary of size {config.vocab_size}"
        )
    return ids


def _exit_logits(weights: ModelWeights, x: np.ndarray) -> np.ndarray:
    return _linear(_rmsnorm(x, weights["final_norm"]), weights["vocab_head"])


def _run(weights: ModelWeights, tokens, mask: Optional[DeactivationMask], exit_rows: bool):
    cfg = weights.config
    ids = _check_tokens(cfg, tokens)
    masked = None
    if mask is not None and len(mask):
        mask.check_bounds(cfg)
        masked = mask.by_layer(cfg.n_layers)
    T = ids.size
    x = weights["token_embedding"][ids] + weights["position_embedding"][:T]
    trace = np.empty((cfg.n_layers, T, cfg.d_ffn), dtype=np.float32)
    exits = []
    if exit_rows:
        exits.append(_exit_logits(weights, x[-1:])[0])
    for j in range(cfg.n_layers):
        h = _rmsnorm(x, weights.layer(j, "attn_norm"))
        x = x + _attention(h, weights, j)
        h = _rmsnorm(x, weights.layer(j, "ffn_norm"))
        gate = _act(
            _linear(h, weights.layer(j, "ffn_gate")) + weights.layer(j, "ffn_gate_bias"),
            cfg.activation_kind,
        )
        if masked is not None and masked[j].size:
            gate[:, masked[j]] = np.float32(0)
        trace[j] = gate
        up = _linear(h, weights.layer(j, "ffn_up"))
        x = x + _linear(gate * up, weights.layer(j, "ffn_down"))
        if exit_rows:
            exits.append(_exit_logits(weights, x[-1:])[0])
    return x, trace, exits


def forward(
    weights: ModelWeights,
    tokens: Sequence[int],
    mask: Optional[DeactivationMask] = None,
) -> tuple[LayerDistributions, ActivationTrace]:
    """Run the model on ``tokens``.

    Returns the early-exit distribution of every layer at the last position
    (row ``j`` is the exit after ``j`` blocks, row 0 the embeddings) and the
    activation trace over all positions.
    """
    _, trace, exits = _run(weights, tokens, mask, exit_rows=True)
    return LayerDistributions(softmax(np.stack(exits))), ActivationTrace(trace)


def next_token_probs(
    weights: ModelWeights, tokens: Sequence[int], mask: Optional[DeactivationMask] = None
) -> np.ndarray:
    """Standard next-token distribution at the last position."""
    x, _, _ = _run(weights, tokens, mask, exit_rows=False)
    return softmax(_exit_logits(weights, x[-1:])[0])


def activations(
    weights: ModelWeights, tokens: Sequence[int], mask: Optional[DeactivationMask] = None
) -> ActivationTrace:
    _, trace, _ = _run(weights, tokens, mask, exit_rows=False)
    return ActivationTrace(trace)


def logprob_sequence(
    weights: ModelWeights, tokens: Sequence[int], mask: Optional[DeactivationMask] = None
) -> float:
    """Total log-probability (nats) of ``tokens[1:]`` given their prefixes."""
    tokens = list(tokens)
    if len(tokens) < 2:
        raise InputError("logprob_sequence needs at least 2 tokens")
    x, _, _ = _run(weights, tokens, mask, exit_rows=False)
    logp = log_softmax(_exit_logits(weights, x[:-1]))
    targets = np.asarray(tokens[1:])
    return float(logp[np.arange(targets.size), targets].sum())


def as_mask(coords: Optional[Iterable] = None) -> DeactivationMask:
    return DeactivationMask(frozenset(coords or ()))
