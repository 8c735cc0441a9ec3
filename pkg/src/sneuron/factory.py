"""Model construction: seeded-random models, planted-neuron models, and the
``SNTM`` weight container.

Container layout (all integers little-endian)::

    b"SNTM"  u32 version (=1)
    u64 n    n bytes of UTF-8 JSON holding the ModelConfig fields
    for each tensor, in ``ModelConfig.tensor_shapes()`` order:
        u64 n  name bytes (UTF-8)
        u64 count  count * f32 row-major values
"""
from __future__ import annotations

import dataclasses
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigError, ConstructionError, FormatError
from .model import ModelConfig, ModelWeights

MAGIC = b"SNTM"
VERSION = 1
STYLES = ("A", "B")

PathLike = Union[str, os.PathLike]


def zero_weights(config: ModelConfig) -> ModelWeights:
    return ModelWeights(
        config,
        {name: np.zeros(shape, np.float32) for name, shape in config.tensor_shapes().items()},
    )


def synth_random(config: ModelConfig, seed: int, scale: float = 1.0) -> ModelWeights:
    """I.i.d. normal weights scaled by ``scale / sqrt(d_model)``; deterministic in ``seed``."""
    if scale < 0:
        raise ConfigError(f"scale must be non-negative, got {scale}")
    rng = np.random.default_rng(seed)
    std = scale / np.sqrt(config.d_model)
    tensors = {
        name: (rng.standard_normal(shape) * std).astype(np.float32)
        for name, shape in config.tensor_shapes().items()
    }
    return ModelWeights(config, tensors)


def with_identity_layer(weights: ModelWeights, layer: int) -> ModelWeights:
    """Zero a block's attention output and FFN down projection so it passes
    the residual stream through unchanged."""
    d, f = weights.config.d_model, weights.config.d_ffn
    return weights.replace(
        **{
            f"layers.{layer}.attn_o": np.zeros((d, d), np.float32),
            f"layers.{layer}.ffn_down": np.zeros((d, f), np.float32),
        }
    )


# --- planted models --------------------------------------------------------


@dataclass(frozen=True)
class Plant:
    layer: int
    neuron: int
    style: str
    gain: float = 1.0


@dataclass(frozen=True)
class PlantSpec:
    """Recipe for a planted model.

    The three token groups get embeddings in disjoint coordinate blocks of
    the residual stream. A style-X plant reads the mean embedding direction
    of the X group and writes onto a dedicated "style-X writer" coordinate
    that the vocab head maps onto X-token logits. The gains below shape the
    plant-independent part of the vocab head; at their defaults (0) the
    model's only signal comes from plants.
    """

    config: ModelConfig
    style_a_tokens: frozenset
    style_b_tokens: frozenset
    shared_tokens: frozenset
    plants: tuple = ()
    noise_scale: float = 0.0
    seed: int = 0
    write_gain: float = 1.0  # writer-coordinate magnitude per unit plant output
    boost_gain: float = 1.0  # head weight of style tokens on their writer coordinate
    transfer_gain: float = 0.0  # head weight of style tokens on the *other* style's block
    affinity_gain: float = 0.0  # head weight of style tokens on their own block

    def __post_init__(self):
        for name in ("style_a_tokens", "style_b_tokens", "shared_tokens"):
            object.__setattr__(self, name, frozenset(int(t) for t in getattr(self, name)))
        plants = tuple(p if isinstance(p, Plant) else Plant(**p) for p in self.plants)
        object.__setattr__(self, "plants", plants)

    def validate(self) -> None:
        cfg = self.config
        groups = (self.style_a_tokens, self.style_b_tokens, self.shared_tokens)
        if (groups[0] & groups[1]) or (groups[0] & groups[2]) or (groups[1] & groups[2]):
            raise ConstructionError("style_a, style_b and shared token sets must be pairwise disjoint")
        for g in groups:
            bad = [t for t in g if not 0 <= t < cfg.vocab_size]
            if bad:
                raise ConstructionError(f"token ids {sorted(bad)} outside [0, {cfg.vocab_size})")
        if cfg.d_model < 3:
            raise ConstructionError(
                f"d_model = {cfg.d_model} is too small: the three token groups need "
                "orthogonal embedding blocks, which requires d_model >= 3"
            )
        if self.plants and cfg.d_model < 5:
            raise ConstructionError(
                f"d_model = {cfg.d_model} is too small: planted neurons need three "
                "embedding blocks plus two writer coordinates, which requires d_model >= 5"
            )
        seen = set()
        for p in self.plants:
            if p.style not in STYLES:
                raise ConstructionError(f"plant style must be 'A' or 'B', got {p.style!r}")
            if not (0 <= p.layer < cfg.n_layers and 0 <= p.neuron < cfg.d_ffn):
                raise ConstructionError(f"plant ({p.layer}, {p.neuron}) outside model bounds")
            if not p.gain > 0:
                raise ConstructionError(f"plant gain must be positive, got {p.gain}")
            if (p.layer, p.neuron) in seen:
                raise ConstructionError(f"duplicate plant coordinate ({p.layer}, {p.neuron})")
            seen.add((p.layer, p.neuron))
            group = self.style_a_tokens if p.style == "A" else self.style_b_tokens
            if not group:
                raise ConstructionError(f"style {p.style} has plants but no tokens")
        if self.noise_scale < 0:
            raise ConstructionError("noise_scale must be non-negative")

    def to_dict(self) -> dict:
        d = {
            "config": self.config.to_dict(),
            "style_a_tokens": sorted(self.style_a_tokens),
            "style_b_tokens": sorted(self.style_b_tokens),
            "shared_tokens": sorted(self.shared_tokens),
            "plants": [dataclasses.asdict(p) for p in self.plants],
        }
        for name in ("noise_scale", "seed", "write_gain", "boost_gain", "transfer_gain", "affinity_gain"):
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlantSpec":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown plant spec fields: {sorted(unknown)}")
        try:
            d["config"] = ModelConfig.from_dict(d["config"])
            d["plants"] = tuple(Plant(**p) for p in d.get("plants", ()))
            return cls(**d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid plant spec: {exc}") from None


@dataclass(frozen=True)
class PlantRegistry:
    """Ground truth: style label -> set of (layer, neuron)."""

    plants: dict = field(default_factory=dict)

    def __getitem__(self, style: str) -> frozenset:
        return self.plants.get(style, frozenset())

    def to_dict(self) -> dict:
        return {s: [list(c) for c in sorted(self[s])] for s in STYLES}

    @classmethod
    def from_dict(cls, d: dict) -> "PlantRegistry":
        return cls({s: frozenset(tuple(c) for c in d.get(s, ())) for s in STYLES})


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def synth_planted(spec: PlantSpec) -> tuple[ModelWeights, PlantRegistry]:
    spec.validate()
    cfg = spec.config
    d = cfg.d_model
    n_writers = 2 if spec.plants else 0
    m = (d - n_writers) // 3
    blocks = {
        "A": np.arange(0, m),
        "B": np.arange(m, 2 * m),
        "S": np.arange(2 * m, 3 * m),
    }
    writer = {"A": 3 * m, "B": 3 * m + 1} if n_writers else {}
    rest = np.arange(3 * m + n_writers, d)
    groups = {"A": spec.style_a_tokens, "B": spec.style_b_tokens, "S": spec.shared_tokens}

    rng = np.random.default_rng(spec.seed)
    t = {name: np.zeros(shape, np.float64) for name, shape in cfg.tensor_shapes().items()}
    for j in range(cfg.n_layers):
        t[f"layers.{j}.attn_norm"][:] = 1.0
        t[f"layers.{j}.ffn_norm"][:] = 1.0
    t["final_norm"][:] = 1.0

    # strictly positive entries keep every token's dot product with its
    # group mean positive; rms of each embedding is 1
    emb = t["token_embedding"]
    for g in ("A", "B", "S"):
        for tok in sorted(groups[g]):
            emb[tok, blocks[g]] = _unit(rng.uniform(0.1, 1.0, m)) * np.sqrt(d)
    if rest.size:
        others = sorted(set(range(cfg.vocab_size)) - set().union(*groups.values()))
        for tok in others:
            emb[tok, rest] = _unit(rng.uniform(0.1, 1.0, rest.size)) * np.sqrt(d)

    directions = {}
    for g in ("A", "B"):
        if groups[g]:
            directions[g] = _unit(emb[sorted(groups[g])].mean(axis=0))

    head = t["vocab_head"]
    for g, other in (("A", "B"), ("B", "A")):
        for tok in sorted(groups[g]):
            if writer:
                head[tok, writer[g]] = spec.boost_gain
            head[tok, blocks[other]] = spec.transfer_gain * _unit(rng.uniform(0.0, 1.0, m) + 1e-9)
            head[tok, blocks[g]] = spec.affinity_gain * _unit(rng.uniform(0.0, 1.0, m) + 1e-9)

    for p in spec.plants:
        u = directions[p.style]
        t[f"layers.{p.layer}.ffn_gate"][p.neuron] = p.gain * u
        t[f"layers.{p.layer}.ffn_up"][p.neuron] = u
        t[f"layers.{p.layer}.ffn_down"][writer[p.style], p.neuron] = spec.write_gain

    if spec.noise_scale > 0:
        noise_rng = np.random.default_rng([spec.seed, 1])
        std = spec.noise_scale / np.sqrt(d)
        for name, arr in t.items():
            if name.endswith("norm"):
                continue
            arr += noise_rng.standard_normal(arr.shape) * std

    registry = PlantRegistry(
        {s: frozenset((p.layer, p.neuron) for p in spec.plants if p.style == s) for s in STYLES}
    )
    return ModelWeights(cfg, {k: v.astype(np.float32) for k, v in t.items()}), registry


# --- container I/O ---------------------------------------------------------


def model_bytes(weights: ModelWeights) -> bytes:
    cfg_json = json.dumps(weights.config.to_dict(), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(cfg_json)), cfg_json]
    for name in weights.config.tensor_shapes():
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        raw = name.encode("utf-8")
        parts += [struct.pack("<Q", len(raw)), raw, struct.pack("<Q", arr.size), arr.tobytes()]
    return b"".join(parts)


def save_model(weights: ModelWeights, path: PathLike) -> None:
    Path(path).write_bytes(model_bytes(weights))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated file: needed {n} bytes for {what} at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]


def model_from_bytes(data: bytes) -> ModelWeights:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic: not an SNTM weight container")
    (version,) = struct.unpack("<I", r.take(4, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version} (expected {VERSION})")
    n = r.u64("config length")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(n, "config record").decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ConfigError, AttributeError) as exc:
        raise FormatError(f"invalid config record: {exc}") from None
    tensors = {}
    for name, shape in config.tensor_shapes().items():
        name_len = r.u64(f"name length of tensor {name}")
        got = r.take(name_len, f"name of tensor {name}").decode("utf-8", errors="replace")
        if got != name:
            raise FormatError(f"expected tensor {name}, found {got!r}")
        count = r.u64(f"element count of tensor {name}")
        expected = int(np.prod(shape))
        if count != expected:
            raise FormatError(f"tensor {name}: shape mismatch, {count} elements, expected {expected}")
        raw = r.take(4 * count, f"data of tensor {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last tensor")
    try:
        return ModelWeights(config, tensors)
    except ConfigError as exc:
        raise FormatError(str(exc)) from None


def load_model(path: PathLike) -> ModelWeights:
    return model_from_bytes(Path(path).read_bytes())


def load_plant_spec(path: PathLike) -> PlantSpec:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a valid UTF-8 JSON plant spec ({exc})") from None
    return PlantSpec.from_dict(d)
