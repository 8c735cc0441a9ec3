"""Style-specific neuron identification.

A neuron is scored per style by its mean activation over every token
position of that style's corpus. Neurons scoring above zero form the active
set; the ``k`` highest-scoring active neurons form the top-k set; the
exclusive sets are each style's top-k minus the other's.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, InputError
from .model import ModelWeights, activations

ATLAS_FORMAT = "sneuron-atlas"
ATLAS_VERSION = 1
K_GRID_STEP = 500


@dataclass(frozen=True)
class ActivationSummary:
    scores: np.ndarray  # (n_layers, d_ffn) float64 mean activations
    count: int  # token positions aggregated

    def active(self) -> list[tuple[int, int]]:
        return [tuple(map(int, c)) for c in np.argwhere(self.scores > 0)]


def summarize_activations(weights: ModelWeights, corpus) -> ActivationSummary:
    """Mean post-activation value of every neuron over all token positions.

    ``corpus`` is a StyleCorpus or a plain list of token sequences. Sums are
    exactly rounded (``math.fsum``), so the result does not depend on the
    order of the sentences.
    """
    sentences = getattr(corpus, "sentences", corpus)
    if not sentences:
        raise InputError("cannot summarise an empty corpus")
    cfg = weights.config
    traces = [activations(weights, s).values for s in sentences]
    flat = np.concatenate([t.reshape(cfg.n_layers, -1, cfg.d_ffn) for t in traces], axis=1)
    count = flat.shape[1]
    cols = flat.transpose(0, 2, 1).reshape(-1, count).astype(np.float64)
    sums = np.array([math.fsum(c) for c in cols]).reshape(cfg.n_layers, cfg.d_ffn)
    return ActivationSummary(sums / count, count)


Ranked = list  # of (layer, neuron, score) tuples


def select_topk(summary: ActivationSummary, k: int) -> Ranked:
    """Top-k active neurons by descending score; ties by (layer, neuron)."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    s = summary.scores
    ranked = sorted(
        ((int(j), int(i), float(s[j, i])) for j, i in np.argwhere(s > 0)),
        key=lambda r: (-r[2], r[0], r[1]),
    )
    return ranked[:k]


@dataclass(frozen=True)
class NeuronAtlas:
    style_a: str
    style_b: str
    k: int
    n_layers: int
    d_ffn: int
    active_a: int  # |S_A|
    active_b: int
    top_a: tuple  # ranked (layer, neuron, score)
    top_b: tuple

    @property
    def set_a(self) -> frozenset:
        return frozenset((j, i) for j, i, _ in self.top_a)

    @property
    def set_b(self) -> frozenset:
        return frozenset((j, i) for j, i, _ in self.top_b)

    @property
    def only_a(self) -> frozenset:
        return self.set_a - self.set_b

    @property
    def only_b(self) -> frozenset:
        return self.set_b - self.set_a

    @property
    def overlap(self) -> frozenset:
        return self.set_a & self.set_b

    @property
    def styles(self) -> tuple[str, str]:
        return (self.style_a, self.style_b)

    def exclusive(self, style: str) -> frozenset:
        if style == self.style_a:
            return self.only_a
        if style == self.style_b:
            return self.only_b
        raise InputError(f"style {style!r} not in atlas styles {self.styles}")

    def to_dict(self) -> dict:
        score_a = {(j, i): s for j, i, s in self.top_a}
        score_b = {(j, i): s for j, i, s in self.top_b}

        def rows(coords, scores):
            return [[j, i, scores[(j, i)]] for j, i in sorted(coords)]

        return {
            "format": ATLAS_FORMAT,
            "version": ATLAS_VERSION,
            "styles": [self.style_a, self.style_b],
            "k": self.k,
            "n_layers": self.n_layers,
            "d_ffn": self.d_ffn,
            "active_counts": [self.active_a, self.active_b],
            "top_a": [list(r) for r in self.top_a],
            "top_b": [list(r) for r in self.top_b],
            "only_a": rows(self.only_a, score_a),
            "only_b": rows(self.only_b, score_b),
            "overlap": rows(self.overlap, score_a),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuronAtlas":
        if d.get("format") != ATLAS_FORMAT or d.get("version") != ATLAS_VERSION:
            raise FormatError("not a version-1 sneuron atlas")
        try:
            atlas = cls(
                style_a=d["styles"][0],
                style_b=d["styles"][1],
                k=int(d["k"]),
                n_layers=int(d["n_layers"]),
                d_ffn=int(d["d_ffn"]),
                active_a=int(d["active_counts"][0]),
                active_b=int(d["active_counts"][1]),
                top_a=tuple((int(j), int(i), float(s)) for j, i, s in d["top_a"]),
                top_b=tuple((int(j), int(i), float(s)) for j, i, s in d["top_b"]),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed atlas: {exc}") from None
        for key, coords in (("only_a", atlas.only_a), ("only_b", atlas.only_b), ("overlap", atlas.overlap)):
            stored = {(int(r[0]), int(r[1])) for r in d.get(key, ())}
            if stored != coords:
                raise FormatError(f"atlas field {key} inconsistent with top-k sets")
        return atlas


def build_atlas(
    weights: ModelWeights,
    corpus_a,
    corpus_b,
    k: int,
    style_a: str = "A",
    style_b: str = "B",
) -> NeuronAtlas:
    if style_a == style_b:
        raise InputError("the two styles need distinct labels")
    sa = summarize_activations(weights, corpus_a)
    sb = summarize_activations(weights, corpus_b)
    cfg = weights.config
    return NeuronAtlas(
        style_a=style_a,
        style_b=style_b,
        k=k,
        n_layers=cfg.n_layers,
        d_ffn=cfg.d_ffn,
        active_a=int((sa.scores > 0).sum()),
        active_b=int((sb.scores > 0).sum()),
        top_a=tuple(select_topk(sa, k)),
        top_b=tuple(select_topk(sb, k)),
    )


def atlas_stats(atlas: NeuronAtlas) -> dict:
    union = atlas.set_a | atlas.set_b
    per_a = Counter(j for j, _ in atlas.only_a)
    per_b = Counter(j for j, _ in atlas.only_b)
    return {
        "styles": [atlas.style_a, atlas.style_b],
        "k": atlas.k,
        "top_k_sizes": [len(atlas.top_a), len(atlas.top_b)],
        "exclusive_sizes": [len(atlas.only_a), len(atlas.only_b)],
        "overlap_size": len(atlas.overlap),
        "overlap_fraction": len(atlas.overlap) / len(union) if union else 0.0,
        "per_layer_a": [per_a.get(j, 0) for j in range(atlas.n_layers)],
        "per_layer_b": [per_b.get(j, 0) for j in range(atlas.n_layers)],
    }


def format_stats(stats: dict) -> str:
    a, b = stats["styles"]
    lines = [
        f"k = {stats['k']}   top-k sizes: {a}={stats['top_k_sizes'][0]} {b}={stats['top_k_sizes'][1]}",
        f"overlap: {stats['overlap_size']} neurons ({stats['overlap_fraction']:.4f} of union)",
        f"{'layer':>5}  {'only ' + a:>10}  {'only ' + b:>10}",
    ]
    for j, (na, nb) in enumerate(zip(stats["per_layer_a"], stats["per_layer_b"])):
        lines.append(f"{j:>5}  {na:>10}  {nb:>10}")
    lines.append(f"{'total':>5}  {sum(stats['per_layer_a']):>10}  {sum(stats['per_layer_b']):>10}")
    return "\n".join(lines)


def save_atlas(atlas: NeuronAtlas, path) -> None:
    Path(path).write_text(json.dumps(atlas.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_atlas(path) -> NeuronAtlas:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a JSON atlas ({exc})") from None
    return NeuronAtlas.from_dict(d)


def k_from_grid(n: int) -> int:
    """k on the coarse sweep grid (500, 1000, ..., 10000)."""
    if not 1 <= n <= 20:
        raise InputError(f"grid index must be in 1..20, got {n}")
    return K_GRID_STEP * n


def exclusive_sets(top_a: Sequence, top_b: Sequence) -> tuple[frozenset, frozenset, frozenset]:
    """(A only, B only, overlap) for two collections of (layer, neuron[, score])."""
    sa = frozenset(tuple(c[:2]) for c in top_a)
    sb = frozenset(tuple(c[:2]) for c in top_b)
    return sa - sb, sb - sa, sa & sb
