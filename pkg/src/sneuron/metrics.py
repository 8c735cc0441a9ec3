"""Desk-scale evaluation: copy ratio, perplexity, lexicon rate, and layer-wise
JSD profiles."""
from __future__ import annotations

import csv
import io
import logging
import math
import string
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import BOS
from .decoding import DecodeConfig, generate
from .divergence import jsd
from .errors import InputError
from .model import DeactivationMask, ModelWeights, forward, logprob_sequence

log = logging.getLogger(__name__)

_STRIP = string.punctuation + string.whitespace


def normalize_for_copy(text: str) -> str:
    return " ".join(text.lower().split()).strip(_STRIP)


def copy_ratio(inputs: Sequence[str], outputs: Sequence[str]) -> float:
    """Fraction of outputs identical to their input after normalisation."""
    if len(inputs) != len(outputs):
        raise InputError(f"{len(inputs)} inputs but {len(outputs)} outputs")
    if not inputs:
        raise InputError("copy_ratio needs at least one pair")
    same = sum(normalize_for_copy(a) == normalize_for_copy(b) for a, b in zip(inputs, outputs))
    return same / len(inputs)


@dataclass
class PerplexityReport:
    mean: float
    values: list
    skipped: int = 0


def perplexity(
    weights: ModelWeights,
    sequences: Iterable[Sequence[int]],
    mask: Optional[DeactivationMask] = None,
) -> PerplexityReport:
    values, skipped = [], 0
    for seq in sequences:
        if len(seq) < 2:
            skipped += 1
            continue
        lp = logprob_sequence(weights, seq, mask)
        values.append(math.exp(-lp / (len(seq) - 1)))
    if skipped:
        log.warning("perplexity: skipped %d sequence(s) shorter than 2 tokens", skipped)
    mean = float(np.mean(values)) if values else float("nan")
    return PerplexityReport(mean, values, skipped)


def lexicon_rate(outputs: Iterable[Sequence[int]], lexicon) -> float:
    """Share of generated tokens (BOS excluded) that belong to ``lexicon``."""
    lexicon = frozenset(lexicon)
    total = hits = 0
    for seq in outputs:
        for t in seq:
            if t == BOS:
                continue
            total += 1
            hits += t in lexicon
    return hits / total if total else 0.0


@dataclass
class JSDProfile:
    values: np.ndarray  # (n_layers, steps): JSD(final, layer j) at each decode step
    tokens: list  # token generated at each step

    @property
    def argmax_layers(self) -> list[int]:
        """Per step, the most divergent layer (ties -> latest layer)."""
        out = []
        for col in self.values.T:
            best = col.max()
            out.append(int(np.flatnonzero(col == best)[-1]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", *[f"step{s}" for s in range(self.values.shape[1])]])
        for j, row in enumerate(self.values):
            w.writerow([j, *[repr(float(v)) for v in row]])
        return buf.getvalue()

    def format_table(self, labels: Optional[Sequence[str]] = None) -> str:
        labels = labels or [str(t) for t in self.tokens]
        width = max([8, *[len(l) for l in labels]])
        lines = ["layer " + " ".join(f"{l:>{width}}" for l in labels)]
        for j, row in enumerate(self.values):
            lines.append(f"{j:>5} " + " ".join(f"{v:>{width}.4f}" for v in row))
        return "\n".join(lines)


def jsd_profile(
    weights: ModelWeights,
    prompt: Sequence[int],
    mask: Optional[DeactivationMask] = None,
    config: DecodeConfig = DecodeConfig(strategy="greedy", max_new_tokens=8),
) -> JSDProfile:
    """Decode from ``prompt`` and record, at each step, the JSD between the
    final layer and every earlier layer (row 0 = embedding layer)."""
    tokens, _ = generate(weights, prompt, mask, config)
    n = weights.config.n_layers
    values = np.zeros((n, len(tokens)))
    for step in range(len(tokens)):
        dists, _ = forward(weights, [*prompt, *tokens[:step]], mask)
        values[:, step] = [jsd(dists.final, dists.probs[j]) for j in range(n)]
    return JSDProfile(values, list(tokens))


@dataclass
class EvalReport:
    copy_ratio: float
    mean_perplexity: float
    target_lexicon_rate: float
    count: int
    skipped_perplexity: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("extra"))
        return d

    def format_table(self) -> str:
        rows = [
            ("instances", f"{self.count}"),
            ("copy ratio", f"{self.copy_ratio:.4f}"),
            ("mean perplexity", f"{self.mean_perplexity:.4f}"),
            ("target lexicon rate", f"{self.target_lexicon_rate:.4f}"),
        ]
        if self.skipped_perplexity:
            rows.append(("skipped (too short)", f"{self.skipped_perplexity}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)


def evaluate(
    inputs: Sequence[str],
    outputs: Sequence[str],
    weights: ModelWeights,
    tokenize,
    target_lexicon,
) -> EvalReport:
    """Score outputs against inputs. ``tokenize`` maps text to token ids (BOS first)."""
    ratio = copy_ratio(inputs, outputs)
    seqs = [tokenize(o) for o in outputs]
    ppl = perplexity(weights, seqs)
    if not ppl.values:
        raise InputError("no output is long enough to score for perplexity")
    return EvalReport(
        copy_ratio=ratio,
        mean_perplexity=ppl.mean,
        target_lexicon_rate=lexicon_rate(seqs, target_lexicon),
        count=len(outputs),
        skipped_perplexity=ppl.skipped,
    )
