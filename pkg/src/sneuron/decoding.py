"""Generation loop: greedy, nucleus, early-layer DoLa and sNeuron decoding.

The two contrastive strategies share one step: pick the candidate layer whose
early-exit distribution is furthest (JSD) from the final layer, then rescore
the plausible tokens by ``log p_final / p_premature``. They differ only in
the candidate layers: early layers for ``dola_early``, the last few
("style") layers for ``sneuron``. sNeuron is normally run with the source
style's exclusive neurons masked.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .divergence import jsd
from .errors import CapacityError, ConfigError
from .model import DeactivationMask, LayerDistributions, ModelWeights, forward

STRATEGIES = ("greedy", "nucleus", "dola_early", "sneuron")
CONTRASTIVE = ("dola_early", "sneuron")
PREMATURE_FLOOR = 1e-12


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "greedy"
    max_new_tokens: int = 20
    alpha: float = 0.1
    candidate_layers: Optional[tuple] = None
    style_layer_count: int = 4
    nucleus_p: float = 0.9
    stop_token: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.max_new_tokens < 1:
            raise ConfigError("max_new_tokens must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.nucleus_p <= 1:
            raise ConfigError(f"nucleus_p must lie in (0, 1], got {self.nucleus_p}")
        if self.style_layer_count < 1:
            raise ConfigError("style_layer_count must be positive")
        if self.candidate_layers is not None:
            object.__setattr__(
                self, "candidate_layers", tuple(sorted({int(j) for j in self.candidate_layers}))
            )

    def resolve_candidates(self, n_layers: int) -> tuple[int, ...]:
        """Candidate premature layers J, a subset of {0, ..., n_layers - 1}."""
        if self.candidate_layers is not None:
            layers = self.candidate_layers
            if not layers:
                raise ConfigError("candidate layer set is empty")
            bad = [j for j in layers if not 0 <= j < n_layers]
            if bad:
                raise ConfigError(
                    f"candidate layers {bad} invalid: must lie in [0, {n_layers - 1}] "
                    f"(layer {n_layers} is the final layer)"
                )
            return layers
        if self.strategy == "dola_early":
            return tuple(range(0, max(1, n_layers // 2), 2))
        return tuple(range(max(0, n_layers - self.style_layer_count), n_layers))


@dataclass
class StepRecord:
    token: int
    premature_layer: Optional[int] = None
    jsd: dict = field(default_factory=dict)
    phi: Optional[np.ndarray] = None  # bool mask over the vocabulary
    p_final: float = float("nan")
    p_premature: Optional[float] = None

    @property
    def phi_size(self) -> Optional[int]:
        return None if self.phi is None else int(self.phi.sum())

    def to_dict(self) -> dict:
        return {
            "token": self.token,
            "premature_layer": self.premature_layer,
            "jsd": {str(j): v for j, v in self.jsd.items()},
            "phi_size": self.phi_size,
            "p_final": self.p_final,
            "p_premature": self.p_premature,
        }


def plausible_mask(final_dist: np.ndarray, alpha: float) -> np.ndarray:
    p = np.asarray(final_dist, dtype=np.float64)
    return p >= alpha * p.max()


def plausible_set(final_dist: np.ndarray, alpha: float) -> frozenset:
    """Tokens whose final-layer probability is at least ``alpha`` times the maximum."""
    return frozenset(np.flatnonzero(plausible_mask(final_dist, alpha)).tolist())


def _as_mask(phi, size: int) -> np.ndarray:
    if isinstance(phi, np.ndarray) and phi.dtype == bool:
        return phi
    mask = np.zeros(size, dtype=bool)
    mask[list(phi)] = True
    return mask


def contrast_scores(final_dist, premature_dist, phi) -> np.ndarray:
    """``log(p_final / p_premature)`` on ``phi``, ``-inf`` elsewhere."""
    pn = np.asarray(final_dist, dtype=np.float64)
    pm = np.maximum(np.asarray(premature_dist, dtype=np.float64), PREMATURE_FLOOR)
    inside = _as_mask(phi, pn.size)
    scores = np.full(pn.size, -np.inf)
    scores[inside] = np.log(pn[inside]) - np.log(pm[inside])
    return scores


def contrast(final_dist, premature_dist, phi) -> np.ndarray:
    """Next-token distribution from contrasting the final and a premature layer."""
    scores = contrast_scores(final_dist, premature_dist, phi)
    inside = np.isfinite(scores)
    out = np.zeros(scores.size)
    z = scores[inside] - scores[inside].max()
    e = np.exp(z)
    out[inside] = e / e.sum()
    return out


def select_premature(layer_dists: LayerDistributions, candidates: Sequence[int]) -> tuple[int, dict]:
    """Candidate layer with the largest JSD from the final layer (ties -> latest layer)."""
    final = layer_dists.final
    divs = {int(j): jsd(final, layer_dists.probs[j]) for j in candidates}
    best = max(divs.values())
    return max(j for j, v in divs.items() if v == best), divs


def _argmax_contrast(scores: np.ndarray, final: np.ndarray) -> int:
    # ties on the contrast score go to the higher final-layer probability,
    # then to the lower token id
    best = scores.max()
    tied = np.flatnonzero(scores == best)
    if tied.size == 1:
        return int(tied[0])
    top = final[tied].max()
    return int(tied[final[tied] == top][0])


def nucleus_sample(final_dist: np.ndarray, p: float, rng: np.random.Generator) -> int:
    probs = np.asarray(final_dist, dtype=np.float64)
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, p * cum[-1], side="left")) + 1
    keep = order[:cut]
    kept = probs[keep] / probs[keep].sum()
    return int(keep[rng.choice(keep.size, p=kept)])


def step(
    layer_dists: LayerDistributions,
    config: DecodeConfig,
    candidates: Sequence[int],
    rng: Optional[np.random.Generator] = None,
) -> StepRecord:
    final = layer_dists.final
    if config.strategy == "greedy":
        tok = int(np.argmax(final))
        return StepRecord(tok, p_final=float(final[tok]))
    if config.strategy == "nucleus":
        tok = nucleus_sample(final, config.nucleus_p, rng)
        return StepRecord(tok, p_final=float(final[tok]))
    phi = plausible_mask(final, config.alpha)
    m, divs = select_premature(layer_dists, candidates)
    premature = layer_dists.probs[m]
    tok = _argmax_contrast(contrast_scores(final, premature, phi), final)
    return StepRecord(
        tok,
        premature_layer=m,
        jsd=divs,
        phi=phi,
        p_final=float(final[tok]),
        p_premature=float(premature[tok]),
    )


def generate(
    weights: ModelWeights,
    prompt: Sequence[int],
    mask: Optional[DeactivationMask] = None,
    config: DecodeConfig = DecodeConfig(),
) -> tuple[list[int], list[StepRecord]]:
    """Decode up to ``config.max_new_tokens`` tokens after ``prompt``.

    The mask, if any, applies to every forward pass (prompt positions included).
    Returns the generated tokens (without the prompt, and without a final
    stop token) and one StepRecord per step.
    """
    cfg = weights.config
    prompt = [int(t) for t in prompt]
    if not prompt:
        raise ConfigError("prompt must be non-empty")
    if len(prompt) + config.max_new_tokens > cfg.max_seq_len:
        raise CapacityError(
            f"prompt length {len(prompt)} + max_new_tokens {config.max_new_tokens} "
            f"exceeds max_seq_len {cfg.max_seq_len}"
        )
    candidates = config.resolve_candidates(cfg.n_layers)
    rng = np.random.default_rng(config.seed) if config.strategy == "nucleus" else None
    tokens = list(prompt)
    out, records = [], []
    for _ in range(config.max_new_tokens):
        dists, _ = forward(weights, tokens, mask)
        rec = step(dists, config, candidates, rng)
        records.append(rec)
        if config.stop_token is not None and rec.token == config.stop_token:
            break
        out.append(rec.token)
        tokens.append(rec.token)
    return out, records
