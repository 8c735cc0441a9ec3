"""The planted two-style fixture used by the tests, scripts and README.

Style A plays the formal register, style B the informal one. The vocab head
carries a plant-independent prior that maps each style onto the other
(``transfer_gain``), standing in for the instruction that asks a real model
to rewrite its input; the planted neurons pull generation back toward the
input's own style, like the copy tendency they are meant to model.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Vocabulary, tokenize
from .factory import Plant, PlantSpec, save_model, synth_planted
from .model import ModelConfig

FORMAL = (
    "therefore regards sincerely kindly furthermore moreover however appreciate "
    "request assistance inquire regarding accordingly indeed shall consequently "
    "respectfully nevertheless subsequently hence"
).split()
INFORMAL = (
    "gonna wanna dude lol yeah kinda stuff cool awesome nope hey guys "
    "totally sorta yep gotta dunno wow super ok"
).split()
SHARED = (
    "the a to of and is it that you i we this in for on with be was are have not but"
).split()

PLANT_LAYERS = (1, 1, 2, 2, 3, 3, 3, 3)

FIXTURE_CONFIG = ModelConfig(
    n_layers=4, d_model=32, n_heads=4, d_ffn=64, vocab_size=64, max_seq_len=64
)


def fixture_vocabulary() -> Vocabulary:
    return Vocabulary.from_words([*SHARED, *FORMAL, *INFORMAL])


def plant_spec(
    config: ModelConfig = FIXTURE_CONFIG,
    plants_per_style: int = 8,
    plant_layers=PLANT_LAYERS,
    gain: float = 1.0,
    noise_scale: float = 0.0,
    seed: int = 0,
    **gains,
) -> PlantSpec:
    vocab = fixture_vocabulary()
    if len(vocab) != config.vocab_size:
        raise ValueError(f"fixture vocabulary has {len(vocab)} tokens, config wants {config.vocab_size}")
    rng = np.random.default_rng(seed)
    layers = list(plant_layers)[:plants_per_style]
    coords = []
    taken = set()
    for layer in layers * 2:
        free = [i for i in range(config.d_ffn) if (layer, i) not in taken]
        neuron = int(rng.choice(free))
        taken.add((layer, neuron))
        coords.append((layer, neuron))
    plants = [
        Plant(layer, neuron, "A" if n < len(layers) else "B", gain)
        for n, (layer, neuron) in enumerate(coords)
    ]
    defaults = dict(write_gain=0.02, boost_gain=2.0, transfer_gain=2.0, affinity_gain=0.5)
    defaults.update(gains)
    return PlantSpec(
        config=config,
        style_a_tokens=frozenset(vocab.id(w) for w in FORMAL),
        style_b_tokens=frozenset(vocab.id(w) for w in INFORMAL),
        shared_tokens=frozenset(vocab.id(w) for w in SHARED),
        plants=tuple(plants),
        noise_scale=noise_scale,
        seed=seed,
        **defaults,
    )


def synth_sentences(style_words, n: int, seed: int, style_share: float = 0.5) -> list[str]:
    """``n`` distinct sentences of 4-9 words mixing style words and shared words."""
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < n:
        length = int(rng.integers(4, 10))
        words = [
            style_words[rng.integers(len(style_words))]
            if rng.random() < style_share
            else SHARED[rng.integers(len(SHARED))]
            for _ in range(length)
        ]
        words[int(rng.integers(length))] = style_words[rng.integers(len(style_words))]
        sentence = " ".join(words)
        if sentence not in seen:
            seen.add(sentence)
            out.append(sentence)
    return out


def prompts(style_words, n: int, seed: int) -> list[str]:
    """Short prompts that end in a word from ``style_words``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        length = int(rng.integers(2, 6))
        words = [style_words[rng.integers(len(style_words))] for _ in range(length)]
        out.append(" ".join(words))
    return out


@dataclass
class Fixture:
    spec: PlantSpec
    vocab: Vocabulary
    corpus_a: list  # sentences (text)
    corpus_b: list
    prompts_a: list

    @property
    def lexicon_a(self) -> frozenset:
        return self.spec.style_a_tokens

    @property
    def lexicon_b(self) -> frozenset:
        return self.spec.style_b_tokens

    def tokens(self, lines) -> list[list[int]]:
        return [tokenize(l, self.vocab) for l in lines]

    def build(self):
        return synth_planted(self.spec)

    def write(self, directory) -> dict:
        """Write spec, vocabulary, corpora, lexica and prompts; returns the paths."""
        import json

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "spec": d / "spec.json",
            "vocab": d / "vocab.txt",
            "corpus_a": d / "formal.txt",
            "corpus_b": d / "informal.txt",
            "lexicon_a": d / "formal.lex",
            "lexicon_b": d / "informal.lex",
            "prompts": d / "prompts.txt",
        }
        paths["spec"].write_text(json.dumps(self.spec.to_dict(), indent=1) + "\n", encoding="utf-8")
        self.vocab.save(paths["vocab"])
        for key, lines in (
            ("corpus_a", self.corpus_a),
            ("corpus_b", self.corpus_b),
            ("lexicon_a", FORMAL),
            ("lexicon_b", INFORMAL),
            ("prompts", self.prompts_a),
        ):
            paths[key].write_text("\n".join(lines) + "\n", encoding="utf-8")
        return paths


def planted_fixture(n_sentences: int = 200, n_prompts: int = 100, seed: int = 0, **spec_kw) -> Fixture:
    return Fixture(
        spec=plant_spec(seed=seed, **spec_kw),
        vocab=fixture_vocabulary(),
        corpus_a=synth_sentences(FORMAL, n_sentences, seed=seed + 1),
        corpus_b=synth_sentences(INFORMAL, n_sentences, seed=seed + 2),
        prompts_a=prompts(FORMAL, n_prompts, seed=seed + 3),
    )


def save_fixture_model(fixture: Fixture, path) -> None:
    weights, _ = fixture.build()
    save_model(weights, path)
