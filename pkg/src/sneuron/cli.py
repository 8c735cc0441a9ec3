"""Command-line interface.

Exit codes: 0 success, 1 usage error (bad flags, missing input files),
2 data or format error, 3 internal invariant violation. Artifacts are
written to ``<path>.partial`` and renamed into place only on success.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from . import atlas as atlas_mod
from .corpus import Vocabulary, detokenize, load_corpus, load_lexicon, preprocess, read_lines, tokenize
from .decoding import STRATEGIES, DecodeConfig, generate
from .errors import InputError, InvariantError, SneuronError, UsageError
from .factory import load_model, load_plant_spec, model_bytes, synth_planted, synth_random
from .metrics import evaluate, jsd_profile
from .model import DeactivationMask, ModelConfig
from .steering import POLICY_NAMES, mask_for


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


@contextmanager
def _partial(path, mode="w"):
    """Open ``path.partial`` for writing; rename to ``path`` on success."""
    final = Path(path)
    tmp = final.with_name(final.name + ".partial")
    kw = {} if "b" in mode else {"encoding": "utf-8"}
    with open(tmp, mode, **kw) as fh:
        yield fh
    os.replace(tmp, final)


def _write(path, data) -> None:
    with _partial(path, "wb" if isinstance(data, bytes) else "w") as fh:
        fh.write(data)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


# --- model -----------------------------------------------------------------


def cmd_model_synth(args) -> None:
    spec = load_plant_spec(_existing(args.spec, "plant spec"))
    weights, registry = synth_planted(spec)
    _write(args.out, model_bytes(weights))
    reg_path = registry_path(args.out)
    _write(reg_path, json.dumps(registry.to_dict(), indent=1) + "\n")
    _info(f"wrote planted model {args.out} and registry {reg_path}")


def registry_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.name + ".registry.json")


def cmd_model_random(args) -> None:
    cfg = ModelConfig.from_dict(_read_json(_existing(args.config, "model config")))
    weights = synth_random(cfg, args.seed, args.scale)
    _write(args.out, model_bytes(weights))
    _info(f"wrote random model {args.out} (seed {args.seed}, scale {args.scale})")


# --- atlas -----------------------------------------------------------------


def cmd_atlas_build(args) -> None:
    vocab = Vocabulary.load(_existing(args.vocab, "vocabulary"))
    weights = load_model(_existing(args.model, "model"))
    if len(vocab) != weights.config.vocab_size:
        raise InputError(
            f"vocabulary has {len(vocab)} tokens but the model expects {weights.config.vocab_size}"
        )
    k = atlas_mod.k_from_grid(args.k_grid) if args.k_grid else args.k
    corpora = []
    for path, label in ((args.corpus_a, args.label_a), (args.corpus_b, args.label_b)):
        corpus, report = load_corpus(
            _existing(path, "corpus"), vocab, label,
            max_chars=args.max_chars, symbol_threshold=args.symbol_threshold,
        )
        _info(f"{label}: {json.dumps(report.counts())}")
        if not corpus.sentences:
            raise InputError(f"corpus {path} is empty after preprocessing")
        corpora.append(corpus)
    t0 = time.perf_counter()
    atlas = atlas_mod.build_atlas(weights, corpora[0], corpora[1], k, args.label_a, args.label_b)
    _write(args.out, json.dumps(atlas.to_dict(), indent=1) + "\n")
    _info(f"built atlas in {time.perf_counter() - t0:.2f}s -> {args.out}")
    _info(atlas_mod.format_stats(atlas_mod.atlas_stats(atlas)))


def cmd_atlas_stats(args) -> None:
    atlas = atlas_mod.load_atlas(_existing(args.atlas, "atlas"))
    stats = atlas_mod.atlas_stats(atlas)
    print(atlas_mod.format_stats(stats))
    if args.json:
        _write(args.json, json.dumps(stats, indent=1) + "\n")


# --- generation ------------------------------------------------------------


def _decode_config(args) -> DecodeConfig:
    layers = None
    if args.candidate_layers:
        try:
            layers = tuple(int(x) for x in args.candidate_layers.split(","))
        except ValueError:
            raise UsageError(f"--candidate-layers expects comma-separated integers, got {args.candidate_layers!r}")
    if args.strategy == "nucleus" and args.seed is None:
        raise UsageError("--strategy nucleus needs an explicit --seed")
    return DecodeConfig(
        strategy=args.strategy,
        max_new_tokens=args.max_new_tokens,
        alpha=args.alpha,
        candidate_layers=layers,
        style_layer_count=args.style_layers,
        nucleus_p=args.nucleus_p,
        stop_token=args.stop_token,
        seed=0 if args.seed is None else args.seed,
    )


def _load_mask(args, weights) -> DeactivationMask:
    if args.deactivate == "none" and not args.atlas:
        return DeactivationMask()
    if not args.atlas:
        raise UsageError(f"--deactivate {args.deactivate} needs --atlas")
    atlas = atlas_mod.load_atlas(_existing(args.atlas, "atlas"))
    cfg = weights.config
    if (atlas.n_layers, atlas.d_ffn) != (cfg.n_layers, cfg.d_ffn):
        raise InputError(
            f"atlas was built for {atlas.n_layers} layers x {atlas.d_ffn} neurons, "
            f"model has {cfg.n_layers} x {cfg.d_ffn}"
        )
    mask = mask_for(atlas, args.deactivate, args.source)
    mask.check_bounds(cfg)
    return mask


def cmd_transfer(args) -> None:
    vocab = Vocabulary.load(_existing(args.vocab, "vocabulary"))
    weights = load_model(_existing(args.model, "model"))
    config = _decode_config(args)
    mask = _load_mask(args, weights)
    report = preprocess(_existing(args.input, "input").read_bytes().splitlines())
    _info(f"input: {json.dumps(report.counts())}; masking {len(mask)} neurons")
    with _partial(args.out) as fh:
        for line in report.kept:
            prompt = tokenize(line, vocab)
            tokens, steps = generate(weights, prompt, mask, config)
            for rec in steps:
                if config.strategy in ("dola_early", "sneuron") and rec.phi is not None and not rec.phi[rec.token]:
                    raise InvariantError("contrastive decoding chose a token outside the plausible set")
            record = {
                "input": line,
                "output": detokenize(tokens, vocab),
                "output_tokens": tokens,
                "strategy": config.strategy,
                "deactivate": args.deactivate,
                "steps": [s.to_dict() for s in steps],
            }
            fh.write(json.dumps(record) + "\n")
    _info(f"wrote {len(report.kept)} records to {args.out}")


# --- evaluation ------------------------------------------------------------


def _read_hypotheses(path: Path):
    if path.suffix == ".jsonl":
        inputs, outputs = [], []
        for n, line in enumerate(read_lines(path), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                inputs.append(rec["input"])
                outputs.append(rec["output"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{path}:{n}: bad transfer record ({exc})") from None
        return inputs, outputs
    return None, read_lines(path)


def cmd_eval(args) -> None:
    vocab = Vocabulary.load(_existing(args.vocab, "vocabulary"))
    weights = load_model(_existing(args.model, "model"))
    lexicon = load_lexicon(_existing(args.lexicon, "lexicon"), vocab)
    inputs, outputs = _read_hypotheses(_existing(args.hyp, "hypothesis file"))
    if args.src:
        inputs = read_lines(_existing(args.src, "source file"))
    if inputs is None:
        raise UsageError("--src is required unless --hyp is a transfer .jsonl file")
    report = evaluate(inputs, outputs, weights, lambda s: tokenize(s, vocab), lexicon)
    print(report.format_table())
    if args.out:
        _write(args.out, json.dumps(report.to_dict(), indent=1) + "\n")


def cmd_inspect_jsd(args) -> None:
    vocab = Vocabulary.load(_existing(args.vocab, "vocabulary"))
    weights = load_model(_existing(args.model, "model"))
    if args.text is None and args.input is None:
        raise UsageError("inspect jsd needs --text or --input")
    text = args.text if args.text is not None else read_lines(_existing(args.input, "input"))[0]
    prompt = tokenize(text, vocab)
    mask = _load_mask(args, weights)
    profile = jsd_profile(weights, prompt, mask, _decode_config(args))
    print(profile.format_table([vocab.tokens[t] for t in profile.tokens]))
    _write(args.out, profile.to_csv())


# --- parser ----------------------------------------------------------------


def _decode_flags(p: argparse.ArgumentParser, default_strategy: str) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default=default_strategy, help="decoding strategy")
    p.add_argument("--alpha", type=float, default=0.1, help="plausibility threshold relative to the top final-layer probability")
    p.add_argument("--style-layers", type=int, default=4, help="number of last non-final layers used as sneuron candidates")
    p.add_argument("--candidate-layers", help="explicit comma-separated candidate layers (overrides --style-layers)")
    p.add_argument("--nucleus-p", type=float, default=0.9, help="nucleus sampling mass")
    p.add_argument("--max-new-tokens", type=int, default=20, help="tokens to generate per input")
    p.add_argument("--seed", type=int, default=None, help="sampling seed (required for nucleus)")
    p.add_argument("--stop-token", type=int, default=None, help="token id that ends generation")
    p.add_argument("--atlas", help="atlas file (needed unless --deactivate none)")
    p.add_argument("--deactivate", choices=POLICY_NAMES, default="none", help="which exclusive neuron set(s) to zero")
    p.add_argument("--source", help="source style label (default: the atlas's first style)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sneuron", description="Style-neuron identification and steered contrastive decoding on toy transformers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    model = sub.add_parser("model", help="create weight files").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = model.add_parser("synth", help="build a planted-neuron model from a JSON plant spec")
    p.add_argument("--spec", required=True, help="plant spec JSON")
    p.add_argument("--out", required=True, help="output weight file; registry goes to <out>.registry.json")
    p.set_defaults(func=cmd_model_synth)
    p = model.add_parser("random", help="build a seeded random model")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--scale", type=float, default=1.0, help="weight scale (std = scale / sqrt(d_model))")
    p.add_argument("--out", required=True, help="output weight file")
    p.set_defaults(func=cmd_model_random)

    atlas = sub.add_parser("atlas", help="identify style-specific neurons").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = atlas.add_parser("build", help="build an atlas from two style corpora")
    p.add_argument("--model", required=True, help="weight file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--corpus-a", required=True, help="corpus of the first style")
    p.add_argument("--corpus-b", required=True, help="corpus of the second style")
    p.add_argument("--label-a", default="A", help="label of the first style")
    p.add_argument("--label-b", default="B", help="label of the second style")
    k = p.add_mutually_exclusive_group(required=True)
    k.add_argument("--k", type=int, help="top-k size per style")
    k.add_argument("--k-grid", type=int, metavar="N", help="use k = 500 * N (N in 1..20)")
    p.add_argument("--max-chars", type=int, default=120, help="drop corpus lines longer than this")
    p.add_argument("--symbol-threshold", type=float, default=0.3, help="drop lines whose special-symbol fraction exceeds this")
    p.add_argument("--out", required=True, help="output atlas JSON")
    p.set_defaults(func=cmd_atlas_build)
    p = atlas.add_parser("stats", help="overlap and per-layer counts of an atlas")
    p.add_argument("--atlas", required=True, help="atlas JSON")
    p.add_argument("--json", help="also write the stats as JSON here")
    p.set_defaults(func=cmd_atlas_stats)

    p = sub.add_parser("transfer", help="run (steered) generation over an input file")
    p.add_argument("--model", required=True, help="weight file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--input", required=True, help="one source sentence per line")
    p.add_argument("--out", required=True, help="output JSONL, one record per kept input line")
    _decode_flags(p, "sneuron")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval", help="copy ratio, perplexity and target lexicon rate")
    p.add_argument("--hyp", required=True, help="transfer .jsonl output or plain text, one hypothesis per line")
    p.add_argument("--src", help="source sentences aligned with --hyp (optional for .jsonl)")
    p.add_argument("--model", required=True, help="scoring model weight file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--lexicon", required=True, help="target-style lexicon")
    p.add_argument("--out", help="write the report as JSON here")
    p.set_defaults(func=cmd_eval)

    inspect = sub.add_parser("inspect", help="diagnostics").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = inspect.add_parser("jsd", help="per-layer JSD from the final layer at each decode step, as CSV")
    p.add_argument("--model", required=True, help="weight file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--text", help="prompt text")
    p.add_argument("--input", help="file whose first line is the prompt")
    p.add_argument("--out", required=True, help="output CSV (rows = layers, columns = steps)")
    _decode_flags(p, "greedy")
    p.set_defaults(func=cmd_inspect_jsd)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        _info(f"usage error: {exc}")
        return 1
    except InvariantError as exc:
        _info(f"internal error: {exc}")
        return 3
    except SneuronError as exc:
        _info(f"error: {exc}")
        return 2
    except OSError as exc:
        _info(f"error: {exc}")
        return 2
    except Exception as exc:  # anything else is a bug
        _info(f"internal error: {type(exc).__name__}: {exc}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
