#!/usr/bin/env python3
"""Deactivation ablation on the planted fixture.

For each fixture seed, decode the source-style prompts under every
(strategy, deactivation) pair and report target-lexicon rate, copy ratio
and perplexity under the unmasked model. Prints one table per seed plus a
mean row, and optionally writes everything as JSON.

  python scripts/run_steering_ablation.py --seeds 0 1 2 --json ablation.json
"""
import argparse
import json

import numpy as np

from sneuron.atlas import build_atlas
from sneuron.corpus import detokenize
from sneuron.decoding import DecodeConfig, generate
from sneuron.fixture import planted_fixture
from sneuron.metrics import copy_ratio, lexicon_rate, perplexity
from sneuron.steering import mask_for

RUNS = [
    ("greedy", "none"),
    ("dola_early", "none"),
    ("sneuron", "none"),
    ("sneuron", "source"),
    ("sneuron", "target"),
    ("sneuron", "both"),
]


def run_seed(seed, n_prompts, max_new, k):
    fx = planted_fixture(n_prompts=n_prompts, seed=seed)
    w, _ = fx.build()
    atlas = build_atlas(w, fx.tokens(fx.corpus_a), fx.tokens(fx.corpus_b), k)
    prompts = fx.tokens(fx.prompts_a)
    rows = []
    for strategy, policy in RUNS:
        mask = mask_for(atlas, policy)
        cfg = DecodeConfig(strategy, max_new_tokens=max_new)
        outs = [generate(w, p, mask, cfg)[0] for p in prompts]
        texts = [detokenize(o, fx.vocab) for o in outs]
        # score prompt + continuation so the copy check has something to compare
        full = [p + o for p, o in zip(prompts, outs)]
        rows.append({
            "strategy": strategy,
            "deactivate": policy,
            "masked": len(mask),
            "target_rate": lexicon_rate(outs, fx.lexicon_b),
            "source_rate": lexicon_rate(outs, fx.lexicon_a),
            "copy_ratio": copy_ratio(fx.prompts_a, texts),
            "ppl": perplexity(w, full).mean,
        })
    return rows


def table(rows):
    head = f"{'strategy':<11} {'deactivate':<10} {'masked':>6} {'target':>7} {'source':>7} {'copy':>6} {'ppl':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r['strategy']:<11} {r['deactivate']:<10} {r['masked']:>6} {r['target_rate']:>7.3f} "
            f"{r['source_rate']:>7.3f} {r['copy_ratio']:>6.3f} {r['ppl']:>8.2f}"
        )
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--prompts", type=int, default=100)
    ap.add_argument("--max-new-tokens", type=int, default=10)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--json", help="write all rows here")
    args = ap.parse_args()

    per_seed = {}
    for seed in args.seeds:
        rows = run_seed(seed, args.prompts, args.max_new_tokens, args.k)
        per_seed[seed] = rows
        print(f"seed {seed}\n{table(rows)}\n")
    if len(args.seeds) > 1:
        mean = []
        for i, (strategy, policy) in enumerate(RUNS):
            col = [per_seed[s][i] for s in args.seeds]
            row = {"strategy": strategy, "deactivate": policy, "masked": col[0]["masked"]}
            for key in ("target_rate", "source_rate", "copy_ratio", "ppl"):
                row[key] = float(np.mean([c[key] for c in col]))
            mean.append(row)
        print(f"mean over {len(args.seeds)} seeds\n{table(mean)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({str(s): r for s, r in per_seed.items()}, fh, indent=1)


if __name__ == "__main__":
    main()
