#!/usr/bin/env python3
"""Which layer diverges most from the final layer, step by step.

Builds a deeper planted model whose plants all sit in the last few layers,
masks the source-style neurons, decodes each prompt greedily and records
the per-layer JSD from the final layer. Prints the average profile and how
often the most divergent layer falls inside the last ``--style-layers``.

  python scripts/jsd_by_layer.py --layers 8 --plant-from 4 --csv profile.csv
"""
import argparse
import dataclasses

import numpy as np

from sneuron.atlas import build_atlas
from sneuron.decoding import DecodeConfig
from sneuron.fixture import FIXTURE_CONFIG, planted_fixture
from sneuron.metrics import jsd_profile
from sneuron.steering import mask_for


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--layers", type=int, default=8)
    ap.add_argument("--plant-from", type=int, default=4, help="first layer that gets plants")
    ap.add_argument("--style-layers", type=int, default=4)
    ap.add_argument("--prompts", type=int, default=30)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--deactivate", default="source", choices=["none", "source", "target", "both"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write the mean profile (layers x steps) here")
    args = ap.parse_args()

    span = range(args.plant_from, args.layers)
    plant_layers = [span[i * len(span) // 8] for i in range(8)]
    cfg = dataclasses.replace(FIXTURE_CONFIG, n_layers=args.layers)
    fx = planted_fixture(n_sentences=100, n_prompts=args.prompts, seed=args.seed, config=cfg, plant_layers=plant_layers)
    w, reg = fx.build()
    atlas = build_atlas(w, fx.tokens(fx.corpus_a), fx.tokens(fx.corpus_b), 8)
    print(f"plants in layers {sorted(set(plant_layers))}; atlas recovers registry: "
          f"{atlas.only_a == reg['A'] and atlas.only_b == reg['B']}")
    mask = mask_for(atlas, args.deactivate)

    profiles, late = [], []
    decode = DecodeConfig("greedy", max_new_tokens=args.steps)
    for p in fx.tokens(fx.prompts_a):
        prof = jsd_profile(w, p, mask, decode)
        profiles.append(prof.values)
        late += [a >= args.layers - args.style_layers for a in prof.argmax_layers]
    mean = np.mean(profiles, axis=0)
    print("mean JSD(final, layer j) per step")
    print("layer " + " ".join(f"{'s' + str(s):>7}" for s in range(mean.shape[1])))
    for j, row in enumerate(mean):
        print(f"{j:>5} " + " ".join(f"{v:>7.4f}" for v in row))
    print(f"max-JSD layer within the last {args.style_layers}: {sum(late)}/{len(late)} = {np.mean(late):.3f}")
    if args.csv:
        np.savetxt(args.csv, mean, delimiter=",", header=",".join(f"step{s}" for s in range(mean.shape[1])))


if __name__ == "__main__":
    main()
