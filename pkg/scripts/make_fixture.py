#!/usr/bin/env python3
"""Write the planted two-style fixture (spec, vocab, corpora, lexica, prompts).

Usage:
  python scripts/make_fixture.py --out fixture/
  sneuron model synth --spec fixture/spec.json --out fixture/model.sntm
"""
import argparse
import json

from sneuron.fixture import planted_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sentences", type=int, default=200, help="sentences per style corpus")
    parser.add_argument("--prompts", type=int, default=100)
    parser.add_argument("--noise", type=float, default=0.0, help="background weight noise scale")
    args = parser.parse_args()

    fx = planted_fixture(n_sentences=args.sentences, n_prompts=args.prompts, seed=args.seed, noise_scale=args.noise)
    paths = fx.write(args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=1))


if __name__ == "__main__":
    main()
