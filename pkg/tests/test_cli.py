import json

import jsonschema
import numpy as np
import pytest

from sneuron import schemas
from sneuron.cli import main, registry_path
from sneuron.corpus import Vocabulary, tokenize
from sneuron.decoding import DecodeConfig, generate
from sneuron.factory import load_model, model_bytes
from sneuron.fixture import planted_fixture


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """Fixture files plus a synthesized model and atlas in one directory."""
    d = tmp_path_factory.mktemp("cli")
    fx = planted_fixture(n_sentences=200, n_prompts=20)
    paths = fx.write(d)
    paths["model"] = d / "m.sntm"
    paths["atlas"] = d / "atlas.json"
    assert main(["model", "synth", "--spec", str(paths["spec"]), "--out", str(paths["model"])]) == 0
    rc = main([
        "atlas", "build", "--model", str(paths["model"]), "--vocab", str(paths["vocab"]),
        "--corpus-a", str(paths["corpus_a"]), "--corpus-b", str(paths["corpus_b"]),
        "--k", "8", "--out", str(paths["atlas"]),
    ])
    assert rc == 0
    paths["dir"] = d
    return paths


def test_synth_writes_registry(run):
    reg = json.loads(registry_path(run["model"]).read_text())
    jsonschema.validate(reg, schemas.REGISTRY)
    atlas = json.loads(run["atlas"].read_text())
    jsonschema.validate(atlas, schemas.ATLAS)
    assert sorted(map(tuple, reg["A"])) == sorted((j, i) for j, i, _ in atlas["only_a"])


def test_synth_is_bit_identical(run, tmp_path):
    out = tmp_path / "again.sntm"
    assert main(["model", "synth", "--spec", str(run["spec"]), "--out", str(out)]) == 0
    assert out.read_bytes() == run["model"].read_bytes()
    assert not (tmp_path / "again.sntm.partial").exists()


def test_random_model(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(n_layers=2, d_model=8, n_heads=2, d_ffn=8, vocab_size=10, max_seq_len=16)))
    a, b = tmp_path / "a.sntm", tmp_path / "b.sntm"
    for out in (a, b):
        assert main(["model", "random", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_atlas_stats(run, tmp_path, capsys):
    out = tmp_path / "stats.json"
    assert main(["atlas", "stats", "--atlas", str(run["atlas"]), "--json", str(out)]) == 0
    stats = json.loads(out.read_text())
    jsonschema.validate(stats, schemas.ATLAS_STATS)
    assert stats["per_layer_a"] == [0, 2, 2, 4]
    assert "overlap" in capsys.readouterr().out


def _transfer(run, out, *extra):
    return main([
        "transfer", "--model", str(run["model"]), "--vocab", str(run["vocab"]),
        "--input", str(run["prompts"]), "--out", str(out), "--max-new-tokens", "6", *extra,
    ])


def test_transfer_and_eval(run, tmp_path):
    out = tmp_path / "t.jsonl"
    assert _transfer(run, out, "--atlas", str(run["atlas"]), "--deactivate", "source") == 0
    records = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(records) == 20
    for r in records:
        jsonschema.validate(r, schemas.TRANSFER_RECORD)
        assert all(s["premature_layer"] in (0, 1, 2, 3) for s in r["steps"])
    rep = tmp_path / "eval.json"
    assert main([
        "eval", "--hyp", str(out), "--model", str(run["model"]), "--vocab", str(run["vocab"]),
        "--lexicon", str(run["lexicon_b"]), "--out", str(rep),
    ]) == 0
    report = json.loads(rep.read_text())
    jsonschema.validate(report, schemas.EVAL_REPORT)
    assert report["target_lexicon_rate"] == 1.0


def test_transfer_is_idempotent(run, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert _transfer(run, out, "--strategy", "nucleus", "--seed", "5") == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_greedy_matches_library(run, tmp_path):
    out = tmp_path / "g.jsonl"
    assert _transfer(run, out, "--strategy", "greedy", "--deactivate", "none") == 0
    w = load_model(run["model"])
    vocab = Vocabulary.load(run["vocab"])
    lines = run["prompts"].read_text().splitlines()
    for line, rec in zip(lines, map(json.loads, out.read_text().splitlines())):
        toks, _ = generate(w, tokenize(line, vocab), None, DecodeConfig("greedy", max_new_tokens=6))
        assert rec["output_tokens"] == toks


def test_eval_copy_of_source(run, tmp_path):
    out = tmp_path / "e.json"
    assert main([
        "eval", "--hyp", str(run["prompts"]), "--src", str(run["prompts"]), "--model", str(run["model"]),
        "--vocab", str(run["vocab"]), "--lexicon", str(run["lexicon_b"]), "--out", str(out),
    ]) == 0
    rep = json.loads(out.read_text())
    assert rep["copy_ratio"] == 1.0 and rep["target_lexicon_rate"] == 0.0


def test_eval_uniform_model_perplexity(run, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(n_layers=1, d_model=4, n_heads=1, d_ffn=4, vocab_size=64, max_seq_len=64)))
    model = tmp_path / "u.sntm"
    assert main(["model", "random", "--config", str(cfg), "--seed", "0", "--scale", "0", "--out", str(model)]) == 0
    out = tmp_path / "e.json"
    assert main([
        "eval", "--hyp", str(run["prompts"]), "--src", str(run["prompts"]), "--model", str(model),
        "--vocab", str(run["vocab"]), "--lexicon", str(run["lexicon_b"]), "--out", str(out),
    ]) == 0
    assert json.loads(out.read_text())["mean_perplexity"] == pytest.approx(64, rel=1e-12)


def test_inspect_jsd(run, tmp_path):
    out = tmp_path / "j.csv"
    assert main([
        "inspect", "jsd", "--model", str(run["model"]), "--vocab", str(run["vocab"]),
        "--text", "hence thus", "--max-new-tokens", "5", "--out", str(out),
    ]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 1 + 4 and len(rows[0].split(",")) == 1 + 5
    vals = np.array([[float(x) for x in r.split(",")[1:]] for r in rows[1:]])
    assert np.all(vals >= 0) and np.all(vals <= np.log(2) + 1e-12)


# --- failure modes ----------------------------------------------------------


def test_usage_errors(run, tmp_path):
    assert main([]) == 1
    assert main(["transfer", "--model", str(run["model"])]) == 1
    assert main(["atlas", "build", "--model", str(run["model"]), "--vocab", str(tmp_path / "nope.txt"),
                 "--corpus-a", "x", "--corpus-b", "y", "--k", "8", "--out", str(tmp_path / "a.json")]) == 1
    assert _transfer(run, tmp_path / "x.jsonl", "--deactivate", "source") == 1  # needs --atlas
    assert _transfer(run, tmp_path / "x.jsonl", "--candidate-layers", "1,x") == 1


def test_nucleus_needs_seed(run, tmp_path):
    assert _transfer(run, tmp_path / "n.jsonl", "--strategy", "nucleus") == 1


def test_d_model_2_spec(run, tmp_path, capsys):
    spec = json.loads(run["spec"].read_text())
    spec["config"]["d_model"] = 2
    spec["config"]["n_heads"] = 1
    bad = tmp_path / "small.json"
    bad.write_text(json.dumps(spec))
    assert main(["model", "synth", "--spec", str(bad), "--out", str(tmp_path / "m.sntm")]) == 2
    assert "d_model" in capsys.readouterr().err


def test_identical_corpora_overlap_one(run, tmp_path):
    atlas, stats = tmp_path / "same.json", tmp_path / "s.json"
    assert main([
        "atlas", "build", "--model", str(run["model"]), "--vocab", str(run["vocab"]),
        "--corpus-a", str(run["corpus_a"]), "--corpus-b", str(run["corpus_a"]),
        "--k", "8", "--out", str(atlas),
    ]) == 0
    assert main(["atlas", "stats", "--atlas", str(atlas), "--json", str(stats)]) == 0
    assert json.loads(stats.read_text())["overlap_fraction"] == 1.0


def test_empty_corpus_is_data_error(run, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("\n\n@@@@\n")
    assert main([
        "atlas", "build", "--model", str(run["model"]), "--vocab", str(run["vocab"]),
        "--corpus-a", str(empty), "--corpus-b", str(run["corpus_b"]), "--k", "8", "--out", str(tmp_path / "a.json"),
    ]) == 2


def test_eval_length_mismatch(run, tmp_path):
    src = tmp_path / "src.txt"
    src.write_text("one line\n")
    assert main([
        "eval", "--hyp", str(run["prompts"]), "--src", str(src), "--model", str(run["model"]),
        "--vocab", str(run["vocab"]), "--lexicon", str(run["lexicon_b"]),
    ]) == 2


def test_infeasible_spec_is_data_error(run, tmp_path):
    spec = json.loads(run["spec"].read_text())
    spec["plants"].append(dict(spec["plants"][0]))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(spec))
    out = tmp_path / "m.sntm"
    assert main(["model", "synth", "--spec", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_truncated_model_is_data_error(run, tmp_path):
    bad = tmp_path / "trunc.sntm"
    bad.write_bytes(run["model"].read_bytes()[:-100])
    assert main(["atlas", "build", "--model", str(bad), "--vocab", str(run["vocab"]),
                 "--corpus-a", str(run["corpus_a"]), "--corpus-b", str(run["corpus_b"]),
                 "--k", "8", "--out", str(tmp_path / "a.json")]) == 2
    assert not (tmp_path / "a.json").exists()


def test_atlas_model_mismatch(run, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(n_layers=4, d_model=32, n_heads=4, d_ffn=32, vocab_size=64, max_seq_len=64)))
    model = tmp_path / "r.sntm"
    assert main(["model", "random", "--config", str(cfg), "--seed", "0", "--out", str(model)]) == 0
    rc = main(["transfer", "--model", str(model), "--vocab", str(run["vocab"]), "--input", str(run["prompts"]),
               "--out", str(tmp_path / "t.jsonl"), "--atlas", str(run["atlas"]), "--deactivate", "source"])
    assert rc == 2
    assert not (tmp_path / "t.jsonl").exists()


def test_bad_candidate_layer_is_data_error(run, tmp_path):
    out = tmp_path / "t.jsonl"
    assert _transfer(run, out, "--candidate-layers", "4") == 2
    assert not out.exists()


def test_capacity_error(run, tmp_path):
    assert _transfer(run, tmp_path / "t.jsonl", "--max-new-tokens", "100") == 2


def test_help_mentions_every_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["transfer", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--strategy", "--alpha", "--style-layers", "--candidate-layers", "--nucleus-p",
                 "--max-new-tokens", "--seed", "--deactivate"):
        assert flag in text
