import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sneuron.corpus import (
    BOS,
    UNK,
    Vocabulary,
    detokenize,
    load_corpus,
    load_lexicon,
    preprocess,
    read_lines,
    split_words,
    symbol_fraction,
    tokenize,
)
from sneuron.errors import InputError

from .oracles import reference_split


@pytest.fixture
def vocab():
    return Vocabulary.from_words(["i", "have", "not", "seen", "it", "good", "bad", ",", ".", "!", "'", "t"])


def test_preprocess_rules():
    lines = [
        "a" * 121,
        "a" * 120,
        "Hello there.",
        "hello   there.",  # case differs, so not a duplicate
        "Hello  there.",
        "@@@@ ####!!",
        "",
        "   ",
    ]
    r = preprocess(lines)
    assert r.kept == ["a" * 120, "Hello there.", "hello   there."]
    assert r.kept_line_numbers == [2, 3, 4]
    assert r.counts() == {"kept": 3, "too_long": 1, "duplicate": 1, "special_symbols": 1, "empty": 2}


def test_symbol_fraction():
    assert symbol_fraction("@@@@ ####!!") == pytest.approx(10 / 11)
    assert symbol_fraction("abc") == 0.0
    assert symbol_fraction("") == 0.0


def test_symbol_threshold_is_strict():
    # exactly 0.3 is kept, just above is rejected
    assert preprocess(["abcdefg!!!"]).kept == ["abcdefg!!!"]
    assert preprocess(["abcdef!!!!"]).special_symbols == 1


def test_rule_order_charges_first_broken_rule():
    long_symbols = "!" * 130
    r = preprocess([long_symbols, "ok line", "ok line"])
    assert r.too_long == 1 and r.special_symbols == 0 and r.duplicate == 1


line_text = st.text(alphabet=string.ascii_letters + " .,!@#", max_size=40)


@given(st.lists(line_text, max_size=20))
def test_preprocess_idempotent(lines):
    once = preprocess(lines).kept
    assert preprocess(once).kept == once


@given(st.lists(line_text, max_size=20))
def test_preprocess_accounts_for_every_line(lines):
    r = preprocess(lines)
    assert sum(r.counts().values()) == len(lines)


def test_invalid_utf8_names_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"fine\nalso fine\n\xff\xfe oops\n")
    with pytest.raises(InputError, match="line 3"):
        read_lines(p)
    with pytest.raises(InputError, match="line 3"):
        preprocess(p.read_bytes().splitlines())


def test_split_words_examples():
    assert split_words("Good, bad") == ["good", ",", "bad"]
    assert split_words("I haven't!") == ["i", "haven", "'", "t", "!"]
    assert split_words("  ") == []


@given(st.text(alphabet=string.ascii_letters + string.punctuation + " \t", max_size=60))
def test_split_words_matches_reference(text):
    assert split_words(text) == reference_split(text)


def test_tokenize(vocab):
    assert tokenize("Good, bad", vocab) == [BOS, vocab.id("good"), vocab.id(","), vocab.id("bad")]
    assert tokenize("zebra", vocab) == [BOS, UNK]
    assert vocab.id("zebra") == UNK


def test_detokenize_round_trip(vocab):
    for line in ["i have not seen it.", "good, bad!", "it"]:
        assert detokenize(tokenize(line, vocab), vocab) == line


def test_vocabulary_save_load(tmp_path, vocab):
    vocab.save(tmp_path / "v.txt")
    back = Vocabulary.load(tmp_path / "v.txt")
    assert back.tokens == vocab.tokens


def test_vocabulary_rejects_duplicates():
    with pytest.raises(InputError):
        Vocabulary(["<unk>", "<bos>", "a", "a"])


def test_load_corpus_and_lexicon(tmp_path, vocab):
    (tmp_path / "c.txt").write_text("Good, bad.\n\nGood,  bad.\nit\n")
    corpus, report = load_corpus(tmp_path / "c.txt", vocab, "A")
    assert corpus.label == "A"
    assert corpus.line_numbers == [1, 4]
    assert corpus.sentences[1] == [BOS, vocab.id("it")]
    assert report.counts()["duplicate"] == 1 and report.counts()["empty"] == 1
    (tmp_path / "l.txt").write_text("Good\nzebra\nbad\n")
    assert load_lexicon(tmp_path / "l.txt", vocab) == {vocab.id("good"), vocab.id("bad")}
