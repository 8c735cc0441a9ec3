"""Corpus preprocessing, word-level tokenisation, vocabularies and lexica.

File formats (all UTF-8, one item per line):

* corpus: one sentence per line
* vocabulary: one token per line, id = line number - 1; line 1 is the
  unknown token, line 2 the beginning-of-sentence token
* style lexicon: one token string per line
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import InputError

UNK, BOS = 0, 1
UNK_TOKEN, BOS_TOKEN = "<unk>", "<bos>"
MAX_CHARS = 120
SYMBOL_THRESHOLD = 0.3

PUNCTUATION = frozenset(string.punctuation)
_TOKEN_RE = re.compile(r"[^\s" + re.escape(string.punctuation) + r"]+|[" + re.escape(string.punctuation) + r"]")
_NO_SPACE_BEFORE = frozenset(".,!?;:)]}%")
_NO_SPACE_AFTER = frozenset("([{$#")


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if len(tokens) < 2 or tokens[UNK] != UNK_TOKEN or tokens[BOS] != BOS_TOKEN:
            raise InputError(f"vocabulary must start with {UNK_TOKEN!r} and {BOS_TOKEN!r}")
        if len(set(tokens)) != len(tokens):
            dup = next(t for t in tokens if tokens.count(t) > 1)
            raise InputError(f"duplicate vocabulary entry {dup!r}")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        seen = dict.fromkeys(w for w in words if w not in (UNK_TOKEN, BOS_TOKEN))
        return cls([UNK_TOKEN, BOS_TOKEN, *seen])

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = read_lines(path)
        return cls([l.strip() for l in lines])

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")


@dataclass
class StyleCorpus:
    label: str
    sentences: list  # token-id lists, BOS first
    line_numbers: list = field(default_factory=list)  # 1-based, in the raw file

    def __len__(self):
        return len(self.sentences)


@dataclass
class PreprocessReport:
    kept: list
    kept_line_numbers: list
    too_long: int = 0
    duplicate: int = 0
    special_symbols: int = 0
    empty: int = 0

    @property
    def rejected(self) -> int:
        return self.too_long + self.duplicate + self.special_symbols + self.empty

    def counts(self) -> dict:
        return {
            "kept": len(self.kept),
            "too_long": self.too_long,
            "duplicate": self.duplicate,
            "special_symbols": self.special_symbols,
            "empty": self.empty,
        }


def read_lines(path) -> list[str]:
    """Lines of a UTF-8 file, newline stripped; InputError names the bad line."""
    return decode_lines(Path(path).read_bytes().splitlines())


def decode_lines(raw: Iterable[Union[bytes, str]]) -> list[str]:
    out = []
    for n, line in enumerate(raw, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InputError(f"line {n}: invalid UTF-8 ({exc.reason})") from None
        out.append(line.rstrip("\r\n"))
    return out


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def symbol_fraction(line: str) -> float:
    if not line:
        return 0.0
    symbols = sum(1 for c in line if not (c.isalnum() or c.isspace()))
    return symbols / len(line)


def preprocess(
    lines: Iterable[Union[bytes, str]],
    max_chars: int = MAX_CHARS,
    symbol_threshold: float = SYMBOL_THRESHOLD,
) -> PreprocessReport:
    """Filter raw corpus lines.

    Each rejected line is charged to the first rule it breaks, checked in
    this order: blank, longer than ``max_chars``, duplicate (after
    whitespace normalisation) of an already-kept line, symbol fraction
    above ``symbol_threshold``.
    """
    report = PreprocessReport(kept=[], kept_line_numbers=[])
    seen = set()
    for n, line in enumerate(decode_lines(lines), start=1):
        norm = normalize_whitespace(line)
        if not norm:
            report.empty += 1
        elif len(line) > max_chars:
            report.too_long += 1
        elif norm in seen:
            report.duplicate += 1
        elif symbol_fraction(line) > symbol_threshold:
            report.special_symbols += 1
        else:
            seen.add(norm)
            report.kept.append(line)
            report.kept_line_numbers.append(n)
    return report


def split_words(line: str) -> list[str]:
    """Lowercase, whitespace-split, with every punctuation character its own token."""
    return _TOKEN_RE.findall(line.lower())


def tokenize(line: str, vocab: Vocabulary) -> list[int]:
    return [BOS] + [vocab.id(w) for w in split_words(line)]


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    out = ""
    for i in ids:
        if i == BOS:
            continue
        word = vocab.tokens[i] if 0 <= i < len(vocab) else UNK_TOKEN
        if out and not (word in _NO_SPACE_BEFORE or out[-1] in _NO_SPACE_AFTER):
            out += " "
        out += word
    return out


def load_corpus(path, vocab: Vocabulary, label: str, **preprocess_kw) -> tuple[StyleCorpus, PreprocessReport]:
    report = preprocess(Path(path).read_bytes().splitlines(), **preprocess_kw)
    corpus = StyleCorpus(
        label,
        [tokenize(line, vocab) for line in report.kept],
        list(report.kept_line_numbers),
    )
    return corpus, report


def load_lexicon(path, vocab: Vocabulary) -> frozenset:
    """Token ids of a lexicon file; words missing from the vocabulary are skipped."""
    words = [w.strip().lower() for w in read_lines(path)]
    return frozenset(vocab.index[w] for w in words if w in vocab.index)
