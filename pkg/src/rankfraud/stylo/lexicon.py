"""Bundled English wordlist (50,000 most frequent words, most frequent first)."""

from __future__ import annotations

import gzip
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def english_words() -> tuple[str, ...]:
    with resources.files(__package__).joinpath("data/words.txt.gz").open("rb") as raw:
        with gzip.open(raw, "rt", encoding="utf-8") as fh:
            return tuple(line.strip() for line in fh if line.strip())


@lru_cache(maxsize=1)
def dictionary() -> frozenset[str]:
    return frozenset(english_words())


def is_misspelled(word: str) -> bool:
    """Alphabetic tokens absent from the wordlist (compared lowercase)."""
    w = word.lower()
    if not w.replace("'", "").isalpha() or not w.isascii():
        return False
    return w not in dictionary()
