"""Review instances and their stylometric feature vectors.

A review instance bundles every review one worker (or one detected
component) wrote for one product. Counts are accumulated review by review,
so n-grams never span two reviews and the order of reviews inside an
instance does not matter.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ..corpus import Corpus, Review
from .lexicon import is_misspelled
from .tagger import TAGS, tag_token, tokenize

log = logging.getLogger(__name__)

CANDIDATE = "candidate"
MIN_REVIEWS = 5
DEFAULT_K_TOP = {"letter2": 200, "letter3": 200, "word2": 300, "word3": 300}

PUNCTUATION = ".,!?;:'\"-()…"
LETTERS = "abcdefghijklmnopqrstuvwxyz"
_WORD_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:[.,:/]\d+)*%?")


@dataclass(frozen=True)
class ReviewInstance:
    worker_id: str
    product_id: str
    texts: tuple[str, ...]
    account_ids: tuple[str, ...] = ()
    review_ids: tuple[str, ...] = ()

    @property
    def instance_id(self) -> str:
        return f"{self.worker_id}@{self.product_id}"

    @classmethod
    def from_reviews(cls, worker_id: str, product_id: str, reviews: Iterable[Review]) -> "ReviewInstance":
        reviews = sorted(reviews, key=lambda r: (r.timestamp, r.review_id))
        return cls(
            worker_id,
            product_id,
            tuple(r.text for r in reviews),
            tuple(sorted({r.account_id for r in reviews})),
            tuple(r.review_id for r in reviews),
        )


def group_instances(corpus: Corpus, min_reviews: int = MIN_REVIEWS) -> list[ReviewInstance]:
    """One instance per (worker, product) with at least ``min_reviews`` reviews."""
    if not corpus.attributions:
        raise ValueError("corpus has no worker attributions")
    grouped: dict[tuple[str, str], list[Review]] = defaultdict(list)
    for product in sorted(corpus.products):
        for r in corpus.latest_reviews_of(product):
            worker = corpus.attributions.get(r.account_id)
            if worker is not None:
                grouped[(worker, product)].append(r)
    instances, dropped = [], 0
    for (worker, product), reviews in sorted(grouped.items()):
        if len(reviews) >= min_reviews:
            instances.append(ReviewInstance.from_reviews(worker, product, reviews))
        else:
            dropped += 1
    if dropped:
        log.info("dropped %d (worker, product) group(s) with fewer than %d reviews", dropped, min_reviews)
    return instances


def _ngrams(seq, n):
    return [" ".join(seq[i : i + n]) if not isinstance(seq, str) else seq[i : i + n] for i in range(len(seq) - n + 1)]


@dataclass
class InstanceCounts:
    chars: int = 0
    nonspace: int = 0
    tokens: int = 0
    token_chars: int = 0
    upper: int = 0
    digits: int = 0
    special: int = 0
    numbers: int = 0
    words: int = 0
    misspelled: int = 0
    letters: Counter = field(default_factory=Counter)
    punct: Counter = field(default_factory=Counter)
    grams: dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))

    def add_review(self, text: str) -> None:
        text = unicodedata.normalize("NFC", text)
        self.chars += len(text)
        for ch in text:
            if ch.isspace():
                continue
            self.nonspace += 1
            if "a" <= ch <= "z" or "A" <= ch <= "Z":
                self.letters[ch.lower()] += 1
                self.upper += ch.isupper()
            elif "0" <= ch <= "9":
                self.digits += 1
            elif ch in PUNCTUATION:
                self.punct[ch] += 1
            else:
                self.special += 1
        raw_tokens = text.split()
        self.tokens += len(raw_tokens)
        self.token_chars += sum(len(t) for t in raw_tokens)
        self.numbers += sum(1 for t in raw_tokens if _NUMBER_RE.fullmatch(t.strip(PUNCTUATION)))

        words = [w.lower() for w in _WORD_RE.findall(text)]
        self.words += len(words)
        self.misspelled += sum(1 for w in words if is_misspelled(w))
        for w in words:
            letters = w.replace("'", "")
            self.grams["letter2"].update(_ngrams(letters, 2))
            self.grams["letter3"].update(_ngrams(letters, 3))
        self.grams["word2"].update(_ngrams(words, 2))
        self.grams["word3"].update(_ngrams(words, 3))
        tags = [tag_token(t) for t in tokenize(text)]
        self.grams["pos1"].update(tags)
        self.grams["pos2"].update(_ngrams(tags, 2))
        self.grams["pos3"].update(_ngrams(tags, 3))


@functools.lru_cache(maxsize=8192)
def count_instance(instance: ReviewInstance) -> InstanceCounts:
    # Cached: callers must treat the result as read-only.
    counts = InstanceCounts()
    for text in instance.texts:
        counts.add_review(text)
    return counts


def _top(counter: Counter, k: int | None) -> tuple[str, ...]:
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(g for g, _ in (ranked if k is None else ranked[:k]))


@dataclass(frozen=True)
class FeatureSpace:
    """Frozen n-gram vocabularies; defines the layout of every feature vector."""

    letter2: tuple[str, ...] = ()
    letter3: tuple[str, ...] = ()
    word2: tuple[str, ...] = ()
    word3: tuple[str, ...] = ()
    pos2: tuple[str, ...] = ()
    pos3: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        names = ["chars_log1p", "chars_per_token"]
        names += [f"letter_per_char:{c}" for c in LETTERS]
        names += ["upper_per_char", "special_per_char"]
        names += [f"punct_per_char:{p}" for p in PUNCTUATION]
        names += ["digit_per_char", "number_per_token"]
        names += [f"letter2_share:{g}" for g in self.letter2]
        names += [f"letter3_share:{g}" for g in self.letter3]
        names += [f"pos1_share:{t}" for t in TAGS]
        names += [f"pos2_share:{g}" for g in self.pos2]
        names += [f"pos3_share:{g}" for g in self.pos3]
        names += [f"word2_share:{g}" for g in self.word2]
        names += [f"word3_share:{g}" for g in self.word3]
        names += ["misspelled_per_word"]
        return names

    def __len__(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict[str, list[str]]:
        return {k: list(getattr(self, k)) for k in ("letter2", "letter3", "word2", "word3", "pos2", "pos3")}

    @classmethod
    def from_dict(cls, d: Mapping[str, Iterable[str]]) -> "FeatureSpace":
        return cls(**{k: tuple(v) for k, v in d.items()})


def build_feature_space(
    instances: Iterable[ReviewInstance], k_top: int | Mapping[str, int] | None = None
) -> FeatureSpace:
    """Vocabularies of the most frequent n-grams over the training instances.

    ``k_top`` is one limit for all four letter/word n-gram vocabularies or a
    mapping with keys ``letter2``, ``letter3``, ``word2``, ``word3``. POS
    n-grams are never truncated. Frequency ties break lexicographically.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one training instance")
    if k_top is None:
        limits = dict(DEFAULT_K_TOP)
    elif isinstance(k_top, Mapping):
        limits = {**DEFAULT_K_TOP, **k_top}
    else:
        limits = dict.fromkeys(DEFAULT_K_TOP, int(k_top))
    totals: dict[str, Counter] = defaultdict(Counter)
    for inst in instances:
        for kind, counter in count_instance(inst).grams.items():
            totals[kind].update(counter)
    return FeatureSpace(
        letter2=_top(totals["letter2"], limits["letter2"]),
        letter3=_top(totals["letter3"], limits["letter3"]),
        word2=_top(totals["word2"], limits["word2"]),
        word3=_top(totals["word3"], limits["word3"]),
        pos2=_top(totals["pos2"], None),
        pos3=_top(totals["pos3"], None),
    )


def _share(counter: Counter, vocab: Iterable[str]) -> list[float]:
    total = sum(counter.values())
    if not total:
        return [0.0 for _ in vocab]
    return [counter.get(g, 0) / total for g in vocab]


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def extract_features(instance: ReviewInstance, space: FeatureSpace) -> np.ndarray:
    c = count_instance(instance)
    g = c.grams
    values = [math.log1p(c.chars), _ratio(c.token_chars, c.tokens)]
    values += [_ratio(c.letters[ch], c.nonspace) for ch in LETTERS]
    values += [_ratio(c.upper, c.nonspace), _ratio(c.special, c.nonspace)]
    values += [_ratio(c.punct[p], c.nonspace) for p in PUNCTUATION]
    values += [_ratio(c.digits, c.nonspace), _ratio(c.numbers, c.tokens)]
    values += _share(g["letter2"], space.letter2)
    values += _share(g["letter3"], space.letter3)
    values += _share(g["pos1"], TAGS)
    values += _share(g["pos2"], space.pos2)
    values += _share(g["pos3"], space.pos3)
    values += _share(g["word2"], space.word2)
    values += _share(g["word3"], space.word3)
    values.append(_ratio(c.misspelled, c.words))
    return np.asarray(values, dtype=np.float64)


def feature_matrix(instances: Iterable[ReviewInstance], space: FeatureSpace) -> np.ndarray:
    rows = [extract_features(inst, space) for inst in instances]
    if not rows:
        return np.zeros((0, len(space)))
    return np.vstack(rows)


def write_feature_csv(path: str | Path, instances: Iterable[ReviewInstance], space: FeatureSpace) -> None:
    instances = list(instances)
    matrix = feature_matrix(instances, space)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "worker_id", "product_id", *space.names])
        for inst, row in zip(instances, matrix):
            writer.writerow([inst.instance_id, inst.worker_id, inst.product_id, *(repr(float(v)) for v in row)])
