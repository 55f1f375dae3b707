"""Reviews, accounts, products and worker attributions.

Reviews are stored one JSON object per line. A record is one crawl observation;
when the crawl was longitudinal the same ``review_id`` may appear once per
``snapshot_id``. Worker attributions live in a second JSONL file mapping
``account_id`` to ``worker_id``.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping

log = logging.getLogger(__name__)

REVIEW_FIELDS = ("review_id", "account_id", "product_id", "text", "rating", "timestamp", "snapshot_id")
ATTRIBUTION_FIELDS = ("account_id", "worker_id")


class CorpusError(ValueError):
    """Malformed or inconsistent review/attribution data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateReviewError(CorpusError):
    pass


class AttributionConflictError(CorpusError):
    pass


class SnapshotError(CorpusError):
    pass


@dataclass(frozen=True)
class Review:
    review_id: str
    account_id: str
    product_id: str
    text: str
    rating: int
    timestamp: int
    snapshot_id: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self) -> None:
        if isinstance(self.rating, bool) or not isinstance(self.rating, int) or not 1 <= self.rating <= 5:
            raise CorpusError(f"rating must be an integer in [1, 5], got {self.rating!r}")
        for name in ("review_id", "account_id", "product_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise CorpusError(f"{name} must be a non-empty string, got {value!r}")
        if not isinstance(self.text, str):
            raise CorpusError(f"text must be a string, got {type(self.text).__name__}")
        if self.snapshot_id is not None and not isinstance(self.snapshot_id, str):
            raise CorpusError(f"snapshot_id must be a string or null, got {self.snapshot_id!r}")

    @property
    def key(self) -> tuple[str | None, str]:
        return (self.snapshot_id, self.review_id)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = dict(self.extra)
        rec.update(
            review_id=self.review_id,
            account_id=self.account_id,
            product_id=self.product_id,
            text=self.text,
            rating=self.rating,
            timestamp=self.timestamp,
            snapshot_id=self.snapshot_id,
        )
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "Review":
        missing = [k for k in REVIEW_FIELDS if k != "snapshot_id" and k not in rec]
        if missing:
            raise CorpusError(f"missing field(s) {', '.join(missing)}")
        ts = rec["timestamp"]
        if isinstance(ts, bool) or not isinstance(ts, (int, float)):
            raise CorpusError(f"timestamp must be numeric seconds, got {ts!r}")
        extra = {k: v for k, v in rec.items() if k not in REVIEW_FIELDS}
        return cls(
            review_id=rec["review_id"],
            account_id=rec["account_id"],
            product_id=rec["product_id"],
            text=rec["text"],
            rating=rec["rating"],
            timestamp=int(ts),
            snapshot_id=rec.get("snapshot_id"),
            extra=MappingProxyType(extra),
        )


@dataclass(frozen=True)
class Snapshot:
    snapshot_id: str
    timestamp: int
    review_ids: frozenset[str]


@dataclass(frozen=True)
class SnapshotSeries:
    product_id: str
    snapshots: tuple[Snapshot, ...]

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)


class Corpus:
    """Immutable review collection with per-account and per-product indices.

    Uniqueness is enforced on ``(snapshot_id, review_id)``: a longitudinal
    crawl may observe the same review in several snapshots, but never twice
    in one.
    """

    def __init__(
        self,
        reviews: Iterable[Review] = (),
        attributions: Mapping[str, str] | None = None,
        accounts: Iterable[str] = (),
        products: Iterable[str] = (),
    ):
        self.reviews: tuple[Review, ...] = tuple(reviews)
        seen: set[tuple[str | None, str]] = set()
        by_account: dict[str, list[Review]] = defaultdict(list)
        by_product: dict[str, list[Review]] = defaultdict(list)
        for r in self.reviews:
            if r.key in seen:
                where = f" in snapshot {r.snapshot_id}" if r.snapshot_id is not None else ""
                raise DuplicateReviewError(f"duplicate review_id {r.review_id!r}{where}")
            seen.add(r.key)
            by_account[r.account_id].append(r)
            by_product[r.product_id].append(r)
        self.accounts: frozenset[str] = frozenset(by_account) | frozenset(accounts)
        self.products: frozenset[str] = frozenset(by_product) | frozenset(products)
        self._by_account = {k: tuple(v) for k, v in by_account.items()}
        self._by_product = {k: tuple(v) for k, v in by_product.items()}
        self._products_of = {a: frozenset(r.product_id for r in rs) for a, rs in self._by_account.items()}
        self._reviewers = {p: tuple(sorted({r.account_id for r in rs})) for p, rs in self._by_product.items()}
        attributions = dict(attributions or {})
        unknown = sorted(set(attributions) - self.accounts)
        if unknown:
            raise CorpusError(f"attributions reference unknown accounts: {', '.join(unknown[:5])}")
        self.attributions: Mapping[str, str] = MappingProxyType(attributions)
        self.skipped_attributions = 0

    def __len__(self) -> int:
        return len(self.reviews)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.reviews == other.reviews
            and self.accounts == other.accounts
            and self.products == other.products
            and dict(self.attributions) == dict(other.attributions)
        )

    def reviews_by_account(self, account_id: str) -> tuple[Review, ...]:
        return self._by_account.get(account_id, ())

    def reviews_of(self, product_id: str) -> tuple[Review, ...]:
        return self._by_product.get(product_id, ())

    def products_of(self, account_id: str) -> frozenset[str]:
        return self._products_of.get(account_id, frozenset())

    def reviewers_of(self, product_id: str) -> tuple[str, ...]:
        return self._reviewers.get(product_id, ())

    def latest_reviews_of(self, product_id: str) -> list[Review]:
        """One observation per review_id (the last one in file order)."""
        latest: dict[str, Review] = {}
        for r in self.reviews_of(product_id):
            latest[r.review_id] = r
        return list(latest.values())

    def workers(self) -> dict[str, set[str]]:
        pools: dict[str, set[str]] = defaultdict(set)
        for account, worker in self.attributions.items():
            pools[worker].add(account)
        return dict(pools)

    def with_attributions(self, attributions: Mapping[str, str]) -> "Corpus":
        return Corpus(self.reviews, attributions, self.accounts, self.products)


def _read_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise CorpusError("record is not a JSON object", lineno)
            yield lineno, rec


def load_corpus(path: str | Path) -> Corpus:
    reviews = []
    seen: dict[tuple[str | None, str], int] = {}
    unknown_fields: set[str] = set()
    for lineno, rec in _read_jsonl(path):
        try:
            review = Review.from_record(rec)
        except CorpusError as exc:
            raise CorpusError(str(exc), lineno) from None
        if review.key in seen:
            raise DuplicateReviewError(
                f"duplicate review_id {review.review_id!r} (first seen on line {seen[review.key]})", lineno
            )
        seen[review.key] = lineno
        unknown_fields.update(review.extra)
        reviews.append(review)
    if unknown_fields:
        log.warning("preserving unknown review fields: %s", ", ".join(sorted(unknown_fields)))
    return Corpus(reviews)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in corpus.reviews:
            fh.write(json.dumps(r.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def load_attributions(path: str | Path, corpus: Corpus) -> Corpus:
    """Attach gold-standard account -> worker labels to ``corpus``.

    Labels for accounts the corpus has never seen are skipped with a warning.
    Two different workers claimed for one account is a hard error.
    """
    labels: dict[str, str] = dict(corpus.attributions)
    skipped = 0
    for lineno, rec in _read_jsonl(path):
        try:
            account, worker = rec["account_id"], rec["worker_id"]
        except KeyError as exc:
            raise CorpusError(f"missing field {exc.args[0]}", lineno) from None
        if not isinstance(account, str) or not isinstance(worker, str):
            raise CorpusError("account_id and worker_id must be strings", lineno)
        if account not in corpus.accounts:
            skipped += 1
            continue
        if labels.get(account, worker) != worker:
            raise AttributionConflictError(
                f"account {account!r} attributed to both {labels[account]!r} and {worker!r}", lineno
            )
        labels[account] = worker
    if skipped:
        log.warning("skipped %d attribution(s) for accounts not in the corpus", skipped)
    out = corpus.with_attributions(labels)
    out.skipped_attributions = skipped
    return out


def save_attributions(attributions: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for account in sorted(attributions):
            fh.write(json.dumps({"account_id": account, "worker_id": attributions[account]}) + "\n")


def snapshot_times(corpus: Corpus) -> dict[str, int]:
    """Crawl time of every snapshot.

    An explicit ``snapshot_time`` field wins; otherwise the newest review
    timestamp seen in the snapshot stands in, since a crawl cannot contain
    reviews posted after it ran.
    """
    explicit: dict[str, int] = {}
    newest: dict[str, int] = {}
    for r in corpus.reviews:
        if r.snapshot_id is None:
            continue
        newest[r.snapshot_id] = max(newest.get(r.snapshot_id, r.timestamp), r.timestamp)
        if "snapshot_time" in r.extra:
            explicit[r.snapshot_id] = int(r.extra["snapshot_time"])
    return {s: explicit.get(s, t) for s, t in newest.items()}


def snapshot_series(corpus: Corpus, product_id: str) -> SnapshotSeries:
    """Per-snapshot review-id sets for one product, oldest first.

    Every snapshot of the crawl is listed, including ones in which the
    product had no visible reviews; a review missing from a later snapshot
    was filtered by the platform.
    """
    if product_id not in corpus.products:
        raise CorpusError(f"unknown product {product_id!r}")
    reviews = corpus.reviews_of(product_id)
    if any(r.snapshot_id is None for r in reviews):
        raise SnapshotError(
            f"reviews of {product_id!r} lack snapshot_id; "
            "analyse this corpus in single-snapshot mode (no re-post detection)"
        )
    times = snapshot_times(corpus)
    order = sorted(times, key=lambda s: (times[s], s))
    for prev, cur in zip(order, order[1:]):
        if times[cur] <= times[prev]:
            raise SnapshotError(
                f"snapshots {prev!r} and {cur!r} share crawl time {times[cur]}; "
                "add a snapshot_time field to order them"
            )
    members: dict[str, set[str]] = {s: set() for s in order}
    for r in reviews:
        members[r.snapshot_id].add(r.review_id)  # type: ignore[index]
    return SnapshotSeries(
        product_id,
        tuple(Snapshot(s, times[s], frozenset(members[s])) for s in order),
    )
