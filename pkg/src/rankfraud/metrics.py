"""Coverage, attribution scoring, and duplicate / re-post detection."""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, Review, SnapshotSeries
from .mcdense import Partition, _exact

APP_THRESHOLDS = (Fraction(1, 2), Fraction(7, 10), Fraction(9, 10))


@dataclass(frozen=True)
class CoverageParams:
    p1: Fraction = Fraction(9, 10)
    p2: Fraction = Fraction(9, 10)

    def __post_init__(self) -> None:
        for name in ("p1", "p2"):
            v = _exact(getattr(self, name))
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)


@dataclass
class GroundTruth:
    """Per product: which worker's accounts targeted it, and who is honest."""

    workers: dict[str, dict[str, frozenset[str]]]
    honest: dict[str, frozenset[str]]
    pools: dict[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for p, ws in self.workers.items():
            seen: set[str] = set()
            for w, accts in ws.items():
                if seen & accts:
                    raise ValueError(f"worker account sets overlap on product {p!r}")
                seen |= accts

    def fraud_products(self) -> list[str]:
        return sorted(p for p, ws in self.workers.items() if ws)

    def honest_products(self) -> list[str]:
        return sorted(p for p, ws in self.workers.items() if not ws)

    def attributions(self) -> dict[str, str]:
        return {a: w for w, pool in self.pools.items() for a in pool}

    def owner(self, product_id: str, accounts: Iterable[str]) -> str | None:
        """Worker holding most of ``accounts`` on the product; None if honest accounts dominate."""
        by_account = {a: w for w, accts in self.workers.get(product_id, {}).items() for a in accts}
        votes = Counter(by_account.get(a) for a in accounts)
        if not votes:
            return None
        best = max(votes.values())
        winners = sorted(w for w, n in votes.items() if n == best and w is not None)
        if votes.get(None, 0) == best or not winners:
            return None
        return winners[0]

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "GroundTruth":
        """Ground truth implied by the corpus's own account attributions."""
        workers: dict[str, dict[str, frozenset[str]]] = {}
        honest: dict[str, frozenset[str]] = {}
        for p in sorted(corpus.products):
            by_worker: dict[str, set[str]] = defaultdict(set)
            rest = set()
            for a in corpus.reviewers_of(p):
                w = corpus.attributions.get(a)
                (by_worker[w] if w is not None else rest).add(a)
            workers[p] = {w: frozenset(s) for w, s in by_worker.items()}
            honest[p] = frozenset(rest)
        pools = {w: frozenset(s) for w, s in corpus.workers().items()}
        return cls(workers, honest, pools)

    def to_records(self) -> list[dict]:
        return [
            {
                "product_id": p,
                "workers": {w: sorted(accts) for w, accts in sorted(self.workers[p].items())},
                "honest": sorted(self.honest.get(p, ())),
            }
            for p in sorted(self.workers)
        ]

    @classmethod
    def from_records(cls, records) -> "GroundTruth":
        workers, honest, pools = {}, {}, defaultdict(set)
        for rec in records:
            p = rec["product_id"]
            workers[p] = {w: frozenset(a) for w, a in rec["workers"].items()}
            honest[p] = frozenset(rec.get("honest", ()))
            for w, a in rec["workers"].items():
                pools[w].update(a)
        return cls(workers, honest, {w: frozenset(a) for w, a in pools.items()})


def save_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in gt.to_records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_records(json.loads(line) for line in fh if line.strip())


def coverage(worker_accounts: Iterable[str], partition: Partition) -> Fraction:
    worker_accounts = set(worker_accounts)
    if not worker_accounts:
        raise ValueError("worker account set is empty")
    return Fraction(len(worker_accounts & partition.covered_accounts()), len(worker_accounts))


def p_coverage(gt: GroundTruth, partition: Partition, params: CoverageParams | None = None) -> bool:
    params = params or CoverageParams()
    workers = gt.workers.get(partition.product_id, {})
    if not workers:
        raise ValueError(f"no planted worker on product {partition.product_id!r}")
    covered = sum(1 for accts in workers.values() if coverage(accts, partition) >= params.p2)
    return Fraction(covered, len(workers)) >= params.p1


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass
class AttributionReport:
    n_instances: int
    topk_accuracy: dict[int, float | None]
    per_worker: dict[str, dict]
    apps: list[dict]
    app_counts: dict[str, int]
    honest_components_attributed: int

    def to_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "topk_accuracy": {f"top{k}": v for k, v in self.topk_accuracy.items()},
            "per_worker": self.per_worker,
            "apps": self.apps,
            "app_counts": self.app_counts,
            "honest_components_attributed": self.honest_components_attributed,
        }


def eval_attribution(
    results: Sequence,
    gt: GroundTruth,
    products: Iterable[str] | None = None,
    ks: Sequence[int] = (1, 3, 5),
) -> AttributionReport:
    """Score attribution results against planted truth.

    Each result's true worker is the worker owning most of its accounts on
    its product (honest-dominated results have none). Top-k accuracy reads
    the ranking, so an abstention with a ranking still counts if the truth
    is ranked high enough; an abstention without one (too few reviews)
    counts as a miss. Precision and recall, per worker and per app, only
    count committed attributions.

    ``products`` selects the apps scored at app level (default: every
    product in ``gt``). Honest apps contribute only to the false-alarm count.
    """
    truths = [gt.owner(r.product_id, r.accounts) for r in results]
    scored = [(r, t) for r, t in zip(results, truths) if t is not None]
    topk = {k: _ratio(sum(1 for r, t in scored if t in r.top(k)), len(scored)) for k in ks}

    tp: Counter = Counter()
    predicted: Counter = Counter()
    actual: Counter = Counter(t for _, t in scored)
    honest_hits = 0
    for r, t in zip(results, truths):
        if r.attributed is None:
            continue
        predicted[r.attributed] += 1
        if t is None:
            honest_hits += 1
        elif r.attributed == t:
            tp[t] += 1
    workers = sorted(set(actual) | set(predicted) | set(gt.pools))
    per_worker = {
        w: {
            "precision": _ratio(tp[w], predicted[w]),
            "recall": _ratio(tp[w], actual[w]),
            "n_true": actual[w],
            "n_predicted": predicted[w],
        }
        for w in workers
    }

    found: dict[str, set[str]] = defaultdict(set)
    for r in results:
        if r.attributed is not None:
            found[r.product_id].add(r.attributed)
    apps = []
    counts = Counter()
    for p in sorted(gt.workers if products is None else products):
        truth = set(gt.workers.get(p, {}))
        pred = found.get(p, set())
        hit = len(truth & pred)
        rec = Fraction(hit, len(truth)) if truth else None
        prec = Fraction(hit, len(pred)) if pred else None
        apps.append({
            "product_id": p,
            "true_workers": sorted(truth),
            "predicted_workers": sorted(pred),
            "recall": None if rec is None else float(rec),
            "precision": None if prec is None else float(prec),
        })
        if not truth:
            counts["honest_apps"] += 1
            counts["honest_apps_flagged"] += bool(pred)
            continue
        counts["fraud_apps"] += 1
        counts["recall_at_least_1_worker"] += hit >= 1
        for th in APP_THRESHOLDS:
            counts[f"recall_at_least_{int(th * 100)}pct"] += rec >= th
            counts[f"precision_at_least_{int(th * 100)}pct"] += prec is not None and prec >= th
    return AttributionReport(len(scored), topk, per_worker, apps, dict(sorted(counts.items())), honest_hits)


_SPACE_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    return _SPACE_RE.sub(" ", text.strip()).casefold()


def _distinct_reviews(reviews: Iterable[Review]) -> list[Review]:
    # A review observed in several snapshots counts once.
    seen: dict[str, Review] = {}
    for r in sorted(reviews, key=lambda r: (r.review_id, r.timestamp)):
        seen.setdefault(r.review_id, r)
    return list(seen.values())


def find_duplicates(corpus: Corpus, product_id: str) -> list[tuple[str, ...]]:
    """Review-id groups sharing normalized text on one product, one review per account.

    Groups need at least two distinct accounts. Each account contributes its
    earliest review of that text, so same-account repeats never form or
    enlarge a group. Groups are sorted and disjoint.
    """
    by_text: dict[str, dict[str, Review]] = defaultdict(dict)
    for r in sorted(_distinct_reviews(corpus.reviews_of(product_id)), key=lambda r: (r.timestamp, r.review_id)):
        by_text[normalize_text(r.text)].setdefault(r.account_id, r)
    groups = [
        tuple(sorted(r.review_id for r in per_account.values()))
        for per_account in by_text.values()
        if len(per_account) >= 2
    ]
    return sorted(groups)


def duplicate_count(groups: Iterable[Sequence[str]]) -> int:
    """Reviews that copy an earlier one: every group member beyond the first."""
    return sum(len(g) - 1 for g in groups)


def find_reposts(series: SnapshotSeries, corpus: Corpus) -> list[tuple[str, str, int]]:
    """Per (account, product): how often a review text vanished and later came back.

    A text is present in a snapshot if the account has any review with that
    normalized text there, whatever its review id. The count for a pair sums
    absent-to-present transitions over its texts; pairs with no re-post are
    omitted.
    """
    if len(series) < 2:
        raise ValueError("re-post detection needs at least two snapshots")
    index = {s.snapshot_id: i for i, s in enumerate(series)}
    present: dict[tuple[str, str], set[int]] = defaultdict(set)
    for r in corpus.reviews_of(series.product_id):
        if r.snapshot_id in index and r.review_id in series.snapshots[index[r.snapshot_id]].review_ids:
            present[(r.account_id, normalize_text(r.text))].add(index[r.snapshot_id])
    counts: Counter = Counter()
    for (account, _), idx in present.items():
        seen = sorted(idx)
        counts[account] += sum(1 for a, b in zip(seen, seen[1:]) if b > a + 1)
    return [(a, series.product_id, n) for a, n in sorted(counts.items()) if n > 0]
