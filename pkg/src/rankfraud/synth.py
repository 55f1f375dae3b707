"""Synthetic review corpora with planted fraud workers and known ground truth.

Construction, per scenario:

* every worker controls a private pool of accounts and keeps all of them
  active on ``cover_products`` (at least two) products of its own, so every
  worker account reviews two products and any two accounts of one pool
  share at least two products;
* each fraud product gets a lead worker; every other worker joins with
  probability ``collaboration_rate``, within ``workers_per_fraud_product``;
* a worker posts one review per account it uses on a product;
* honest reviewers are mostly fresh accounts, occasionally (``honest_repeat_rate``)
  an account that already reviewed some other product;
* on half of the fraud products the honest crowd is kept below the fraud
  volume when the ranges allow it, so those products are majority-fraud.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from .corpus import Corpus, Review, save_attributions, save_corpus
from .metrics import GroundTruth, save_ground_truth
from .textgen import StyleProfile, background_style, rating, worker_style, write_review

EPOCH = 1_546_300_800  # 2019-01-01T00:00:00Z
DAY = 86_400


@dataclass(frozen=True)
class ScenarioConfig:
    n_workers: int = 5
    accounts_per_worker: tuple[int, int] = (22, 86)
    n_products: int = 40
    workers_per_fraud_product: tuple[int, int] = (1, 3)
    collaboration_rate: float = 0.05
    honest_reviewers_per_product: tuple[int, int] = (20, 60)
    reviews_per_worker_per_product: tuple[int, int] = (10, 22)
    fraud_product_fraction: float = 1.0
    cover_products: int = 2
    honest_repeat_rate: float = 0.1
    style_strength: float = 1.0
    style_profiles: Mapping[str, StyleProfile] | None = field(default=None, compare=False)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("accounts_per_worker", "workers_per_fraud_product", "honest_reviewers_per_product",
                     "reviews_per_worker_per_product"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (int(lo), int(hi)))
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must be a non-empty range, got {(lo, hi)}")
        if not 0 <= self.collaboration_rate <= 1:
            raise ValueError("collaboration_rate must lie in [0, 1]")
        if not 0 <= self.fraud_product_fraction <= 1 or not 0 <= self.honest_repeat_rate <= 1:
            raise ValueError("fractions must lie in [0, 1]")
        if self.n_workers < 0 or self.n_products < 0:
            raise ValueError("counts must be non-negative")
        if self.n_workers:
            if self.reviews_per_worker_per_product[0] < 1:
                raise ValueError("reviews_per_worker_per_product must start at 1 or more")
            if self.reviews_per_worker_per_product[1] > self.accounts_per_worker[0]:
                raise ValueError(
                    "reviews_per_worker_per_product exceeds the smallest account pool "
                    f"({self.reviews_per_worker_per_product[1]} > {self.accounts_per_worker[0]}); "
                    "a worker posts at most one review per account per product"
                )
            if self.workers_per_fraud_product[0] < 1 or self.workers_per_fraud_product[0] > self.n_workers:
                raise ValueError("workers_per_fraud_product must start between 1 and n_workers")
            # Two shared products give every intra-pool pair weight >= 2 on any product.
            if self.cover_products < 2:
                raise ValueError("cover_products must be >= 2 so every worker account reviews two products")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("style_profiles")
        return d


@dataclass
class Scenario:
    corpus: Corpus
    ground_truth: GroundTruth
    log: list[str]
    styles: dict[str, StyleProfile]
    config: ScenarioConfig = field(default_factory=ScenarioConfig)

    def save(self, out_dir: str | Path) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "reviews": out / "reviews.jsonl",
            "attributions": out / "attributions.jsonl",
            "groundtruth": out / "groundtruth.jsonl",
        }
        save_corpus(self.corpus, paths["reviews"])
        save_attributions(self.corpus.attributions, paths["attributions"])
        save_ground_truth(self.ground_truth, paths["groundtruth"])
        return {k: str(v) for k, v in paths.items()}


def _account_id(rng: random.Random, used: set[str]) -> str:
    while True:
        a = f"u{rng.getrandbits(40):010x}"
        if a not in used:
            used.add(a)
            return a


def generate(cfg: ScenarioConfig) -> Scenario:
    rng = random.Random(cfg.seed)
    log: list[str] = []
    used_ids: set[str] = set()
    workers = [f"W{k + 1:02d}" for k in range(cfg.n_workers)]

    styles: dict[str, StyleProfile] = {}
    for w in workers:
        if cfg.style_profiles and w in cfg.style_profiles:
            styles[w] = cfg.style_profiles[w]
        else:
            styles[w] = worker_style(rng, cfg.style_strength)
    honest_style = background_style()

    pools = {w: [_account_id(rng, used_ids) for _ in range(rng.randint(*cfg.accounts_per_worker))] for w in workers}

    n_fraud = round(cfg.n_products * cfg.fraud_product_fraction) if workers else 0
    regular = [f"p{i:03d}" for i in range(cfg.n_products)]
    fraud_products = set(rng.sample(regular, n_fraud))
    lo, hi = cfg.workers_per_fraud_product
    hi = min(hi, len(workers))

    targets: dict[str, list[str]] = {p: [] for p in regular}
    leads: list[str] = []
    for p in sorted(fraud_products):
        if not leads:
            leads = rng.sample(workers, len(workers))
        lead = leads.pop()
        crew = [lead] + [w for w in workers if w != lead and rng.random() < cfg.collaboration_rate]
        if len(crew) > hi:
            crew = [lead] + rng.sample(crew[1:], hi - 1)
        while len(crew) < lo:
            crew.append(rng.choice([w for w in workers if w not in crew]))
        targets[p] = sorted(crew)

    products = list(regular)
    for w in workers:
        for c in range(cfg.cover_products):
            p = f"p{len(products):03d}"
            products.append(p)
            targets[p] = [w]

    rows: list[tuple[str, str, str, int, int]] = []
    gt_workers: dict[str, dict[str, frozenset[str]]] = {}
    gt_honest: dict[str, frozenset[str]] = {}
    honest_seen: list[str] = []
    honest_products_of: dict[str, set[str]] = defaultdict(set)
    majority_fraud = set(rng.sample(sorted(fraud_products), len(fraud_products) // 2))
    for idx, p in enumerate(products):
        day0 = EPOCH + idx * 3 * DAY
        crew = targets[p]
        planted: dict[str, frozenset[str]] = {}
        is_cover = p not in regular
        for w in crew:
            if is_cover:
                chosen = list(pools[w])
            else:
                rlo, rhi = cfg.reviews_per_worker_per_product
                if p in majority_fraud:
                    rlo = (rlo + rhi + 1) // 2
                chosen = rng.sample(pools[w], rng.randint(rlo, rhi))
            planted[w] = frozenset(chosen)
            burst = day0 + rng.randrange(30) * DAY
            for a in chosen:
                rows.append((a, p, write_review(rng, styles[w]), rating(rng, styles[w]), burst + rng.randrange(DAY)))
        n_fraud_reviews = sum(len(s) for s in planted.values())
        h_lo, h_hi = cfg.honest_reviewers_per_product
        if p in majority_fraud:
            h_hi = max(h_lo, min(h_hi, n_fraud_reviews - 1))
            if h_lo >= n_fraud_reviews:
                log.append(f"{p}: honest minimum {h_lo} >= {n_fraud_reviews} fraud reviews; not majority-fraud")
        honest = set()
        for _ in range(rng.randint(h_lo, h_hi)):
            reuse = [a for a in honest_seen[-500:] if p not in honest_products_of[a] and a not in honest]
            if reuse and rng.random() < cfg.honest_repeat_rate:
                a = rng.choice(reuse)
            else:
                a = _account_id(rng, used_ids)
                honest_seen.append(a)
            honest.add(a)
            honest_products_of[a].add(p)
            rows.append((a, p, write_review(rng, honest_style), rating(rng, honest_style), day0 + rng.randrange(60 * DAY)))
        gt_workers[p] = planted
        gt_honest[p] = frozenset(honest)
        log.append(
            f"{p}: workers={','.join(crew) or '-'} fraud_reviews={n_fraud_reviews} honest={len(honest)}"
            + (" cover" if is_cover else "")
        )

    reviews = [Review(f"r{i:07d}", *row) for i, row in enumerate(rows)]
    attributions = {a: w for w, pool in pools.items() for a in pool}
    corpus = Corpus(reviews, attributions)
    gt = GroundTruth(gt_workers, gt_honest, {w: frozenset(pool) for w, pool in pools.items()})
    return Scenario(corpus, gt, log, styles, cfg)
