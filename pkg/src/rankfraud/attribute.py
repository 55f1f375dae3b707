"""Attribute detected fraud components to known workers by writing style.

Besides the known workers, the model can learn a background class from the
corpus's unattributed reviews. A candidate that looks most like background
text abstains instead of being forced onto the nearest worker.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classifiers import CLASSIFIERS, ProbabilisticClassifier, make_classifier
from .corpus import Corpus
from .mcdense import DensityConfig, FraudComponent, _exact, partition_product, suspicious_components
from .stylo import MIN_REVIEWS, FeatureSpace, ReviewInstance, build_feature_space, extract_features, feature_matrix
from .stylo.features import CANDIDATE, group_instances

BACKGROUND = "__background__"
INSUFFICIENT_REVIEWS = "insufficient reviews"
LOW_CONFIDENCE = "top probability below abstain threshold"
BACKGROUND_STYLE = "closest to unattributed background reviews"


@dataclass(frozen=True)
class AttributionConfig:
    algorithm: str = "knn"
    params: Mapping[str, float] = field(default_factory=lambda: {"k": 5})
    abstain_threshold: float = 0.5
    min_reviews: int = MIN_REVIEWS
    background: bool = True
    k_top: Mapping[str, int] | int | None = None
    min_density: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "min_density", _exact(self.min_density))
        if not 0 <= self.abstain_threshold <= 1:
            raise ValueError("abstain_threshold must lie in [0, 1]")
        if self.min_reviews < 1:
            raise ValueError("min_reviews must be >= 1")


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    accounts: frozenset[str]
    instance_ids: tuple[str, ...] = ()


def worker_profiles(corpus: Corpus, instances: Iterable[ReviewInstance] = ()) -> list[WorkerProfile]:
    by_worker: dict[str, list[str]] = {}
    for inst in instances:
        by_worker.setdefault(inst.worker_id, []).append(inst.instance_id)
    return [
        WorkerProfile(w, frozenset(accounts), tuple(by_worker.get(w, ())))
        for w, accounts in sorted(corpus.workers().items())
    ]


@dataclass
class AttributorModel:
    space: FeatureSpace
    classifier: ProbabilisticClassifier
    algorithm: str

    @property
    def classes(self) -> list[str]:
        return [str(c) for c in self.classifier.classes_]

    @property
    def workers(self) -> list[str]:
        return [c for c in self.classes if c != BACKGROUND]

    def ranked(self, features: np.ndarray) -> list[tuple[str, float]]:
        proba = self.classifier.predict_proba(features[None, :])[0]
        return sorted(zip(self.classes, (float(p) for p in proba)), key=lambda wp: (-wp[1], wp[0]))

    def save(self, path: str | Path) -> None:
        arrays = self.classifier.to_arrays()  # type: ignore[attr-defined]
        meta = json.dumps({"algorithm": self.algorithm, "space": self.space.to_dict()}, sort_keys=True)
        np.savez(path, __meta__=np.array(meta), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "AttributorModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
        classifier = CLASSIFIERS[meta["algorithm"]].from_arrays(arrays)
        return cls(FeatureSpace.from_dict(meta["space"]), classifier, meta["algorithm"])


def background_instances(corpus: Corpus, size: int, products: Iterable[str] | None = None) -> list[ReviewInstance]:
    """Unattributed reviews cut into instances of ``size`` reviews, per product, oldest first.

    A trailing chunk shorter than ``size`` is dropped.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    out = []
    for p in sorted(corpus.products if products is None else products):
        reviews = sorted(
            (r for r in corpus.latest_reviews_of(p) if r.account_id not in corpus.attributions),
            key=lambda r: (r.timestamp, r.review_id),
        )
        for i in range(0, len(reviews) - size + 1, size):
            out.append(ReviewInstance.from_reviews(BACKGROUND, p, reviews[i : i + size]))
    return out


def train_attributor(
    instances: Sequence[ReviewInstance],
    space: FeatureSpace,
    algo: str = "knn",
    background: Sequence[ReviewInstance] = (),
    **params,
) -> AttributorModel:
    workers = {inst.worker_id for inst in instances}
    if BACKGROUND in workers:
        raise ValueError(f"{BACKGROUND!r} is reserved for background instances")
    if len(workers) < 2:
        raise ValueError(f"attribution needs at least two workers, got {sorted(workers)}")
    training = list(instances) + [
        ReviewInstance(BACKGROUND, b.product_id, b.texts, b.account_ids, b.review_ids) for b in background
    ]
    X = feature_matrix(training, space)
    clf = make_classifier(algo, **params).fit(X, [inst.worker_id for inst in training])
    return AttributorModel(space, clf, algo)


def train_from_corpus(
    corpus: Corpus, cfg: AttributionConfig | None = None, instances: Sequence[ReviewInstance] | None = None
) -> AttributorModel:
    """Group instances, add background chunks if enabled, build the space and fit.

    Background chunks take the median worker-instance size so that
    size-dependent features do not separate them trivially.
    """
    cfg = cfg or AttributionConfig()
    instances = group_instances(corpus, cfg.min_reviews) if instances is None else list(instances)
    if not instances:
        raise ValueError("no training instances")
    background: list[ReviewInstance] = []
    if cfg.background:
        size = max(cfg.min_reviews, int(statistics.median(len(i.texts) for i in instances)))
        background = background_instances(corpus, size)
    space = build_feature_space([*instances, *background], cfg.k_top)
    return train_attributor(instances, space, cfg.algorithm, background, **dict(cfg.params))


@dataclass(frozen=True)
class AttributionResult:
    component_id: str
    product_id: str
    accounts: tuple[str, ...]
    ranked: tuple[tuple[str, float], ...]
    attributed: str | None
    abstain: bool
    tie: bool = False
    reason: str | None = None
    n_reviews: int = 0

    def top(self, k: int) -> list[str]:
        """The ``k`` most probable workers; the background class is skipped."""
        return [w for w, _ in self.ranked if w != BACKGROUND][:k]

    def to_dict(self) -> dict:
        return {
            "component_id": self.component_id,
            "product_id": self.product_id,
            "accounts": list(self.accounts),
            "n_reviews": self.n_reviews,
            "ranked": [{"worker_id": w, "probability": round(p, 12)} for w, p in self.ranked],
            "attributed": self.attributed,
            "abstain": self.abstain,
            "abstain_is_extension": True,
            "tie": self.tie,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributionResult":
        return cls(
            component_id=d["component_id"],
            product_id=d["product_id"],
            accounts=tuple(d["accounts"]),
            ranked=tuple((r["worker_id"], float(r["probability"])) for r in d["ranked"]),
            attributed=d["attributed"],
            abstain=bool(d["abstain"]),
            tie=bool(d.get("tie", False)),
            reason=d.get("reason"),
            n_reviews=int(d.get("n_reviews", 0)),
        )


def _decide(ranked: list[tuple[str, float]], threshold: float) -> tuple[str | None, bool, bool, str | None]:
    top_w, top_p = ranked[0]
    tie = len(ranked) > 1 and abs(ranked[1][1] - top_p) <= 1e-12
    if top_w == BACKGROUND:
        return None, True, tie, BACKGROUND_STYLE
    if top_p < threshold:
        return None, True, tie, LOW_CONFIDENCE
    return ranked[0][0], False, tie, None


def attribute_instance(
    instance: ReviewInstance,
    model: AttributorModel,
    abstain_threshold: float = 0.5,
    component_id: str = "",
    min_reviews: int = MIN_REVIEWS,
) -> AttributionResult:
    base = dict(
        component_id=component_id or instance.instance_id,
        product_id=instance.product_id,
        accounts=tuple(instance.account_ids),
        n_reviews=len(instance.texts),
    )
    if len(instance.texts) < min_reviews:
        return AttributionResult(ranked=(), attributed=None, abstain=True, reason=INSUFFICIENT_REVIEWS, **base)
    ranked = model.ranked(extract_features(instance, model.space))
    attributed, abstain, tie, reason = _decide(ranked, abstain_threshold)
    return AttributionResult(ranked=tuple(ranked), attributed=attributed, abstain=abstain, tie=tie, reason=reason, **base)


def component_instance(component: FraudComponent, corpus: Corpus, product_id: str | None = None) -> ReviewInstance:
    product_id = product_id or component.product_id
    if product_id is None:
        raise ValueError("component has no product_id")
    reviews = [r for r in corpus.latest_reviews_of(product_id) if r.account_id in component.accounts]
    return ReviewInstance.from_reviews(CANDIDATE, product_id, reviews)


def attribute_component(
    component: FraudComponent,
    corpus: Corpus,
    model: AttributorModel,
    space: FeatureSpace | None = None,
    *,
    abstain_threshold: float = 0.5,
    min_reviews: int = MIN_REVIEWS,
    component_id: str = "",
) -> AttributionResult:
    """Rank workers for the reviews ``component`` posted on its product.

    Abstains (with a reason) when the component wrote fewer than
    ``min_reviews`` reviews there or when no worker reaches
    ``abstain_threshold``.
    """
    if space is not None and space != model.space:
        raise ValueError("feature space differs from the one the model was trained in")
    instance = component_instance(component, corpus)
    cid = component_id or f"{instance.product_id}#{min(component.accounts)}"
    return attribute_instance(instance, model, abstain_threshold, cid, min_reviews)


def deanonymize_product(
    corpus: Corpus,
    product_id: str,
    cfg: DensityConfig | None,
    model: AttributorModel,
    space: FeatureSpace | None = None,
    *,
    attribution: AttributionConfig | None = None,
    min_density=None,
    components: Sequence[FraudComponent] | None = None,
) -> list[AttributionResult]:
    """Detect the product's suspicious components and attribute each one.

    ``components`` replaces detection (used to plug in DSG). Otherwise
    MCDense runs and every emitted component (all have at least ``eta``
    accounts) at or above ``min_density`` is attributed. The default,
    ``attribution.min_density`` = 0, keeps sparse components too and leaves
    honest ones to abstention.
    """
    cfg = cfg or DensityConfig()
    attribution = attribution or AttributionConfig()
    if components is None:
        partition = partition_product(corpus, product_id, cfg)
        components = suspicious_components(partition, attribution.min_density if min_density is None else min_density)
    return [
        attribute_component(
            c,
            corpus,
            model,
            space,
            abstain_threshold=attribution.abstain_threshold,
            min_reviews=attribution.min_reviews,
            component_id=f"{product_id}#{i}",
        )
        for i, c in enumerate(components)
    ]


def worker_set(results: Iterable[AttributionResult]) -> set[str]:
    return {r.attributed for r in results if r.attributed is not None}
