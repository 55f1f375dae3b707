"""Run detection and attribution on a generated scenario and score both against its ground truth.

Attribution is scored two ways. Instance level: leave-one-out over the
(worker, product) training instances. End to end: products are split into
folds; each fold is deanonymized by a model trained only on the other
folds' instances and background reviews, so no product is attributed by a
model that saw its reviews.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass, field
from typing import Sequence

from .attribute import (
    AttributionConfig,
    AttributionResult,
    attribute_instance,
    background_instances,
    deanonymize_product,
    train_attributor,
)
from .corpus import Corpus
from .dsg import dsg_partition
from .mcdense import DensityConfig, Partition, partition_product, suspicious_components
from .metrics import CoverageParams, GroundTruth, coverage, eval_attribution, p_coverage
from .stylo import ReviewInstance, build_feature_space, group_instances
from .synth import Scenario, ScenarioConfig, generate


@dataclass(frozen=True)
class BenchmarkConfig:
    density: DensityConfig = field(default_factory=DensityConfig)
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    coverage: CoverageParams = field(default_factory=CoverageParams)
    folds: int = 5

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


def detection_report(gt: GroundTruth, partitions: dict[str, Partition], params: CoverageParams) -> dict:
    per_product = []
    covered = 0
    for p in gt.fraud_products():
        part = partitions[p]
        cov = {w: coverage(accts, part) for w, accts in sorted(gt.workers[p].items())}
        ok = p_coverage(gt, part, params)
        covered += ok
        per_product.append({
            "product_id": p,
            "p_covered": ok,
            "coverage": {w: float(c) for w, c in cov.items()},
            "n_components": len(part.components),
        })
    n = len(per_product)
    return {
        "fraud_products": n,
        "p_covered_products": covered,
        "p_covered_rate": covered / n if n else None,
        "per_product": per_product,
    }


def flagged_products(partitions: dict[str, Partition], cfg: DensityConfig) -> list[str]:
    """Products with a component of at least ``eta`` accounts and density at least ``tau``."""
    return sorted(
        p for p, part in partitions.items()
        if any(len(c) >= cfg.eta for c in suspicious_components(part, cfg.tau))
    )


def _background_size(instances: Sequence[ReviewInstance], cfg: AttributionConfig) -> int:
    return max(cfg.min_reviews, int(statistics.median(len(i.texts) for i in instances)))


def _fit(corpus: Corpus, instances: Sequence[ReviewInstance], cfg: AttributionConfig, products=None):
    background = background_instances(corpus, _background_size(instances, cfg), products) if cfg.background else []
    space = build_feature_space([*instances, *background], cfg.k_top)
    return train_attributor(instances, space, cfg.algorithm, background, **dict(cfg.params))


def leave_one_out(corpus: Corpus, cfg: AttributionConfig | None = None) -> list[AttributionResult]:
    """Attribute each training instance with a model fit on all the others.

    Background chunks from the held-out instance's product are left out of
    its model as well.
    """
    cfg = cfg or AttributionConfig()
    instances = group_instances(corpus, cfg.min_reviews)
    results = []
    for i, inst in enumerate(instances):
        rest = instances[:i] + instances[i + 1 :]
        if len({r.worker_id for r in rest}) < 2:
            continue
        others = sorted(corpus.products - {inst.product_id})
        model = _fit(corpus, rest, cfg, others)
        results.append(attribute_instance(inst, model, cfg.abstain_threshold, inst.instance_id, cfg.min_reviews))
    return results


def product_folds(products: Sequence[str], k: int, seed: int) -> list[list[str]]:
    order = sorted(products)
    random.Random(seed).shuffle(order)
    return [sorted(order[i::k]) for i in range(k)]


def cross_deanonymize(
    corpus: Corpus,
    density: DensityConfig,
    cfg: AttributionConfig,
    folds: int,
    seed: int,
    detector: str = "mcdense",
) -> list[AttributionResult]:
    instances = group_instances(corpus, cfg.min_reviews)
    results: list[AttributionResult] = []
    for fold in product_folds(sorted(corpus.products), folds, seed):
        held = set(fold)
        train = [i for i in instances if i.product_id not in held]
        if len({i.worker_id for i in train}) < 2:
            continue
        model = _fit(corpus, train, cfg, sorted(corpus.products - held))
        for p in fold:
            components = None
            if detector == "dsg":
                components = suspicious_components(dsg_partition(corpus, p, density), cfg.min_density)
            elif detector != "mcdense":
                raise ValueError(f"unknown detector {detector!r}")
            results.extend(deanonymize_product(corpus, p, density, model, attribution=cfg, components=components))
    return sorted(results, key=lambda r: r.component_id)


def _attribution_summary(report) -> dict:
    d = report.to_dict()
    d.pop("apps")
    return d


def run_benchmark(scenario: Scenario | ScenarioConfig, cfg: BenchmarkConfig | None = None) -> dict:
    if isinstance(scenario, ScenarioConfig):
        scenario = generate(scenario)
    return benchmark_corpus(scenario.corpus, scenario.ground_truth, cfg, scenario.config.seed)


def benchmark_corpus(corpus: Corpus, gt: GroundTruth, cfg: BenchmarkConfig | None = None, seed: int = 0) -> dict:
    """Detection coverage for MCDense and DSG, then attribution scores (``seed`` fixes the product folds)."""
    cfg = cfg or BenchmarkConfig()
    products = sorted(corpus.products)

    mc = {p: partition_product(corpus, p, cfg.density) for p in products}
    dsg = {p: dsg_partition(corpus, p, cfg.density) for p in products}
    report: dict = {
        "scenario": {
            "products": len(products),
            "fraud_products": len(gt.fraud_products()),
            "honest_products": len(gt.honest_products()),
            "workers": len(gt.pools),
            "reviews": len(corpus),
        },
        "coverage_params": {"p1": str(cfg.coverage.p1), "p2": str(cfg.coverage.p2)},
        "detection": {
            "mcdense": {**detection_report(gt, mc, cfg.coverage), "flagged_products": len(flagged_products(mc, cfg.density))},
            "dsg": {**detection_report(gt, dsg, cfg.coverage), "flagged_products": len(flagged_products(dsg, cfg.density))},
        },
    }

    if len(gt.pools) < 2:
        report["attribution"] = None
        report["attribution_skipped"] = "fewer than two workers to train on"
        return report
    loo = leave_one_out(corpus, cfg.attribution)
    e2e = {
        name: cross_deanonymize(corpus, cfg.density, cfg.attribution, cfg.folds, seed, name)
        for name in ("mcdense", "dsg")
    }
    report["attribution"] = {
        "instance_loo": _attribution_summary(eval_attribution(loo, gt, products=[])),
        "end_to_end": {
            name: eval_attribution(res, gt).to_dict() for name, res in e2e.items()
        },
        "abstain_is_extension": True,
    }
    return report
