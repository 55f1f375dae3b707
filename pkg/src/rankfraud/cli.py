"""Command line entry point: ``rankfraud <subcommand> [options]``.

Every subcommand writes a pretty-printed, key-sorted JSON report to the
output directory plus ``<subcommand>.manifest.json`` (resolved config,
config hash, seed, package versions, output checksums). Reports carry no
timestamps, so reruns with the same config are byte-identical.

Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 internal error.
Failures print one JSON object to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import scipy

from . import config as C
from .attribute import (
    AttributionResult,
    AttributorModel,
    attribute_component,
    deanonymize_product,
    train_from_corpus,
    worker_set,
)
from .benchmark import benchmark_corpus
from .corpus import Corpus, SnapshotError, load_attributions, load_corpus, snapshot_series
from .dsg import dsg_partition
from .embed import Embedding, embed_graph, guilt_by_association
from .graph import build_union_graph
from .mcdense import FraudComponent, Partition, partition_product, suspicious_components
from .metrics import (
    coverage,
    duplicate_count,
    eval_attribution,
    find_duplicates,
    find_reposts,
    load_ground_truth,
    p_coverage,
)
from .stylo import group_instances
from .synth import generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
log = logging.getLogger("rankfraud")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)


# ---------------------------------------------------------------- helpers


def _dump(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _versions() -> dict[str, str]:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"rankfraud": own, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


class Run:
    def __init__(self, command: str, cfg: dict[str, Any]):
        self.command = command
        self.cfg = cfg
        self.hash = C.config_hash(cfg)
        self.out = Path(cfg["paths.output"])
        self.outputs: dict[str, str] = {}

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def record(self, path: Path) -> None:
        self.outputs[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def report(self, name: str, payload: dict) -> Path:
        path = self.path(name)
        path.write_text(_dump({**payload, "config_hash": self.hash}), encoding="utf-8")
        self.record(path)
        return path

    def manifest(self) -> Path:
        path = self.path(f"{self.command}.manifest.json")
        path.write_text(_dump({
            "command": self.command,
            "config": self.cfg,
            "config_hash": self.hash,
            "seed": self.cfg["seed"],
            "versions": _versions(),
            "outputs": self.outputs,
            "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        }), encoding="utf-8")
        return path


def _require(cfg: Mapping[str, Any], key: str) -> Path:
    value = cfg.get(key)
    if not value:
        raise UsageError(f"{key} is required for this subcommand (set it with --set {key}=... or a flag)")
    path = Path(value)
    if not path.exists():
        raise DataError(f"{key}: {path} does not exist")
    return path


def _out_or(cfg: Mapping[str, Any], key: str, default: str) -> Path:
    value = cfg.get(key)
    path = Path(value) if value else Path(cfg["paths.output"]) / default
    if not path.exists() and not path.with_suffix(".npy").exists():
        raise DataError(f"{key}: {path} does not exist (run the producing subcommand first)")
    return path


def _load(cfg: Mapping[str, Any], need_attributions: bool = False) -> Corpus:
    corpus = load_corpus(_require(cfg, "paths.corpus"))
    if cfg.get("paths.attributions"):
        corpus = load_attributions(_require(cfg, "paths.attributions"), corpus)
    elif need_attributions:
        raise UsageError("paths.attributions is required for this subcommand")
    return corpus


_STATE: dict[str, Any] = {}


def _init_worker(state: dict[str, Any]) -> None:
    _STATE.update(state)


def _call(task):
    fn, arg = task
    return fn(arg)


def _per_product(fn: Callable[[str], Any], products: Sequence[str], parallelism: int, state: dict[str, Any]):
    """Map ``fn`` over products, in order; ``fn`` reads shared inputs from ``_STATE``."""
    _init_worker(state)
    if parallelism <= 1 or len(products) < 2:
        return [fn(p) for p in products]
    with ProcessPoolExecutor(max_workers=parallelism, initializer=_init_worker, initargs=(state,)) as pool:
        return list(pool.map(_call, [(fn, p) for p in products], chunksize=max(1, len(products) // (4 * parallelism))))


def _detect_one(product: str) -> dict:
    corpus, density, algorithm = _STATE["corpus"], _STATE["density"], _STATE["algorithm"]
    part = dsg_partition(corpus, product, density) if algorithm == "dsg" else partition_product(corpus, product, density)
    components = [
        {**c.to_dict(), "component_id": f"{product}#{i}", "suspicious": c.triangle_density >= density.tau}
        for i, c in enumerate(part.components)
    ]
    return {
        "product_id": product,
        "n_reviewers": len(corpus.reviewers_of(product)),
        "n_honest": len(part.honest),
        "components": components,
        "flagged": any(c["suspicious"] for c in components),
    }


def _components_from_report(entry: Mapping) -> list[FraudComponent]:
    return [
        FraudComponent(
            frozenset(c["accounts"]),
            Fraction(c["triangle_density_exact"]),
            Fraction(c["edge_density_exact"]),
            entry["product_id"],
        )
        for c in entry["components"]
    ]


def _partition_from_report(entry: Mapping) -> Partition:
    return Partition(entry["product_id"], tuple(_components_from_report(entry)))


def _deanonymize_one(product: str) -> dict:
    corpus, density, model, acfg = _STATE["corpus"], _STATE["density"], _STATE["model"], _STATE["attribution"]
    if _STATE["algorithm"] == "dsg":
        part = dsg_partition(corpus, product, density)
    else:
        part = partition_product(corpus, product, density)
    components = suspicious_components(part, acfg.min_density)
    results = deanonymize_product(corpus, product, density, model, attribution=acfg, components=components)
    return {
        "product_id": product,
        "n_reviewers": len(corpus.reviewers_of(product)),
        "components": [
            {**c.to_dict(), **r.to_dict()} for c, r in zip(components, results)
        ],
        "workers": sorted(worker_set(results)),
    }


# ---------------------------------------------------------------- subcommands


def cmd_ingest(run: Run) -> dict:
    corpus = _load(run.cfg)
    snapshots = sorted({r.snapshot_id for r in corpus.reviews if r.snapshot_id is not None})
    products = sorted(corpus.products)
    report = {
        "reviews": len(corpus),
        "accounts": len(corpus.accounts),
        "products": len(products),
        "snapshots": len(snapshots),
        "attributed_accounts": len(corpus.attributions),
        "workers": {w: len(a) for w, a in sorted(corpus.workers().items())},
        "skipped_attributions": getattr(corpus, "skipped_attributions", 0),
        "index": {p: {"reviewers": len(corpus.reviewers_of(p)), "reviews": len(corpus.reviews_of(p))} for p in products},
    }
    run.report("ingest.json", report)
    return {"reviews": len(corpus), "products": len(products)}


def cmd_detect(run: Run) -> dict:
    corpus = _load(run.cfg)
    algorithm = run.cfg["detect.algorithm"]
    if algorithm not in ("mcdense", "dsg"):
        raise UsageError(f"detect.algorithm must be mcdense or dsg, got {algorithm!r}")
    density = C.density_config(run.cfg)
    products = sorted(corpus.products)
    state = {"corpus": corpus, "density": density, "algorithm": algorithm}
    entries = _per_product(_detect_one, products, run.cfg["parallelism"], state)
    report = {
        "algorithm": algorithm,
        "eta": density.eta,
        "tau": str(density.tau),
        "products": entries,
        "flagged_products": sum(e["flagged"] for e in entries),
    }
    run.report(f"detect_{algorithm}.json", report)
    return {"products": len(entries), "flagged": report["flagged_products"]}


def _union_products(cfg: Mapping[str, Any], corpus: Corpus) -> list[str]:
    choice = cfg["embed.products"]
    if choice == "all":
        return sorted(corpus.products)
    if choice == "attributed":
        chosen = sorted(p for p in corpus.products if any(a in corpus.attributions for a in corpus.reviewers_of(p)))
        if not chosen:
            raise DataError("no product has an attributed reviewer; set embed.products=all or a list")
        return chosen
    if isinstance(choice, str):
        choice = [p.strip() for p in choice.split(",") if p.strip()]
    return sorted(choice)


def cmd_embed(run: Run) -> dict:
    corpus = _load(run.cfg)
    wcfg = C.walk_config(run.cfg)
    g = build_union_graph(corpus, _union_products(run.cfg, corpus))
    emb = embed_graph(g, wcfg)
    stem = Path(run.cfg["paths.embedding"]) if run.cfg["paths.embedding"] else run.path("embedding")
    for p in emb.save(stem, {"config_hash": run.hash}):
        run.record(p)
    run.report("embed.json", {
        "nodes": len(g),
        "edges": g.edge_count(),
        "dims": emb.dims,
        "epoch_losses": emb.losses,
        "embedding": stem.name,
    })
    return {"nodes": len(g), "edges": g.edge_count()}


def cmd_expand_labels(run: Run) -> dict:
    corpus = _load(run.cfg, need_attributions=True)
    emb = Embedding.load(_out_or(run.cfg, "paths.embedding", "embedding"))
    labels = {a: w for a, w in corpus.attributions.items() if a in emb}
    unlabeled = [u for u in emb.nodes if u not in corpus.attributions]
    found = guilt_by_association(
        emb, labels, unlabeled, float(run.cfg["gba.threshold"]), run.cfg["gba.algorithm"]
    )
    path = run.path("expanded_attributions.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        for account in sorted(found):
            fh.write(json.dumps({"account_id": account, "worker_id": found[account][0]}, sort_keys=True) + "\n")
    run.record(path)
    run.report("expand.json", {
        "labeled": len(labels),
        "candidates": len(unlabeled),
        "expanded": len(found),
        "threshold": float(run.cfg["gba.threshold"]),
        "accounts": [{"account_id": a, "worker_id": w, "score": round(s, 12)} for a, (w, s) in sorted(found.items())],
    })
    return {"expanded": len(found)}


def cmd_train(run: Run) -> dict:
    corpus = _load(run.cfg, need_attributions=True)
    acfg = C.attribution_config(run.cfg)
    instances = group_instances(corpus, acfg.min_reviews)
    model = train_from_corpus(corpus, acfg, instances)
    path = Path(run.cfg["paths.model"]) if run.cfg["paths.model"] else run.path("model.npz")
    model.save(path)
    run.record(path)
    run.report("train.json", {
        "algorithm": model.algorithm,
        "workers": model.workers,
        "background_class": len(model.classes) > len(model.workers),
        "instances": [i.instance_id for i in instances],
        "features": len(model.space),
        "model": path.name,
    })
    return {"workers": len(model.workers), "instances": len(instances)}


def _model(run: Run, corpus: Corpus) -> AttributorModel:
    if run.cfg["paths.model"]:
        return AttributorModel.load(_require(run.cfg, "paths.model"))
    default = Path(run.cfg["paths.output"]) / "model.npz"
    if default.exists():
        return AttributorModel.load(default)
    if not corpus.attributions:
        raise UsageError("no trained model (paths.model) and no attributions to train one")
    return train_from_corpus(corpus, C.attribution_config(run.cfg))


def cmd_attribute(run: Run) -> dict:
    corpus = _load(run.cfg)
    model = _model(run, corpus)
    acfg = C.attribution_config(run.cfg)
    detect_path = _out_or(run.cfg, "paths.report", f"detect_{run.cfg['detect.algorithm']}.json")
    detect = json.loads(detect_path.read_text(encoding="utf-8"))
    products = []
    for entry in detect["products"]:
        comps = [c for c in _components_from_report(entry) if c.triangle_density >= acfg.min_density]
        results = [
            attribute_component(
                c, corpus, model, abstain_threshold=acfg.abstain_threshold,
                min_reviews=acfg.min_reviews, component_id=f"{entry['product_id']}#{i}",
            )
            for i, c in enumerate(comps)
        ]
        products.append({
            "product_id": entry["product_id"],
            "components": [{**c.to_dict(), **r.to_dict()} for c, r in zip(comps, results)],
            "workers": sorted(worker_set(results)),
        })
    run.report("attribute.json", {"source": detect_path.name, "products": products, "abstain_is_extension": True})
    return {"products": len(products)}


def cmd_deanonymize(run: Run) -> dict:
    corpus = _load(run.cfg)
    algorithm = run.cfg["detect.algorithm"]
    if algorithm not in ("mcdense", "dsg"):
        raise UsageError(f"detect.algorithm must be mcdense or dsg, got {algorithm!r}")
    state = {
        "corpus": corpus,
        "density": C.density_config(run.cfg),
        "algorithm": algorithm,
        "model": _model(run, corpus),
        "attribution": C.attribution_config(run.cfg),
    }
    entries = _per_product(_deanonymize_one, sorted(corpus.products), run.cfg["parallelism"], state)
    run.report("deanonymize.json", {
        "algorithm": algorithm,
        "products": entries,
        "abstain_is_extension": True,
    })
    return {"products": len(entries), "with_workers": sum(1 for e in entries if e["workers"])}


def cmd_eval(run: Run) -> dict:
    gt = load_ground_truth(_require(run.cfg, "paths.groundtruth"))
    report_path = _out_or(run.cfg, "paths.report", "deanonymize.json")
    source = json.loads(report_path.read_text(encoding="utf-8"))
    results = [AttributionResult.from_dict(c) for e in source["products"] for c in e["components"] if "ranked" in c]
    evaluated = [e["product_id"] for e in source["products"]]
    missing = sorted(set(evaluated) - set(gt.workers))
    if missing:
        raise DataError(f"ground truth lacks {len(missing)} evaluated product(s), e.g. {missing[0]!r}")
    attribution = eval_attribution(results, gt, products=evaluated).to_dict()
    params = C.coverage_params(run.cfg)
    covered, cov_rows = 0, []
    for e in source["products"]:
        p = e["product_id"]
        if not gt.workers.get(p):
            continue
        part = _partition_from_report(e)
        ok = p_coverage(gt, part, params)
        covered += ok
        cov_rows.append({
            "product_id": p,
            "p_covered": ok,
            "coverage": {w: float(coverage(a, part)) for w, a in sorted(gt.workers[p].items())},
        })
    report = {
        "source": report_path.name,
        "attribution": attribution,
        "coverage": {
            "p1": str(params.p1), "p2": str(params.p2),
            "fraud_products": len(cov_rows), "p_covered_products": covered, "per_product": cov_rows,
        },
    }
    run.report("eval.json", report)
    counts = attribution["app_counts"]
    lines = [f"{'metric':<34}{'value':>10}"]
    for k, v in attribution["topk_accuracy"].items():
        lines.append(f"{k + ' accuracy':<34}{'-' if v is None else f'{v:.3f}':>10}")
    for k, v in counts.items():
        lines.append(f"{k:<34}{v:>10}")
    lines.append(f"{'p_covered_products':<34}{covered:>10}")
    print("\n".join(lines))
    return {"instances": attribution["n_instances"]}


def cmd_validate(run: Run) -> dict:
    corpus = _load(run.cfg)
    entries = []
    total_dup = total_reviews = 0
    for p in sorted(corpus.products):
        groups = find_duplicates(corpus, p)
        n_reviews = len({r.review_id for r in corpus.reviews_of(p)})
        try:
            series = snapshot_series(corpus, p)
            reposts = find_reposts(series, corpus) if len(series) >= 2 else []
            repost_note = None if len(series) >= 2 else "fewer than two snapshots"
        except SnapshotError as exc:
            reposts, repost_note = [], str(exc)
        dup = duplicate_count(groups)
        total_dup += dup
        total_reviews += n_reviews
        entries.append({
            "product_id": p,
            "reviews": n_reviews,
            "duplicate_groups": [list(g) for g in groups],
            "duplicates": dup,
            "reposts": [{"account_id": a, "repost_count": n} for a, _, n in reposts],
            "repost_note": repost_note,
        })
    run.report("validate.json", {
        "products": entries,
        "duplicates": total_dup,
        "reviews": total_reviews,
        "duplicate_ratio": total_dup / total_reviews if total_reviews else None,
    })
    return {"duplicates": total_dup}


def cmd_synth(run: Run) -> dict:
    scenario = generate(C.scenario_config(run.cfg))
    for path in scenario.save(run.path("")).values():
        run.record(Path(path))
    run.report("synth.json", {
        "config": scenario.config.to_dict(),
        "log": scenario.log,
        "reviews": len(scenario.corpus),
        "fraud_products": scenario.ground_truth.fraud_products(),
    })
    return {"reviews": len(scenario.corpus)}


def cmd_benchmark(run: Run) -> dict:
    if run.cfg["paths.corpus"] or run.cfg["paths.groundtruth"]:
        corpus = _load(run.cfg)
        gt = load_ground_truth(_require(run.cfg, "paths.groundtruth"))
        if not corpus.attributions:
            corpus = corpus.with_attributions(gt.attributions())
    else:
        scenario = generate(C.scenario_config(run.cfg))
        corpus, gt = scenario.corpus, scenario.ground_truth
    report = benchmark_corpus(corpus, gt, C.benchmark_config(run.cfg), run.cfg["seed"])
    run.report("benchmark.json", report)
    mc = report["detection"]["mcdense"]
    return {"mcdense_p_covered": mc["p_covered_products"], "fraud_products": mc["fraud_products"]}


COMMANDS: dict[str, tuple[Callable[[Run], dict], str]] = {
    "ingest": (cmd_ingest, "validate a corpus and write an index summary"),
    "detect": (cmd_detect, "partition every product's reviewers into components"),
    "embed": (cmd_embed, "embed the union co-activity graph with random walks"),
    "expand-labels": (cmd_expand_labels, "label unattributed accounts by guilt-by-association"),
    "train": (cmd_train, "build the stylometric feature space and attribution model"),
    "attribute": (cmd_attribute, "attribute the components of a detect report"),
    "deanonymize": (cmd_deanonymize, "detect then attribute, per product"),
    "eval": (cmd_eval, "score a deanonymize/attribute report against ground truth"),
    "validate": (cmd_validate, "find duplicate reviews and re-posts"),
    "synth": (cmd_synth, "generate a synthetic scenario with ground truth"),
    "benchmark": (cmd_benchmark, "compare MCDense and DSG and score attribution"),
}

# flag -> (config key, type)
FLAGS = {
    "--corpus": ("paths.corpus", str),
    "--attributions": ("paths.attributions", str),
    "--groundtruth": ("paths.groundtruth", str),
    "--out": ("paths.output", str),
    "--model": ("paths.model", str),
    "--embedding": ("paths.embedding", str),
    "--report": ("paths.report", str),
    "--algorithm": ("detect.algorithm", str),
    "--seed": ("seed", int),
    "--parallelism": ("parallelism", int),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"config file of dotted keys (default: ${C.ENV_VAR})")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    for flag, (key, typ) in FLAGS.items():
        common.add_argument(flag, type=typ, dest=key, default=None, help=f"same as --set {key}=...")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="rankfraud", description="Search rank fraud detection and de-anonymization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message, "exit_code": code}}, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        overrides = C.parse_overrides(args.set)
        overrides.update({key: getattr(args, key) for key, _ in FLAGS.values() if getattr(args, key) is not None})
        cfg = C.resolve(args.config, overrides)
        run = Run(args.command, cfg)
        summary = COMMANDS[args.command][0](run)
        run.manifest()
        if args.command != "eval":
            print(json.dumps({"command": args.command, "config_hash": run.hash, **summary}, sort_keys=True))
        return EXIT_OK
    except (UsageError, C.ConfigError) as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    except (DataError, OSError, json.JSONDecodeError, ValueError) as exc:
        # CorpusError is a ValueError; library ValueErrors signal input the pipeline cannot use.
        return _error("data", str(exc), EXIT_DATA)
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return _error("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
