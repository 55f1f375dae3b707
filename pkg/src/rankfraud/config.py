"""Pipeline configuration: flat dotted keys, from a file and ``--set`` overrides.

File format, one ``key = value`` per line, ``#`` comments::

    mcdense.tau = 0.5
    synth.accounts_per_worker = [30, 30]
    paths.corpus = data/reviews.jsonl

Values are read as JSON when they parse as JSON and as plain strings
otherwise.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping

from .attribute import AttributionConfig
from .benchmark import BenchmarkConfig
from .embed import WalkConfig
from .mcdense import DensityConfig
from .metrics import CoverageParams
from .synth import ScenarioConfig

ENV_VAR = "RANKFRAUD_CONFIG"
_SECTION = "rankfraud"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "parallelism": 1,
    "paths.corpus": None,
    "paths.attributions": None,
    "paths.groundtruth": None,
    "paths.output": "out",
    "paths.model": None,
    "paths.embedding": None,
    "paths.report": None,
    "detect.algorithm": "mcdense",
    "mcdense.eta": 5,
    "mcdense.tau": "1/2",
    "mcdense.count_self": False,
    "mcdense.split_disconnected": True,
    "walk.gamma": 80,
    "walk.walk_len": 100,
    "walk.window": 5,
    "walk.dims": 300,
    "walk.negatives": 5,
    "walk.lr": 0.025,
    "walk.epochs": 5,
    "walk.batch_size": 1024,
    "embed.products": "attributed",
    "gba.threshold": 0.5,
    "gba.algorithm": "logreg",
    "stylo.min_reviews": 5,
    "stylo.k_top.letter2": 200,
    "stylo.k_top.letter3": 200,
    "stylo.k_top.word2": 300,
    "stylo.k_top.word3": 300,
    "attribute.algorithm": "knn",
    "attribute.k": 5,
    "attribute.l2": 1.0,
    "attribute.abstain_threshold": 0.5,
    "attribute.background": True,
    "attribute.min_density": "0",
    "coverage.p1": "9/10",
    "coverage.p2": "9/10",
    "benchmark.folds": 5,
    **{f"synth.{f.name}": f.default for f in fields(ScenarioConfig) if f.name not in ("style_profiles", "seed")},
}


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def read_config_file(path: str | Path) -> dict[str, Any]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    parser.optionxform = str  # type: ignore[assignment]
    try:
        text = Path(path).read_text(encoding="utf-8")
        parser.read_string(f"[{_SECTION}]\n{text}", source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    return {k: _parse_value(v) for k, v in parser.items(_SECTION)}


def parse_overrides(items: Iterable[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = _parse_value(value)
    return out


def resolve(config_path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Defaults, then the config file (argument or ``$RANKFRAUD_CONFIG``), then overrides."""
    cfg = dict(DEFAULTS)
    path = config_path or os.environ.get(ENV_VAR)
    layers = [read_config_file(path)] if path else []
    layers.append(dict(overrides or {}))
    for layer in layers:
        unknown = sorted(set(layer) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg.update(layer)
    return cfg


def config_hash(cfg: Mapping[str, Any]) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _fraction(value: Any, key: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key} must be a number or ratio, got {value!r}") from exc


def _range(value: Any, key: str) -> tuple[int, int]:
    if isinstance(value, str) and "-" in value:
        value = value.split("-", 1)
    if isinstance(value, int):
        value = (value, value)
    try:
        lo, hi = value
        return int(lo), int(hi)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a [lo, hi] range, got {value!r}") from exc


def _build(factory, key: str, **kwargs):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {key} settings: {exc}") from exc


def density_config(cfg: Mapping[str, Any]) -> DensityConfig:
    return _build(
        DensityConfig,
        "mcdense",
        eta=cfg["mcdense.eta"],
        tau=_fraction(cfg["mcdense.tau"], "mcdense.tau"),
        count_self=bool(cfg["mcdense.count_self"]),
        split_disconnected=bool(cfg["mcdense.split_disconnected"]),
    )


def walk_config(cfg: Mapping[str, Any]) -> WalkConfig:
    keys = ("gamma", "walk_len", "window", "dims", "negatives", "lr", "epochs", "batch_size")
    return _build(WalkConfig, "walk", seed=cfg["seed"], **{k: cfg[f"walk.{k}"] for k in keys})


def attribution_config(cfg: Mapping[str, Any]) -> AttributionConfig:
    algo = cfg["attribute.algorithm"]
    params = {"k": cfg["attribute.k"]} if algo == "knn" else {"l2": cfg["attribute.l2"]}
    k_top = {k: cfg[f"stylo.k_top.{k}"] for k in ("letter2", "letter3", "word2", "word3")}
    return _build(
        AttributionConfig,
        "attribute",
        algorithm=algo,
        params=params,
        abstain_threshold=float(cfg["attribute.abstain_threshold"]),
        min_reviews=cfg["stylo.min_reviews"],
        background=bool(cfg["attribute.background"]),
        k_top=k_top,
        min_density=_fraction(cfg["attribute.min_density"], "attribute.min_density"),
    )


def coverage_params(cfg: Mapping[str, Any]) -> CoverageParams:
    return _build(
        CoverageParams, "coverage",
        p1=_fraction(cfg["coverage.p1"], "coverage.p1"), p2=_fraction(cfg["coverage.p2"], "coverage.p2"),
    )


def scenario_config(cfg: Mapping[str, Any]) -> ScenarioConfig:
    kwargs = {}
    for f in fields(ScenarioConfig):
        if f.name in ("style_profiles", "seed"):
            continue
        value = cfg[f"synth.{f.name}"]
        kwargs[f.name] = _range(value, f"synth.{f.name}") if isinstance(f.default, tuple) else value
    return _build(ScenarioConfig, "synth", seed=cfg["seed"], **kwargs)


def benchmark_config(cfg: Mapping[str, Any]) -> BenchmarkConfig:
    return _build(
        BenchmarkConfig,
        "benchmark",
        density=density_config(cfg),
        attribution=attribution_config(cfg),
        coverage=coverage_params(cfg),
        folds=cfg["benchmark.folds"],
    )
