"""Run configuration: a JSON file describing one reproducible experiment.

Relative paths are resolved against the config file's directory. Every
referenced input path must exist before any work starts. All randomness
flows from the seeds recorded here; nothing is wall-clock seeded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .evaluation import ProtocolKind, ProtocolSpec
from .features import ALL_GROUPS, FeatureGroup


@dataclass(frozen=True)
class RunConfig:
    corpus: Path
    cache_dir: Path
    reliability_table: Path
    output_dir: Path
    protocol: ProtocolSpec
    new_corpus: Path | None = None
    blacklist: Path | None = None
    stopwords: Path | None = None
    category_rules: Path | None = None
    suffix_rules: Path | None = None
    embedding_table: Path | None = None
    groups: tuple[FeatureGroup, ...] = ALL_GROUPS
    C: float = 1.0
    epochs: int = 1000
    model_seed: int = 0
    tol: float = 1e-4
    offline: bool = True
    jobs: int = 4
    sweep: bool = False
    weight_report_k: int = 0


_KNOWN_KEYS = {
    "corpus", "cache_dir", "reliability_table", "output_dir", "new_corpus",
    "blacklist", "stopwords", "category_rules", "suffix_rules", "embedding_table",
    "protocol", "groups", "model", "offline", "jobs", "sweep", "weight_report_k",
}


def _protocol_from_dict(obj: dict) -> ProtocolSpec:
    try:
        kind = ProtocolKind(obj.get("kind", "combined"))
    except ValueError:
        raise ConfigError(f"unknown protocol kind {obj.get('kind')!r}")
    n_repeats = int(obj.get("n_repeats", 10))
    seeds = obj.get("seeds")
    if seeds is None:
        base = int(obj.get("base_seed", 0))
        seeds = tuple(range(base, base + n_repeats))
    else:
        seeds = tuple(int(s) for s in seeds)
    try:
        return ProtocolSpec(
            kind=kind,
            n_repeats=n_repeats,
            seeds=seeds,
            snopes_test_per_class=int(obj.get("snopes_test_per_class", 50)),
            combined_test_size=int(obj.get("combined_test_size", 100)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = set(obj) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    base = path.parent

    def required_path(key: str) -> Path:
        if key not in obj or not obj[key]:
            raise ConfigError(f"config is missing required path {key!r}")
        return (base / obj[key]).resolve()

    def optional_path(key: str) -> Path | None:
        value = obj.get(key)
        return (base / value).resolve() if value else None

    config = RunConfig(
        corpus=required_path("corpus"),
        cache_dir=required_path("cache_dir"),
        reliability_table=required_path("reliability_table"),
        output_dir=required_path("output_dir"),
        new_corpus=optional_path("new_corpus"),
        blacklist=optional_path("blacklist"),
        stopwords=optional_path("stopwords"),
        category_rules=optional_path("category_rules"),
        suffix_rules=optional_path("suffix_rules"),
        embedding_table=optional_path("embedding_table"),
        protocol=_protocol_from_dict(obj.get("protocol", {})),
        groups=_groups_from_list(obj.get("groups")),
        C=float(obj.get("model", {}).get("C", 1.0)),
        epochs=int(obj.get("model", {}).get("epochs", 1000)),
        model_seed=int(obj.get("model", {}).get("seed", 0)),
        tol=float(obj.get("model", {}).get("tol", 1e-4)),
        offline=bool(obj.get("offline", True)),
        jobs=int(obj.get("jobs", 4)),
        sweep=bool(obj.get("sweep", False)),
        weight_report_k=int(obj.get("weight_report_k", 0)),
    )
    _check_paths(config)
    if config.protocol.kind is ProtocolKind.HOLDOUT and config.new_corpus is None:
        raise ConfigError("holdout protocol requires 'new_corpus'")
    return config


def _groups_from_list(raw) -> tuple[FeatureGroup, ...]:
    if raw is None:
        return ALL_GROUPS
    groups = []
    for name in raw:
        try:
            groups.append(FeatureGroup(name))
        except ValueError:
            raise ConfigError(f"unknown feature group {name!r}")
    if not groups:
        raise ConfigError("groups list must not be empty")
    return tuple(groups)


def _check_paths(config: RunConfig) -> None:
    """Every referenced input path must exist before any work starts."""
    required = {
        "corpus": config.corpus,
        "cache_dir": config.cache_dir,
        "reliability_table": config.reliability_table,
    }
    optional = {
        "new_corpus": config.new_corpus,
        "blacklist": config.blacklist,
        "stopwords": config.stopwords,
        "category_rules": config.category_rules,
        "suffix_rules": config.suffix_rules,
        "embedding_table": config.embedding_table,
    }
    for key, p in required.items():
        if not p.exists():
            raise ConfigError(f"{key} path does not exist: {p}")
    for key, p in optional.items():
        if p is not None and not p.exists():
            raise ConfigError(f"{key} path does not exist: {p}")
