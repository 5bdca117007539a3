"""Accuracy / Average Precision, cross-validation protocols and reports.

Three protocols are implemented:

* snopes   -- per repeat, 50 True + 50 False snopes examples form the test
              set; the remaining snopes True plus all reuters pairs train,
              with snopes False subsampled so training is balanced.
* combined -- per repeat, all sources merge, False examples are subsampled
              to balance, then a random split holds out 100 test examples.
* holdout  -- per repeat, the test set is every True pair of a new corpus
              plus an equal random sample of its False pairs; training is
              all prior data, balanced by subsampling the larger class.

Fold sampling uses numpy's PCG64 generator seeded per repeat, so experiments
are bit-reproducible. All feature states are refitted inside each repeat on
that repeat's training fold only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, ImageClaimPair, Source
from .errors import DataError
from .evidence import EvidenceBundle, ReliabilityTable, prepare_bundle
from .features import (
    ALL_GROUPS,
    DISPLAY_NAMES,
    FeatureConfig,
    FeatureGroup,
    fit_extractor,
)
from .model import (
    CONCATENATED,
    LinearModel,
    decision_value,
    softmax_confidence,
    train_ensemble,
    train_linear_svm,
    weight_report,
)

BASELINE = 50.0


# ---------------------------------------------------------------------------
# Metrics


def accuracy(predictions: Sequence[bool], truth: Sequence[bool]) -> float:
    """Percent of matching labels."""
    if len(predictions) != len(truth):
        raise ValueError(f"{len(predictions)} predictions vs {len(truth)} labels")
    if not truth:
        raise ValueError("cannot score an empty prediction list")
    correct = sum(1 for p, t in zip(predictions, truth) if p == t)
    return 100.0 * correct / len(truth)


def average_precision(scores: Sequence[float], truth: Sequence[bool]) -> float:
    """Mean precision at each positive's rank, as a percentage.

    Items are ranked by score descending; ties keep original order (stable
    sort by index), which matters because AP is tie-sensitive.
    """
    if len(scores) != len(truth):
        raise ValueError(f"{len(scores)} scores vs {len(truth)} labels")
    n_pos = sum(truth)
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive example")
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if truth[idx]:
            hits += 1
            total += hits / rank
    return 100.0 * total / n_pos


# ---------------------------------------------------------------------------
# Protocols


class ProtocolKind(str, Enum):
    SNOPES = "snopes"
    COMBINED = "combined"
    HOLDOUT = "holdout"


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    n_repeats: int = 10
    seeds: tuple[int, ...] = ()
    snopes_test_per_class: int = 50
    combined_test_size: int = 100

    def __post_init__(self) -> None:
        if not self.seeds:
            object.__setattr__(self, "seeds", tuple(range(self.n_repeats)))
        if len(self.seeds) != self.n_repeats:
            raise ValueError(f"{len(self.seeds)} seeds for {self.n_repeats} repeats")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("repeat seeds must be distinct")


@dataclass(frozen=True)
class Fold:
    train: tuple[ImageClaimPair, ...]
    test: tuple[ImageClaimPair, ...]


def _sample(pairs: Sequence[ImageClaimPair], k: int, rng: np.random.Generator) -> list[ImageClaimPair]:
    if k > len(pairs):
        raise DataError(f"cannot sample {k} examples from {len(pairs)}")
    chosen = rng.choice(len(pairs), size=k, replace=False)
    return [pairs[i] for i in sorted(chosen)]


def snopes_fold(corpus: Corpus, seed: int, per_class: int = 50) -> Fold:
    """Snopes-only test fold with source-aware balanced training."""
    rng = np.random.Generator(np.random.PCG64(seed))
    snopes_true = corpus.select(source=Source.SNOPES, label=True)
    snopes_false = corpus.select(source=Source.SNOPES, label=False)
    reuters = corpus.select(source=Source.REUTERS)
    if len(snopes_true) < per_class or len(snopes_false) < per_class:
        raise DataError(
            f"snopes protocol needs at least {per_class} snopes examples per class, "
            f"have {len(snopes_true)} True / {len(snopes_false)} False"
        )
    test_true = _sample(snopes_true, per_class, rng)
    test_false = _sample(snopes_false, per_class, rng)
    test_ids = {p.id for p in test_true} | {p.id for p in test_false}
    train_true = [p for p in snopes_true if p.id not in test_ids] + list(reuters)
    remaining_false = [p for p in snopes_false if p.id not in test_ids]
    if not train_true:
        raise DataError("snopes protocol left no True training examples")
    if len(remaining_false) < len(train_true):
        raise DataError(
            f"cannot balance training: need {len(train_true)} False examples, "
            f"have {len(remaining_false)}"
        )
    train_false = _sample(remaining_false, len(train_true), rng)
    return Fold(train=tuple(train_true + train_false), test=tuple(test_true + test_false))


def _balance(pairs: Sequence[ImageClaimPair], rng: np.random.Generator) -> list[ImageClaimPair]:
    """Subsample the larger class down to the smaller; order preserved."""
    trues = [p for p in pairs if p.label]
    falses = [p for p in pairs if not p.label]
    n = min(len(trues), len(falses))
    if n == 0:
        raise DataError("cannot balance: one class is empty")
    if len(trues) > n:
        trues = _sample(trues, n, rng)
    if len(falses) > n:
        falses = _sample(falses, n, rng)
    keep = {p.id for p in trues} | {p.id for p in falses}
    return [p for p in pairs if p.id in keep]


def combined_fold(corpus: Corpus, seed: int, test_size: int = 100) -> Fold:
    """Merge sources, balance by subsampling False, hold out a random test set."""
    rng = np.random.Generator(np.random.PCG64(seed))
    balanced = _balance(corpus.pairs, rng)
    if len(balanced) <= test_size:
        raise DataError(
            f"combined protocol needs more than {test_size} balanced examples, have {len(balanced)}"
        )
    test = _sample(balanced, test_size, rng)
    test_ids = {p.id for p in test}
    train = [p for p in balanced if p.id not in test_ids]
    if not any(p.label for p in train) or not any(not p.label for p in train):
        raise DataError("combined protocol training fold lost a class; corpus too small")
    return Fold(train=tuple(train), test=tuple(test))


def holdout_fold(train_corpus: Corpus, new_corpus: Corpus, seed: int) -> Fold:
    """All new True pairs plus an equal sample of new False pairs as test."""
    rng = np.random.Generator(np.random.PCG64(seed))
    new_true = new_corpus.select(label=True)
    new_false = new_corpus.select(label=False)
    if not new_true or len(new_false) < len(new_true):
        raise DataError(
            f"holdout protocol needs new data with n_true <= n_false, "
            f"have {len(new_true)} True / {len(new_false)} False"
        )
    test = list(new_true) + _sample(new_false, len(new_true), rng)
    train = _balance(train_corpus.pairs, rng)
    overlap = {p.id for p in train} & {p.id for p in test}
    if overlap:
        raise DataError(f"holdout train and test corpora share ids: {sorted(overlap)[:5]}")
    return Fold(train=tuple(train), test=tuple(test))


def make_fold(
    spec: ProtocolSpec, corpus: Corpus, seed: int, new_corpus: Corpus | None = None
) -> Fold:
    if spec.kind is ProtocolKind.SNOPES:
        return snopes_fold(corpus, seed, per_class=spec.snopes_test_per_class)
    if spec.kind is ProtocolKind.COMBINED:
        return combined_fold(corpus, seed, test_size=spec.combined_test_size)
    if new_corpus is None:
        raise DataError("holdout protocol requires a new-data corpus")
    return holdout_fold(corpus, new_corpus, seed)


# ---------------------------------------------------------------------------
# Experiment runner


@dataclass
class Experiment:
    """Everything a protocol run needs besides the protocol itself."""

    corpus: Corpus
    bundles: Mapping[str, EvidenceBundle]
    reliability: ReliabilityTable
    blacklist: frozenset[str]
    features: FeatureConfig
    groups: tuple[FeatureGroup, ...] = ALL_GROUPS
    C: float = 1.0
    epochs: int = 1000
    model_seed: int = 0
    tol: float = 1e-4
    new_corpus: Corpus | None = None


@dataclass(frozen=True)
class RepeatOutcome:
    """Per-repeat test truth plus each group's calibrated confidences."""

    seed: int
    test_ids: tuple[str, ...]
    truth: tuple[bool, ...]
    group_confidences: Mapping[FeatureGroup, tuple[float, ...]]
    train_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricSummary:
    per_repeat: tuple[tuple[float, float], ...]  # (accuracy, average_precision)
    mean_accuracy: float
    mean_average_precision: float


@dataclass
class ProtocolResult:
    spec: ProtocolSpec
    groups: tuple[FeatureGroup, ...]
    repeats: list[RepeatOutcome]
    fingerprint: str

    def _subset(self, groups: Sequence[FeatureGroup] | None) -> tuple[FeatureGroup, ...]:
        if groups is None:
            return self.groups
        subset = tuple(g for g in ALL_GROUPS if g in set(groups))
        missing = set(groups) - set(self.groups)
        if missing:
            raise ValueError(f"groups not in this run: {sorted(g.value for g in missing)}")
        return subset

    def metrics(self, groups: Sequence[FeatureGroup] | None = None) -> MetricSummary:
        """Accuracy/AP of the confidence-averaging ensemble over ``groups``."""
        subset = self._subset(groups)
        if not subset:
            raise ValueError("need at least one group")
        rows: list[tuple[float, float]] = []
        for repeat in self.repeats:
            stacked = np.array([repeat.group_confidences[g] for g in subset], dtype=np.float64)
            confidence = stacked.mean(axis=0)
            predictions = [c >= 0.5 for c in confidence]
            rows.append(
                (accuracy(predictions, repeat.truth), average_precision(list(confidence), repeat.truth))
            )
        return MetricSummary(
            per_repeat=tuple(rows),
            mean_accuracy=sum(r[0] for r in rows) / len(rows),
            mean_average_precision=sum(r[1] for r in rows) / len(rows),
        )

    def per_group_metrics(self) -> dict[FeatureGroup, MetricSummary]:
        return {g: self.metrics([g]) for g in self.groups}


def _experiment_fingerprint(exp: Experiment, spec: ProtocolSpec) -> str:
    corpus_digest = hashlib.sha256(
        json.dumps([(p.id, p.label, p.source.value) for p in exp.corpus.pairs]).encode()
    ).hexdigest()[:16]
    payload = json.dumps(
        {
            "protocol": spec.kind.value,
            "seeds": list(spec.seeds),
            "snopes_test_per_class": spec.snopes_test_per_class,
            "combined_test_size": spec.combined_test_size,
            "groups": [g.value for g in exp.groups],
            "C": exp.C,
            "epochs": exp.epochs,
            "model_seed": exp.model_seed,
            "tol": exp.tol,
            "corpus": corpus_digest,
            "features": exp.features.fingerprint(),
            "reliability": exp.reliability.fingerprint(),
            "blacklist": sorted(exp.blacklist),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _prepared_bundles(exp: Experiment, corpora: Sequence[Corpus]) -> dict[str, EvidenceBundle]:
    prepared: dict[str, EvidenceBundle] = {}
    missing: list[str] = []
    for corpus in corpora:
        for pair in corpus.pairs:
            if pair.id in prepared:
                continue
            bundle = exp.bundles.get(pair.id)
            if bundle is None:
                missing.append(pair.id)
            else:
                prepared[pair.id] = prepare_bundle(bundle, exp.blacklist, exp.reliability)
    if missing:
        preview = ", ".join(missing[:5]) + ("..." if len(missing) > 5 else "")
        raise DataError(f"{len(missing)} pairs have no evidence bundle: {preview}")
    return prepared


def run_protocol(exp: Experiment, spec: ProtocolSpec) -> ProtocolResult:
    """Run every repeat: sample a fold, refit features, train, score the test set."""
    corpora = [exp.corpus] + ([exp.new_corpus] if exp.new_corpus is not None else [])
    prepared = _prepared_bundles(exp, corpora)
    groups = tuple(g for g in ALL_GROUPS if g in set(exp.groups))
    repeats: list[RepeatOutcome] = []
    for seed in spec.seeds:
        fold = make_fold(spec, exp.corpus, seed, exp.new_corpus)
        train_data = [(p, prepared[p.id]) for p in fold.train]
        extractor = fit_extractor(groups, train_data, exp.features)
        train_feats = [extractor.extract(p, b) for p, b in train_data]
        ensemble = train_ensemble(
            {g: [f[g] for f in train_feats] for g in groups},
            [p.label for p in fold.train],
            C=exp.C,
            epochs=exp.epochs,
            seed=exp.model_seed,
            tol=exp.tol,
        )
        confidences: dict[FeatureGroup, list[float]] = {g: [] for g in groups}
        for pair in fold.test:
            feats = extractor.extract(pair, prepared[pair.id])
            for g in groups:
                d = decision_value(ensemble.models[g], feats[g].vector)
                confidences[g].append(softmax_confidence(d))
        repeats.append(
            RepeatOutcome(
                seed=seed,
                test_ids=tuple(p.id for p in fold.test),
                truth=tuple(p.label for p in fold.test),
                group_confidences={g: tuple(v) for g, v in confidences.items()},
                train_ids=tuple(p.id for p in fold.train),
            )
        )
    return ProtocolResult(
        spec=spec, groups=groups, repeats=repeats, fingerprint=_experiment_fingerprint(exp, spec)
    )


# ---------------------------------------------------------------------------
# Top-n sweep


@dataclass(frozen=True)
class SweepPoint:
    n: int
    groups: tuple[FeatureGroup, ...]
    accuracy: float
    average_precision: float


def rank_groups_by_ap(result: ProtocolResult) -> list[FeatureGroup]:
    """Groups sorted by mean single-group AP, best first; ties keep canonical order."""
    per_group = result.per_group_metrics()
    return sorted(
        result.groups,
        key=lambda g: (-per_group[g].mean_average_precision, ALL_GROUPS.index(g)),
    )


def topn_sweep(result: ProtocolResult, n_values: Sequence[int] | None = None) -> list[SweepPoint]:
    """Ensemble metrics using the top-n groups ranked by single-group AP.

    Folds and per-group models are shared with ``result``, so n=1 equals the
    best single group's result and n=len(groups) equals the all-groups result
    by construction.
    """
    ranking = rank_groups_by_ap(result)
    if not ranking:
        raise ValueError("cannot sweep with no ranked groups")
    if n_values is None:
        n_values = range(1, len(ranking) + 1)
    points: list[SweepPoint] = []
    for n in n_values:
        if not 1 <= n <= len(ranking):
            raise ValueError(f"n={n} outside 1..{len(ranking)}")
        top = tuple(ranking[:n])
        summary = result.metrics(top)
        points.append(
            SweepPoint(
                n=n,
                groups=top,
                accuracy=summary.mean_accuracy,
                average_precision=summary.mean_average_precision,
            )
        )
    return points


# ---------------------------------------------------------------------------
# Concatenated-feature weight inspection


def concatenated_weight_report(
    exp: Experiment, k: int = 20
) -> tuple[list[tuple[str, float]], list[tuple[str, float]], LinearModel]:
    """Train one model on all groups' features put together; report extremes.

    Groups keep their native scales; names carry per-group prefixes.
    """
    prepared = _prepared_bundles(exp, [exp.corpus])
    data = [(p, prepared[p.id]) for p in exp.corpus.pairs]
    if not data:
        raise DataError("empty corpus")
    extractor = fit_extractor(exp.groups, data, exp.features)
    vectors = []
    total_dim = 0
    for pair, bundle in data:
        vec, total_dim = extractor.concat(extractor.extract(pair, bundle))
        vectors.append(vec)
    labels = [1 if p.label else -1 for p, _ in data]
    model = train_linear_svm(
        vectors, labels, dim=total_dim, C=exp.C, epochs=exp.epochs, seed=exp.model_seed,
        tol=exp.tol, group=CONCATENATED,
    )
    names = extractor.concat_names()
    positive, negative = weight_report(model, names, k=k)
    return positive, negative, model


# ---------------------------------------------------------------------------
# Reports


@dataclass
class EvalReport:
    """Serializable record of one protocol run (plus optional extras)."""

    protocol: str
    groups: list[str]
    repeats: list[dict]
    mean: dict
    per_group: dict[str, dict]
    fingerprint: str
    sweep: list[dict] = field(default_factory=list)
    weights: dict = field(default_factory=dict)

    def to_json(self) -> str:
        record = {
            "protocol": self.protocol,
            "groups": self.groups,
            "repeats": self.repeats,
            "mean": self.mean,
            "per_group": self.per_group,
            "fingerprint": self.fingerprint,
        }
        if self.sweep:
            record["sweep"] = self.sweep
        if self.weights:
            record["weights"] = self.weights
        return json.dumps(record, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        try:
            record = json.loads(text)
            return cls(
                protocol=record["protocol"],
                groups=list(record["groups"]),
                repeats=list(record["repeats"]),
                mean=dict(record["mean"]),
                per_group=dict(record["per_group"]),
                fingerprint=record["fingerprint"],
                sweep=list(record.get("sweep", [])),
                weights=dict(record.get("weights", {})),
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"malformed report: {exc}")


def build_report(
    result: ProtocolResult,
    sweep: Sequence[SweepPoint] = (),
    weights: tuple[list[tuple[str, float]], list[tuple[str, float]]] | None = None,
) -> EvalReport:
    summary = result.metrics()
    repeats = [
        {
            "repeat": i,
            "seed": outcome.seed,
            "n_test": len(outcome.test_ids),
            "accuracy": acc,
            "average_precision": ap,
        }
        for i, (outcome, (acc, ap)) in enumerate(zip(result.repeats, summary.per_repeat))
    ]
    per_group = {
        g.value: {
            "accuracy": m.mean_accuracy,
            "average_precision": m.mean_average_precision,
        }
        for g, m in result.per_group_metrics().items()
    }
    return EvalReport(
        protocol=result.spec.kind.value,
        groups=[g.value for g in result.groups],
        repeats=repeats,
        mean={
            "accuracy": summary.mean_accuracy,
            "average_precision": summary.mean_average_precision,
        },
        per_group=per_group,
        fingerprint=result.fingerprint,
        sweep=[
            {
                "n": p.n,
                "groups": [g.value for g in p.groups],
                "accuracy": p.accuracy,
                "average_precision": p.average_precision,
            }
            for p in sweep
        ],
        weights=(
            {
                "positive": [[name, w] for name, w in weights[0]],
                "negative": [[name, w] for name, w in weights[1]],
            }
            if weights
            else {}
        ),
    )


def render_table(report: EvalReport) -> str:
    """Aligned text table: the All row plus one row per feature group."""
    if not report.groups:
        raise DataError("report has no feature groups to render")
    label_of = {str(g): DISPLAY_NAMES.get(FeatureGroup(g), str(g)) for g in report.groups}
    rows = [("All", report.mean["accuracy"], report.mean["average_precision"])]
    group_rows = sorted(
        (
            (label_of[g], stats["accuracy"], stats["average_precision"])
            for g, stats in report.per_group.items()
        ),
        key=lambda row: (-row[1], row[0]),
    )
    rows.extend(group_rows)
    width = max(len(name) for name, _, _ in rows) + 2
    lines = [f"{'Feature':<{width}}{'Acc':>7}{'AP':>7}", "-" * (width + 14)]
    for name, acc, ap in rows:
        lines.append(f"{name:<{width}}{acc:>7.1f}{ap:>7.1f}")
    lines.append("-" * (width + 14))
    lines.append(f"{'Baseline':<{width}}{BASELINE:>7.1f}{BASELINE:>7.1f}")
    return "\n".join(lines) + "\n"


def render_sweep(points: Sequence[dict]) -> str:
    """Tab-separated rows (n, group list, accuracy, AP) for external plotting."""
    lines = ["n\tgroups\taccuracy\taverage_precision"]
    for p in points:
        lines.append(
            f"{p['n']}\t{','.join(p['groups'])}\t{p['accuracy']:.4f}\t{p['average_precision']:.4f}"
        )
    return "\n".join(lines) + "\n"


def render_weights(weights: Mapping[str, list]) -> str:
    lines = ["most positive:"]
    for name, w in weights.get("positive", []):
        lines.append(f"  {w:+.6f}  {name}")
    lines.append("most negative:")
    for name, w in weights.get("negative", []):
        lines.append(f"  {w:+.6f}  {name}")
    return "\n".join(lines) + "\n"
