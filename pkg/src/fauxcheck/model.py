"""Linear SVM training, softmax calibration and the per-group ensemble.

The solver is dual coordinate descent on the L1-hinge objective
    0.5*||w||^2 + C * sum_i max(0, 1 - y_i * (w.x_i + b))
with the bias handled as an augmented constant feature. Epoch order is a
seeded permutation, so training is bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .features import ALL_GROUPS, FeatureGroup, GroupFeatures
from .text import SparseVector

CONCATENATED = "concatenated"


@dataclass(frozen=True)
class TrainingMeta:
    C: float
    epochs: int
    seed: int
    tol: float
    epochs_run: int = 0
    converged: bool = False


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Dense weight vector plus bias for one feature group."""

    weights: np.ndarray
    bias: float
    group: str
    meta: TrainingMeta

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def _densify(X: Sequence[SparseVector], dim: int, bias_scale: float) -> np.ndarray:
    matrix = np.zeros((len(X), dim + 1), dtype=np.float64)
    for row, vec in enumerate(X):
        for i, v in zip(vec.indices, vec.values):
            if i >= dim:
                raise ValueError(f"feature index {i} out of range for dimension {dim}")
            matrix[row, i] = v
    matrix[:, dim] = bias_scale
    return matrix


def train_linear_svm(
    X: Sequence[SparseVector],
    y: Sequence[int],
    dim: int,
    C: float = 1.0,
    epochs: int = 1000,
    seed: int = 0,
    tol: float = 1e-4,
    group: str = "unnamed",
    bias_scale: float = 1.0,
) -> LinearModel:
    """Fit a linear SVM by dual coordinate descent.

    Stops when the largest projected dual gradient over an epoch drops below
    ``tol`` or after ``epochs`` passes. Requires both classes present.
    """
    n = len(X)
    if n != len(y):
        raise ValueError(f"{n} examples but {len(y)} labels")
    if n < 2:
        raise ValueError("need at least two training examples")
    labels = np.asarray(y, dtype=np.float64)
    if not (np.any(labels == 1.0) and np.any(labels == -1.0)):
        raise ValueError("training data must contain both classes (+1 and -1)")
    if np.any(np.abs(labels) != 1.0):
        raise ValueError("labels must be +1 or -1")

    A = _densify(X, dim, bias_scale)
    q_diag = np.einsum("ij,ij->i", A, A)
    alpha = np.zeros(n, dtype=np.float64)
    w = np.zeros(dim + 1, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(seed))

    epochs_run = 0
    converged = False
    for _ in range(epochs):
        epochs_run += 1
        max_violation = 0.0
        for i in rng.permutation(n):
            gradient = labels[i] * float(A[i] @ w) - 1.0
            if alpha[i] == 0.0:
                projected = min(gradient, 0.0)
            elif alpha[i] == C:
                projected = max(gradient, 0.0)
            else:
                projected = gradient
            if abs(projected) > max_violation:
                max_violation = abs(projected)
            if projected != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - gradient / q_diag[i], 0.0), C)
                delta = (alpha[i] - old) * labels[i]
                if delta != 0.0:
                    w += delta * A[i]
        if max_violation < tol:
            converged = True
            break

    return LinearModel(
        weights=w[:dim].copy(),
        bias=float(w[dim] * bias_scale),
        group=group,
        meta=TrainingMeta(C=C, epochs=epochs, seed=seed, tol=tol, epochs_run=epochs_run, converged=converged),
    )


def decision_value(model: LinearModel, x: SparseVector) -> float:
    """w.x + b; indices beyond the model dimension are ignored."""
    total = model.bias
    for i, v in zip(x.indices, x.values):
        if i < model.dim:
            total += model.weights[i] * v
    return total


def hinge_objective(model: LinearModel, X: Sequence[SparseVector], y: Sequence[int], C: float) -> float:
    """0.5*||w||^2 + C * sum of hinge losses at the model's (w, b)."""
    reg = 0.5 * float(model.weights @ model.weights)
    hinge = sum(max(0.0, 1.0 - yi * decision_value(model, xi)) for xi, yi in zip(X, y))
    return reg + C * hinge


def softmax_confidence(d: float) -> float:
    """Two-class softmax over (d, -d): probability of the True class.

    Equals 1 / (1 + exp(-2d)); strictly monotone in d, so rankings computed
    on confidences match rankings on raw decision values.
    """
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-2.0 * d))
    e = math.exp(2.0 * d)
    return e / (1.0 + e)


@dataclass(frozen=True)
class Ensemble:
    """One linear model per feature group, combined by confidence averaging."""

    models: Mapping[FeatureGroup, LinearModel]
    combination: str = "mean_confidence"

    @property
    def groups(self) -> tuple[FeatureGroup, ...]:
        return tuple(g for g in ALL_GROUPS if g in self.models)


def train_ensemble(
    features: Mapping[FeatureGroup, Sequence[GroupFeatures]],
    labels: Sequence[bool],
    C: float = 1.0,
    epochs: int = 1000,
    seed: int = 0,
    tol: float = 1e-4,
) -> Ensemble:
    """Train one model per group on aligned example features."""
    y = [1 if label else -1 for label in labels]
    models: dict[FeatureGroup, LinearModel] = {}
    for group in (g for g in ALL_GROUPS if g in features):
        rows = features[group]
        if len(rows) != len(labels):
            raise ValueError(f"group {group.value}: {len(rows)} rows vs {len(labels)} labels")
        dims = {gf.dim for gf in rows}
        if len(dims) != 1:
            raise ValueError(f"group {group.value}: inconsistent dimensions {sorted(dims)}")
        try:
            models[group] = train_linear_svm(
                [gf.vector for gf in rows], y, dim=dims.pop(), C=C, epochs=epochs, seed=seed, tol=tol,
                group=group.value,
            )
        except ValueError as exc:
            raise ValueError(f"training failed for group {group.value}: {exc}")
    return Ensemble(models=models)


def ensemble_confidence(ensemble: Ensemble, example: Mapping[FeatureGroup, GroupFeatures]) -> float:
    """Mean softmax confidence over the ensemble's groups (canonical order)."""
    groups = ensemble.groups
    if not groups:
        raise ValueError("ensemble has no models")
    total = 0.0
    for group in groups:
        if group not in example:
            raise ValueError(f"example is missing features for group {group.value}")
        total += softmax_confidence(decision_value(ensemble.models[group], example[group].vector))
    return total / len(groups)


def predict(ensemble: Ensemble, example: Mapping[FeatureGroup, GroupFeatures]) -> tuple[bool, float]:
    """(label, confidence). Confidence 0.5 ties resolve to True."""
    confidence = ensemble_confidence(ensemble, example)
    return confidence >= 0.5, confidence


def weight_report(
    model: LinearModel, names: Sequence[str], k: int = 20
) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
    """Top-k positive and top-k negative (name, weight) pairs.

    Only strictly positive / strictly negative weights are listed; ties break
    by feature index for determinism.
    """
    if len(names) != model.dim:
        raise ValueError(f"{len(names)} names for a model of dimension {model.dim}")
    indexed = list(enumerate(model.weights))
    positive = sorted((i for i, w in indexed if w > 0), key=lambda i: (-model.weights[i], i))
    negative = sorted((i for i, w in indexed if w < 0), key=lambda i: (model.weights[i], i))
    top_pos = [(names[i], float(model.weights[i])) for i in positive[:k]]
    top_neg = [(names[i], float(model.weights[i])) for i in negative[:k]]
    return top_pos, top_neg


# ---------------------------------------------------------------------------
# Persistence


def save_model(model: LinearModel, path: str | Path) -> None:
    record = {
        "group": model.group,
        "dim": model.dim,
        "C": model.meta.C,
        "epochs": model.meta.epochs,
        "seed": model.meta.seed,
        "tol": model.meta.tol,
        "bias": model.bias,
        "weights": {str(i): float(w) for i, w in enumerate(model.weights) if w != 0.0},
    }
    Path(path).write_text(json.dumps(record, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> LinearModel:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
        weights = np.zeros(int(record["dim"]), dtype=np.float64)
        for idx, value in record["weights"].items():
            weights[int(idx)] = float(value)
        return LinearModel(
            weights=weights,
            bias=float(record["bias"]),
            group=record["group"],
            meta=TrainingMeta(
                C=float(record["C"]),
                epochs=int(record["epochs"]),
                seed=int(record["seed"]),
                tol=float(record["tol"]),
            ),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad model file {path}: {exc}")


def save_ensemble(ensemble: Ensemble, directory: str | Path) -> Path:
    """Write member model files plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"combination": ensemble.combination, "models": {}}
    for group in ensemble.groups:
        filename = f"{group.value}.model.json"
        save_model(ensemble.models[group], directory / filename)
        manifest["models"][group.value] = filename
    manifest_path = directory / "ensemble.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True), encoding="utf-8")
    return manifest_path


def load_ensemble(manifest_path: str | Path) -> Ensemble:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        models = {
            FeatureGroup(group): load_model(manifest_path.parent / filename)
            for group, filename in manifest["models"].items()
        }
        return Ensemble(models=models, combination=manifest.get("combination", "mean_confidence"))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad ensemble manifest {manifest_path}: {exc}")
