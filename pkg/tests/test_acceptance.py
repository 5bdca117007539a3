"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance and runtime budget is pinned here.
"""

import json
import time

import numpy as np
import pytest

from conftest import (
    make_page,
    reliability_table,
    separable_bundles,
    splice_fixture,
    synth_bundle,
    synth_bundles,
    synth_corpus,
    write_cache,
    write_corpus_file,
    write_reliability_csv,
)
from fauxcheck.cli import main
from fauxcheck.corpus import Corpus
from fauxcheck.ela import compute_ela
from fauxcheck.evaluation import (
    Experiment,
    ProtocolKind,
    ProtocolSpec,
    accuracy,
    average_precision,
    combined_fold,
    holdout_fold,
    rank_groups_by_ap,
    run_protocol,
    snopes_fold,
    topn_sweep,
)
from fauxcheck.evidence import EvidenceBundle, prepare_bundle
from fauxcheck.features import (
    ALL_GROUPS,
    SCALAR_GROUPS,
    FeatureGroup,
    extract_group,
    fit_extractor,
    fit_group,
)
from fauxcheck.model import decision_value, hinge_objective, softmax_confidence, train_linear_svm
from fauxcheck.text import SparseVector, smoothed_average

from test_metrics import (
    ap_of_order,
    reference_accuracy,
    reference_average_precision,
    tie_consistent_orders,
)


def passed(n: int, description: str) -> None:
    print(f"PASS criterion {n}: {description}")


# ---------------------------------------------------------------------------
# 1. Metric oracles


def test_criterion_1_metric_oracles():
    started = time.monotonic()
    rng = np.random.default_rng(100)
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        if rng.random() < 0.5:
            scores = [float(rng.integers(0, 4)) for _ in range(n)]
        else:
            scores = list(rng.normal(size=n))
        truth = [bool(rng.random() < 0.5) for _ in range(n)]
        predictions = [bool(rng.random() < 0.5) for _ in range(n)]
        assert abs(accuracy(predictions, truth) - reference_accuracy(predictions, truth)) <= 1e-9
        if any(truth):
            assert abs(
                average_precision(scores, truth) - reference_average_precision(scores, truth)
            ) <= 1e-9
    # exhaustive tie permutations for sizes <= 6
    for _ in range(120):
        n = int(rng.integers(2, 7))
        scores = [float(rng.integers(0, 3)) for _ in range(n)]
        truth = [bool(rng.random() < 0.5) for _ in range(n)]
        if not any(truth):
            truth[int(rng.integers(0, n))] = True
        ours = average_precision(scores, truth)
        stable = sorted(range(n), key=lambda i: (-scores[i], i))
        assert abs(ours - ap_of_order(stable, truth)) <= 1e-9
        all_aps = [ap_of_order(order, truth) for order in tie_consistent_orders(scores)]
        assert min(all_aps) - 1e-9 <= ours <= max(all_aps) + 1e-9
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"criterion 1 took {elapsed:.1f}s"
    passed(1, f"accuracy/AP match brute force on 1000 instances ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 2. SVM correctness


def _separable_dataset(rng):
    """Points at distance >= 0.9 from a random line; the explicit witness
    (w, b) = (u, b0)/0.9 has objective 0.5*(|w|^2 + b^2) < C=1, so the exact
    optimum classifies everything correctly."""
    angle = rng.uniform(0, 2 * np.pi)
    u = np.array([np.cos(angle), np.sin(angle)])
    b0 = rng.uniform(-0.3, 0.3)
    n = int(rng.integers(4, 41))
    points, labels = [], []
    while len(points) < n:
        x = rng.uniform(-3, 3, size=2)
        margin = float(u @ x + b0)
        if abs(margin) >= 0.9:
            points.append(x)
            labels.append(1 if margin > 0 else -1)
    if all(l == labels[0] for l in labels):
        flip = -labels[0]
        while True:
            x = rng.uniform(-3, 3, size=2)
            margin = float(u @ x + b0)
            if (1 if margin > 0 else -1) == flip and abs(margin) >= 0.9:
                points[0], labels[0] = x, flip
                break
    witness_w, witness_b = u / 0.9, b0 / 0.9
    for x, label in zip(points, labels):
        assert label * (witness_w @ x + witness_b) >= 1.0 - 1e-12  # enumerated constraints
    assert 0.5 * (witness_w @ witness_w + witness_b**2) < 1.0
    X = [SparseVector.from_dict({0: float(x[0]), 1: float(x[1])}) for x in points]
    return X, labels


def test_criterion_2_svm_correctness():
    started = time.monotonic()
    rng = np.random.default_rng(200)
    for _ in range(50):
        X, y = _separable_dataset(rng)
        model = train_linear_svm(X, y, dim=2, C=1.0, tol=1e-6)
        predictions = [1 if decision_value(model, x) > 0 else -1 for x in X]
        assert predictions == y, "separable dataset not fit to training accuracy 1.0"
    for _ in range(100):
        n = int(rng.integers(4, 41))
        X = [SparseVector.from_dict({0: float(a), 1: float(b)}) for a, b in rng.normal(size=(n, 2))]
        y = [1 if rng.random() < 0.5 else -1 for _ in range(n)]
        if all(v == y[0] for v in y):
            y[0] = -y[0]
        model = train_linear_svm(X, y, dim=2, C=1.0)
        assert hinge_objective(model, X, y, 1.0) <= 1.0 * n + 1e-9
    X, y = _separable_dataset(rng)
    m1 = train_linear_svm(X, y, dim=2, seed=42)
    m2 = train_linear_svm(X, y, dim=2, seed=42)
    assert np.array_equal(m1.weights, m2.weights) and m1.bias == m2.bias
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"criterion 2 took {elapsed:.1f}s"
    passed(2, f"SVM separable accuracy, objective bound, determinism ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 3. Calibration monotonicity


def test_criterion_3_calibration_ranking_invariance(feature_config):
    corpus = synth_corpus(30, 30, 10, seed=31)
    bundles = synth_bundles(corpus, seed=32)
    table = reliability_table()
    prepared = {pid: prepare_bundle(b, frozenset(), table) for pid, b in bundles.items()}
    pairs = list(corpus.pairs)
    train, test = pairs[::2], pairs[1::2]
    extractor = fit_extractor(ALL_GROUPS, [(p, prepared[p.id]) for p in train], feature_config)
    train_feats = [extractor.extract(p, prepared[p.id]) for p in train]
    from fauxcheck.model import train_ensemble

    ensemble = train_ensemble(
        {g: [f[g] for f in train_feats] for g in ALL_GROUPS}, [p.label for p in train]
    )
    truth = [p.label for p in test]
    for group in ALL_GROUPS:
        model = ensemble.models[group]
        decisions = [
            decision_value(model, extractor.extract(p, prepared[p.id])[group].vector) for p in test
        ]
        confidences = [softmax_confidence(d) for d in decisions]
        assert average_precision(decisions, truth) == average_precision(confidences, truth), (
            f"AP changed under softmax for group {group.value}"
        )
    passed(3, "AP identical on decision values and softmax confidences for all 13 groups")


# ---------------------------------------------------------------------------
# 4. Feature-extractor invariants


def test_criterion_4_feature_invariants(feature_config):
    rng = np.random.default_rng(400)
    table = reliability_table()
    pct_groups = (
        FeatureGroup.TRUE_MEDIA_PCT,
        FeatureGroup.FALSE_MEDIA_PCT,
        FeatureGroup.MIXED_MEDIA_PCT,
        FeatureGroup.KNOWN_MEDIA_PCT,
    )
    corpus = synth_corpus(20, 20, 10, seed=41)
    states = {}
    sample_pair = corpus.pairs[0]
    sample_bundle = prepare_bundle(synth_bundle(sample_pair, rng), frozenset(), table)
    for group in SCALAR_GROUPS:
        states[group] = fit_group(group, [(sample_pair, sample_bundle)], feature_config)

    checked_empty = 0
    for i in range(500):
        pair = corpus.pairs[int(rng.integers(0, len(corpus.pairs)))]
        n_pages = int(rng.integers(0, 13))
        n_true = int(rng.integers(0, n_pages + 1))
        n_false = int(rng.integers(0, n_pages - n_true + 1))
        n_mixed = int(rng.integers(0, n_pages - n_true - n_false + 1))
        bundle = prepare_bundle(
            synth_bundle(pair, rng, n_pages=n_pages, n_true=n_true, n_false=n_false, n_mixed=n_mixed),
            frozenset(),
            table,
        )
        assert len(bundle.pages) <= 50
        values = {
            g: extract_group(g, pair, bundle, states[g], feature_config).vector.to_dense(1)[0]
            for g in pct_groups
        }
        assert all(0.0 <= values[g] <= 1.0 for g in pct_groups)
        partition = (
            values[FeatureGroup.TRUE_MEDIA_PCT]
            + values[FeatureGroup.FALSE_MEDIA_PCT]
            + values[FeatureGroup.MIXED_MEDIA_PCT]
        )
        assert abs(partition - values[FeatureGroup.KNOWN_MEDIA_PCT]) <= 1e-12
        if not bundle.pages:
            checked_empty += 1
            for group in SCALAR_GROUPS:
                feats = extract_group(group, pair, bundle, states[group], feature_config)
                assert feats.vector == SparseVector(), f"{group.value} nonzero on empty evidence"
        # smoothing formula checked against direct evaluation
        sims = list(rng.uniform(-1, 1, size=int(rng.integers(0, 6))))
        expected = (sum(sims) / (len(sims) + 1.0)) if sims else 0.0
        assert smoothed_average(sims) == pytest.approx(expected, abs=1e-15)
    assert checked_empty > 0, "randomization never produced empty evidence"
    # the 50-page cap is enforced at the bundle boundary
    with pytest.raises(ValueError):
        EvidenceBundle(
            image_id="cap",
            pages=tuple(make_page("unlisted1.org", "cap", i, "t") for i in range(51)),
        )
    passed(4, f"percentage partition, ranges, smoothing, {checked_empty} empty-evidence cases")


# ---------------------------------------------------------------------------
# 5. Protocol contracts


def test_criterion_5_protocol_contracts():
    started = time.monotonic()
    corpus = synth_corpus(70, 180, 50, seed=50)  # 300 examples
    new_true = synth_corpus(14, 0, 0, seed=51, prefix="new")
    new_false = synth_corpus(0, 20, 0, seed=52, prefix="new")
    new_corpus = Corpus(new_true.pairs + new_false.pairs)
    for seed in range(10):
        fold = snopes_fold(corpus, seed)
        assert len(fold.test) == 100
        assert sum(p.label for p in fold.test) == 50
        assert sum(p.label for p in fold.train) == sum(not p.label for p in fold.train)
        assert not ({p.id for p in fold.train} & {p.id for p in fold.test})

        fold = combined_fold(corpus, seed)
        assert len(fold.test) == 100
        # combined balances the pool, then splits randomly
        pool = list(fold.train) + list(fold.test)
        assert sum(p.label for p in pool) == sum(not p.label for p in pool)
        assert not ({p.id for p in fold.train} & {p.id for p in fold.test})

        fold = holdout_fold(corpus, new_corpus, seed)
        assert len(fold.test) == 28
        assert sum(p.label for p in fold.test) == 14
        assert sum(p.label for p in fold.train) == sum(not p.label for p in fold.train)
        assert not ({p.id for p in fold.train} & {p.id for p in fold.test})

        # identical seeds reproduce identical folds bitwise
        again = holdout_fold(corpus, new_corpus, seed)
        assert [p.id for p in again.train] == [p.id for p in fold.train]
        assert [p.id for p in again.test] == [p.id for p in fold.test]
    for maker in (snopes_fold, combined_fold):
        memberships = {tuple(p.id for p in maker(corpus, s).test) for s in range(10)}
        assert len(memberships) > 1, "different seeds never changed the fold"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"criterion 5 took {elapsed:.1f}s"
    passed(5, f"fold sizes 50+50/100/28, disjointness, balance, reproducibility ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 6. End-to-end separability


def brute_force_threshold_accuracy(values, labels) -> float:
    """Best single-threshold classifier (predict True when value >= t)."""
    candidates = sorted(set(values))
    thresholds = [candidates[0] - 1.0]
    thresholds += [(a + b) / 2.0 for a, b in zip(candidates, candidates[1:])]
    thresholds += [candidates[-1] + 1.0]
    best = 0.0
    for t in thresholds:
        predictions = [v >= t for v in values]
        best = max(best, accuracy(predictions, labels))
    return best


def test_criterion_6_end_to_end_separability(feature_config):
    started = time.monotonic()
    corpus = synth_corpus(100, 100, 0, seed=60)  # 200 examples
    bundles = separable_bundles(corpus, seed=61, n_pages=10)
    table = reliability_table()
    prepared = {pid: prepare_bundle(b, frozenset(), table) for pid, b in bundles.items()}

    # oracle first: the constructed signal must be separable for a bare
    # threshold classifier before the SVM pipeline is allowed to try
    group = FeatureGroup.TRUE_MEDIA_PCT
    state = fit_group(group, [(corpus.pairs[0], prepared[corpus.pairs[0].id])], feature_config)
    values = [
        extract_group(group, p, prepared[p.id], state, feature_config).vector.to_dense(1)[0]
        for p in corpus.pairs
    ]
    labels = [p.label for p in corpus.pairs]
    for value, label in zip(values, labels):
        assert (0.6 <= value <= 0.9) if label else (0.0 <= value <= 0.3)
    assert brute_force_threshold_accuracy(values, labels) >= 95.0
    assert average_precision(values, labels) >= 98.0

    exp = Experiment(
        corpus=corpus,
        bundles=bundles,
        reliability=table,
        blacklist=frozenset(),
        features=feature_config,
        groups=(group,),
    )
    result = run_protocol(exp, ProtocolSpec(kind=ProtocolKind.COMBINED, n_repeats=10))
    summary = result.metrics()
    assert summary.mean_accuracy >= 95.0, f"mean accuracy {summary.mean_accuracy:.2f} < 95"
    assert summary.mean_average_precision >= 98.0, (
        f"mean AP {summary.mean_average_precision:.2f} < 98"
    )
    elapsed = time.monotonic() - started
    assert elapsed < 120.0, f"criterion 6 took {elapsed:.1f}s"
    passed(
        6,
        f"TrueMediaPct ensemble: acc {summary.mean_accuracy:.1f}, "
        f"AP {summary.mean_average_precision:.1f} over 10 repeats ({elapsed:.1f}s)",
    )


# ---------------------------------------------------------------------------
# 7. Top-n sweep definitional checks


def test_criterion_7_topn_definitional(feature_config):
    corpus = synth_corpus(60, 70, 10, seed=70)
    exp = Experiment(
        corpus=corpus,
        bundles=synth_bundles(corpus, seed=71),
        reliability=reliability_table(),
        blacklist=frozenset(),
        features=feature_config,
        groups=(
            FeatureGroup.TRUE_MEDIA_PCT,
            FeatureGroup.KNOWN_MEDIA_PCT,
            FeatureGroup.GOOGLE_TAGS,
            FeatureGroup.CLAIM_TEXT,
        ),
    )
    result = run_protocol(exp, ProtocolSpec(kind=ProtocolKind.COMBINED, n_repeats=3))
    points = topn_sweep(result)
    best = rank_groups_by_ap(result)[0]
    best_summary = result.metrics([best])
    assert points[0].n == 1
    assert points[0].accuracy == best_summary.mean_accuracy
    assert points[0].average_precision == best_summary.mean_average_precision
    all_summary = result.metrics()
    assert points[-1].n == len(result.groups)
    assert points[-1].accuracy == all_summary.mean_accuracy
    assert points[-1].average_precision == all_summary.mean_average_precision
    passed(7, "sweep n=1 equals best single group, n=full equals all groups, exact")


# ---------------------------------------------------------------------------
# 8. ELA fixture


def test_criterion_8_ela_fixture():
    clean_jpeg, spliced_jpeg, box = splice_fixture()
    spliced = compute_ela(spliced_jpeg)
    clean = compute_ela(clean_jpeg)
    patch_mean = spliced.region_mean(box)
    mask = np.ones(spliced.diff.shape[:2], dtype=bool)
    mask[box[1]:box[3], box[0]:box[2]] = False
    background_mean = float(spliced.diff[mask].mean())
    assert patch_mean > background_mean, "spliced patch not brighter than background"
    assert patch_mean > 2.0 * clean.mean, "fixture margin too small to calibrate a floor"
    floor = (clean.mean + patch_mean) / 2.0
    assert clean.mean < floor
    passed(
        8,
        f"splice patch mean {patch_mean:.4f} > background {background_mean:.4f}; "
        f"clean mean {clean.mean:.4f} below floor {floor:.4f}",
    )


# ---------------------------------------------------------------------------
# 9. Offline reproducibility of cmd_run


def test_criterion_9_offline_reproducible_run(tmp_path, no_network):
    corpus = synth_corpus(70, 70, 0, seed=90)
    write_corpus_file(corpus, tmp_path / "corpus.jsonl")
    write_cache(synth_bundles(corpus, seed=91), tmp_path / "cache")
    write_reliability_csv(tmp_path / "mbfc.csv")
    config = {
        "corpus": "corpus.jsonl",
        "cache_dir": "cache",
        "reliability_table": "mbfc.csv",
        "output_dir": "out",
        "offline": True,
        "protocol": {"kind": "combined", "n_repeats": 2},
        "sweep": True,
        "weight_report_k": 10,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")

    assert main(["run", "--config", str(config_path)]) == 0
    first = (tmp_path / "out" / "report.json").read_bytes()
    assert main(["run", "--config", str(config_path), "--out", str(tmp_path / "out2")]) == 0
    second = (tmp_path / "out2" / "report.json").read_bytes()
    assert first == second, "two offline runs differ byte for byte"
    report = json.loads(first)
    assert len(report["groups"]) == 13
    assert len(report["sweep"]) == 13
    table = (tmp_path / "out" / "table1.txt").read_text()
    body = [
        line
        for line in table.splitlines()
        if line and not line.startswith("-") and not line.startswith("Feature")
        and not line.startswith("Baseline")
    ]
    assert len(body) == 14  # the All row plus the 13 feature groups
    passed(9, "cmd_run offline, zero network, byte-identical reports across two runs")
