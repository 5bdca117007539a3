import itertools
import math

import numpy as np
import pytest

from fauxcheck.evaluation import accuracy, average_precision


def reference_accuracy(predictions, truth):
    correct = 0
    for p, t in zip(predictions, truth):
        if p == t:
            correct += 1
    return 100.0 * correct / len(truth)


def reference_average_precision(scores, truth):
    """Counting-formula oracle: no sorting, ranks computed by enumeration.

    rank(i) = 1 + #{j != i : score_j > score_i, or tied with smaller index},
    which realizes the documented stable tie rule. AP is the mean of
    k / rank(k-th best positive).
    """
    n = len(scores)
    ranks = {}
    for i in range(n):
        rank = 1
        for j in range(n):
            if j == i:
                continue
            if scores[j] > scores[i] or (scores[j] == scores[i] and j < i):
                rank += 1
        ranks[i] = rank
    positive_ranks = sorted(ranks[i] for i in range(n) if truth[i])
    total = sum(k / r for k, r in enumerate(positive_ranks, start=1))
    return 100.0 * total / len(positive_ranks)


def ap_of_order(order, truth):
    hits, total = 0, 0.0
    n_pos = sum(truth)
    for rank, idx in enumerate(order, start=1):
        if truth[idx]:
            hits += 1
            total += hits / rank
    return 100.0 * total / n_pos


def tie_consistent_orders(scores):
    """All total orders consistent with score-descending ranking."""
    groups: dict[float, list[int]] = {}
    for i, s in enumerate(scores):
        groups.setdefault(s, []).append(i)
    ordered_scores = sorted(groups, reverse=True)
    pools = [list(itertools.permutations(groups[s])) for s in ordered_scores]
    for combo in itertools.product(*pools):
        yield [i for block in combo for i in block]


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([True, False, True], [True, False, True]) == 100.0

    def test_half_correct_is_majority_baseline(self):
        assert accuracy([True, True, False, False], [True, False, False, True]) == 50.0

    def test_all_wrong(self):
        assert accuracy([True, True], [False, False]) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([True], [True, False])
        with pytest.raises(ValueError):
            accuracy([], [])


class TestAveragePrecision:
    def test_hand_worked_example(self):
        # positives at ranks 1 and 3: (1/1 + 2/3) / 2 * 100
        value = average_precision([0.9, 0.8, 0.7], [True, False, True])
        assert value == pytest.approx(100.0 * (1.0 + 2.0 / 3.0) / 2.0)
        assert value == pytest.approx(83.33333333333333)

    def test_all_positives_first(self):
        assert average_precision([0.9, 0.8, 0.1], [True, True, False]) == 100.0

    def test_single_positive_ranked_last(self):
        n = 7
        scores = [float(n - i) for i in range(n)]
        truth = [False] * (n - 1) + [True]
        assert average_precision(scores, truth) == pytest.approx(100.0 / n)

    def test_requires_a_positive(self):
        with pytest.raises(ValueError):
            average_precision([0.5, 0.4], [False, False])

    def test_stable_tie_rule_prefers_earlier_index(self):
        # Tied scores keep original order: the positive at index 0 ranks first.
        assert average_precision([0.5, 0.5], [True, False]) == 100.0
        assert average_precision([0.5, 0.5], [False, True]) == 50.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(2, 15))
            scores = list(rng.normal(size=n))
            truth = [bool(rng.random() < 0.5) for _ in range(n)]
            if not any(truth):
                truth[0] = True
            base = average_precision(scores, truth)
            for transform in (lambda s: 3.0 * s + 2.0, math.tanh, lambda s: s**3):
                assert average_precision([transform(s) for s in scores], truth) == pytest.approx(base)


class TestAgainstBruteForce:
    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            n = int(rng.integers(1, 21))
            # discrete score pool induces ties about half the time
            if rng.random() < 0.5:
                scores = [float(rng.integers(0, 4)) for _ in range(n)]
            else:
                scores = list(rng.normal(size=n))
            truth = [bool(rng.random() < 0.5) for _ in range(n)]
            predictions = [bool(rng.random() < 0.5) for _ in range(n)]
            assert accuracy(predictions, truth) == pytest.approx(
                reference_accuracy(predictions, truth), abs=1e-9
            )
            if any(truth):
                assert average_precision(scores, truth) == pytest.approx(
                    reference_average_precision(scores, truth), abs=1e-9
                )

    def test_tie_permutations_enumerated(self):
        rng = np.random.default_rng(13)
        for _ in range(80):
            n = int(rng.integers(2, 7))
            scores = [float(rng.integers(0, 3)) for _ in range(n)]
            truth = [bool(rng.random() < 0.5) for _ in range(n)]
            if not any(truth):
                truth[rng.integers(0, n)] = True
            ours = average_precision(scores, truth)
            all_aps = [ap_of_order(order, truth) for order in tie_consistent_orders(scores)]
            stable_order = sorted(range(n), key=lambda i: (-scores[i], i))
            assert ours == pytest.approx(ap_of_order(stable_order, truth), abs=1e-12)
            assert min(all_aps) - 1e-9 <= ours <= max(all_aps) + 1e-9
