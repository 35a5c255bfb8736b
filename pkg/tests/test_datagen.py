"""Synthetic data, corruption mechanisms, and serialization."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from pseudocert.datagen import (
    DataDistribution,
    Provenance,
    apply_pseudo_labels,
    bayes_labels,
    estimate_bayes_risk,
    load_dataset,
    mislabel,
    randomize_labels,
    sample,
    save_dataset,
    simplex_mixture,
)
from pseudocert.learners import LearnerConfig, fit, oracle_model


def two_gauss_1d(spread=1.0):
    return DataDistribution(
        k=2, dim=1,
        class_centers=np.array([[-1.0], [1.0]]),
        class_spread=np.array([spread, spread]),
        class_priors=np.array([0.5, 0.5]),
    )


class TestDistribution:
    def test_invariants(self):
        with pytest.raises(ValueError, match="distinct"):
            DataDistribution(k=2, dim=1, class_centers=np.array([[1.0], [1.0]]),
                             class_spread=1.0, class_priors=np.array([0.5, 0.5]))
        with pytest.raises(ValueError, match="sum to 1"):
            DataDistribution(k=2, dim=1, class_centers=np.array([[0.0], [1.0]]),
                             class_spread=1.0, class_priors=np.array([0.5, 0.6]))
        with pytest.raises(ValueError, match="positive"):
            simplex_mixture(2, 2, spread=0.0)

    def test_simplex_needs_room(self):
        with pytest.raises(ValueError):
            simplex_mixture(4, 2)

    def test_distribution_id_is_stable(self):
        a, b = simplex_mixture(3, 3), simplex_mixture(3, 3)
        assert a.distribution_id == b.distribution_id
        assert a.distribution_id != simplex_mixture(3, 3, separation=9.0).distribution_id


class TestSample:
    def test_rejects_zero_count(self):
        with pytest.raises(ValueError):
            sample(two_gauss_1d(), 0, 1)

    def test_same_seed_same_data(self):
        dist = simplex_mixture(3, 3)
        a, b = sample(dist, 500, 42), sample(dist, 500, 42)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert sample(dist, 500, 43).features[0, 0] != a.features[0, 0]

    def test_all_clean(self, dist4):
        data = sample(dist4, 200, 0)
        assert data.provenance_counts() == {
            "clean": 200, "pseudo_correct": 0, "pseudo_wrong": 0,
            "randomized": 0, "mislabeled": 0,
        }
        assert np.array_equal(data.labels, data.true_labels)
        assert data.k == 4 and data.dim == 4

    def test_dataset_is_immutable(self, dist4):
        data = sample(dist4, 10, 0)
        with pytest.raises(ValueError):
            data.labels[0] = 3

    def test_example_view(self, dist4):
        data = sample(dist4, 10, 0)
        ex = data[3]
        assert ex.label == ex.true_label == int(data.labels[3])
        assert ex.provenance is Provenance.CLEAN
        assert len(list(data)) == 10


class TestRandomizeLabels:
    def test_count_bounds(self, dist4):
        data = sample(dist4, 50, 1)
        with pytest.raises(ValueError):
            randomize_labels(data, 51, 4, 2)

    def test_zero_count_is_identity(self, dist4):
        data = sample(dist4, 50, 1)
        out = randomize_labels(data, 0, 4, 2)
        assert np.array_equal(out.labels, data.labels)
        assert np.array_equal(out.provenance, data.provenance)

    def test_exact_count_tagged(self, dist4):
        data = sample(dist4, 100, 1)
        out = randomize_labels(data, 10, 4, 2)
        assert out.provenance_counts()["randomized"] == 10
        assert out.provenance_counts()["clean"] == 90

    def test_uniform_over_all_classes_may_hit_truth(self, dist4):
        data = sample(dist4, 20_000, 5)
        out = randomize_labels(data, len(data), 4, 6)
        mask = out.provenance_mask(Provenance.RANDOMIZED)
        agree = float(np.mean(out.labels[mask] == out.true_labels[mask]))
        se = math.sqrt(0.25 * 0.75 / len(data))
        assert abs(agree - 0.25) < 3 * se

    def test_features_and_truth_untouched(self, dist4):
        data = sample(dist4, 100, 1)
        out = randomize_labels(data, 40, 4, 2)
        assert np.array_equal(out.features, data.features)
        assert np.array_equal(out.true_labels, data.true_labels)


class TestMislabel:
    def test_never_equals_truth(self, dist4):
        data = sample(dist4, 5_000, 3)
        out = mislabel(data, 5_000, 4, 4)
        mask = out.provenance_mask(Provenance.MISLABELED)
        assert mask.all()
        assert not np.any(out.labels[mask] == out.true_labels[mask])

    def test_binary_flip_is_deterministic(self):
        data = sample(two_gauss_1d(), 100, 7)
        out = mislabel(data, 100, 2, 8)
        assert np.array_equal(out.labels, 1 - data.true_labels)

    def test_wrong_classes_uniform(self, dist4):
        # offsets (label - truth) mod k should be uniform over {1, .., k-1}
        data = sample(dist4, 30_000, 9)
        out = mislabel(data, 30_000, 4, 10)
        offsets = (out.labels - out.true_labels) % 4
        assert not np.any(offsets == 0)
        n = len(out)
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        for off in (1, 2, 3):
            freq = float(np.mean(offsets == off))
            assert abs(freq - 1 / 3) < 3 * se


class TestApplyPseudoLabels:
    def test_perfect_model_all_correct(self, dist4):
        data = sample(dist4, 500, 11)
        model = oracle_model(dist4, 0.0, seed=1)
        out = apply_pseudo_labels(data, model)
        assert out.provenance_counts()["pseudo_correct"] == 500

    def test_constant_model_fraction(self, dist4):
        class Constant:
            def predict(self, X):
                return np.zeros(len(X), dtype=np.int64)

        data = sample(dist4, 20_000, 12)
        out = apply_pseudo_labels(data, Constant())
        wrong = out.provenance_counts()["pseudo_wrong"] / len(out)
        se = math.sqrt(0.75 * 0.25 / len(out))
        assert abs(wrong - 0.75) < 3 * se

    def test_dimension_mismatch(self, dist4):
        data = sample(dist4, 10, 1)
        model = oracle_model(simplex_mixture(3, 3), 0.0, seed=1)
        with pytest.raises(ValueError, match="dimensionality"):
            apply_pseudo_labels(data, model)

    def test_wrong_fraction_tracks_measured_risk(self, dist4):
        model = oracle_model(dist4, 0.1, seed=3)
        test = sample(dist4, 20_000, 21)
        gamma_hat = float(np.mean(model.predict(test.features) != test.true_labels))
        fresh = apply_pseudo_labels(sample(dist4, 20_000, 22), model)
        wrong = fresh.provenance_counts()["pseudo_wrong"] / len(fresh)
        se = math.sqrt(2 * gamma_hat * (1 - gamma_hat) / 20_000)
        assert abs(wrong - gamma_hat) < 3 * se


class TestBayesRisk:
    def test_needs_samples(self):
        with pytest.raises(ValueError):
            estimate_bayes_risk(two_gauss_1d(), 100, 1)

    def test_tiny_spread_is_separable(self):
        est = estimate_bayes_risk(two_gauss_1d(spread=1e-6), 10_000, 2)
        assert est.value == 0.0

    def test_nearly_identical_centers_are_chance(self):
        # centers must be distinct by contract; at distance 1e-9 the classes
        # are statistically indistinguishable and the optimum is a coin flip
        dist = DataDistribution(k=2, dim=1,
                                class_centers=np.array([[0.0], [1e-9]]),
                                class_spread=1.0, class_priors=np.array([0.5, 0.5]))
        est = estimate_bayes_risk(dist, 50_000, 3)
        assert abs(est.value - 0.5) < 3 * est.std_error + 1e-3

    def test_matches_gaussian_overlap_integral(self):
        # symmetric 1-d pair at +-1 with unit spread: risk = Phi(-1)
        est = estimate_bayes_risk(two_gauss_1d(), 200_000, 4)
        assert abs(est.value - norm.cdf(-1.0)) < 3 * est.std_error

    def test_bayes_labels_tie_break(self):
        labels = bayes_labels(two_gauss_1d(), np.array([[0.0]]))
        assert labels[0] == 0  # exactly equidistant, lowest index wins


class TestSerialization:
    def test_round_trip(self, tmp_path, dist4):
        data = sample(dist4, 60, 17)
        data = randomize_labels(data, 10, 4, 18)
        data = mislabel(data, 5, 4, 19)
        path = tmp_path / "data.csv"
        save_dataset(data, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.features, data.features)
        assert np.array_equal(loaded.labels, data.labels)
        assert np.array_equal(loaded.true_labels, data.true_labels)
        assert np.array_equal(loaded.provenance, data.provenance)
        assert loaded.k == data.k
        assert loaded.origin_seed == data.origin_seed
        assert loaded.distribution_id == data.distribution_id

    def test_header_documented(self, tmp_path, dist4):
        path = tmp_path / "data.csv"
        save_dataset(sample(dist4, 3, 0), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# pseudocert-dataset v1 k=4 dim=4")
        assert lines[1] == "feature_0,feature_1,feature_2,feature_3,label,true_label,provenance"
        assert lines[2].endswith(",clean")

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_dataset(path)


def test_corruption_preserves_distribution_handle(dist4):
    # the oracle learner needs the handle to survive label operations
    data = randomize_labels(sample(dist4, 1_500, 3), 100, 4, 4)
    model = fit(LearnerConfig(kind="oracle", oracle_epsilon=0.0, seed=0), data)
    assert model.k == 4
