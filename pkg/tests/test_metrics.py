import inspect
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import util
from sean import metrics
from sean.corpus import Document, DocumentStore


class TestF1:
    def test_all_correct(self):
        assert metrics.f1([0.9, 0.9, 0.1], [1, 1, 0]) == 1.0

    def test_two_thirds(self):
        # tp=2, fp=1, fn=1
        assert metrics.f1([0.9, 0.8, 0.7, 0.2], [1, 1, 0, 1]) == pytest.approx(2 / 3)

    def test_default_threshold(self):
        assert inspect.signature(metrics.f1).parameters["threshold"].default == 0.5

    def test_threshold_tie_counts_positive(self):
        assert metrics.f1([0.5], [1]) == 1.0

    def test_zero_when_no_positive_mass(self):
        assert metrics.f1([0.1, 0.2], [0, 0]) == 0.0

    def test_empty_is_null(self):
        assert metrics.f1([], []) is None


class TestAuc:
    def test_perfectly_separated(self):
        assert metrics.auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert metrics.auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_six_sample_toy_matches_pair_oracle(self):
        scores = [0.1, 0.4, 0.35, 0.8, 0.4, 0.65]
        labels = [0, 0, 1, 1, 1, 0]
        assert metrics.auc(scores, labels) == util.auc_pairs_oracle(scores, labels)

    def test_single_class_is_null(self):
        assert metrics.auc([0.5, 0.6], [1, 1]) is None

    @given(st.data())
    def test_matches_pair_oracle(self, data):
        n = data.draw(st.integers(2, 60))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
        # quantized scores force plenty of ties
        scores = np.round(rng.random(n), 1)
        labels = rng.integers(0, 2, n)
        got = metrics.auc(scores, labels)
        expected = util.auc_pairs_oracle(scores, labels)
        assert got == expected


class TestGini:
    def test_all_equal_exactly_zero(self):
        assert metrics.gini([3.7] * 11) == 0.0

    def test_zero_one(self):
        assert metrics.gini([0.0, 1.0]) == pytest.approx(0.5)

    def test_all_zero_is_null(self):
        assert metrics.gini([0.0, 0.0]) is None

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            metrics.gini([1.0, -0.1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            metrics.gini([])

    @given(st.data())
    def test_matches_mean_absolute_difference_oracle(self, data):
        n = data.draw(st.integers(1, 100))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
        x = rng.random(n) * 10
        got = metrics.gini(x)
        assert got == pytest.approx(util.gini_mad_oracle(x), abs=1e-9)
        assert 0 <= got <= 1 - 1 / n + 1e-12

    @given(st.data())
    def test_scale_and_permutation_invariant(self, data):
        n = data.draw(st.integers(2, 50))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
        x = rng.random(n)
        c = float(rng.uniform(0.1, 100))
        base = metrics.gini(x)
        assert abs(metrics.gini(c * x) - base) < 1e-12
        assert metrics.gini(rng.permutation(x)) == pytest.approx(base, abs=1e-12)


class TestCc:
    def test_reported_english_row(self):
        assert metrics.cc(0.4769, 0.6178) == pytest.approx(0.4243, abs=0.0005)

    def test_reported_spanish_row(self):
        assert metrics.cc(0.4299, 0.5399) == pytest.approx(0.4445, abs=0.001)

    def test_harmonic_of_equals(self):
        assert metrics.cc(0.3, 0.7) == pytest.approx(0.3)

    def test_zero_denominator(self):
        assert metrics.cc(0.0, 1.0) == 0.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            metrics.cc(1.2, 0.5)

    @given(st.floats(0.01, 1.0), st.floats(0.0, 0.99))
    def test_harmonic_mean_bounds(self, f1v, giniv):
        value = metrics.cc(f1v, giniv)
        lo, hi = sorted([f1v, 1.0 - giniv])
        assert lo - 1e-12 <= value <= hi + 1e-12
        assert value <= 2 * lo + 1e-12


def doc_store():
    return DocumentStore(
        {
            "d1": Document("d1", "alice", 0, (("w",),)),
            "d2": Document("d2", "bob", 0, (("w",),)),
            "d3": Document("d3", "alice", 0, (("w",),)),
        }
    )


class TestImpressions:
    def test_no_positives_all_zero_over_active(self):
        preds = [("u1", "d1", 0.1), ("u2", "d2", 0.2)]
        ledger = metrics.record_impressions(preds, doc_store())
        assert ledger.counts == {"alice": 0, "bob": 0}

    def test_two_consumers_same_creator(self):
        preds = [("u1", "d1", 0.9), ("u2", "d1", 0.8)]
        ledger = metrics.record_impressions(preds, doc_store())
        assert ledger.counts["alice"] == 2

    def test_toy_day_hand_count(self):
        preds = [
            ("u1", "d1", 0.9),  # alice +1
            ("u1", "d2", 0.6),  # bob +1
            ("u2", "d2", 0.4),  # below threshold
            ("u2", "d3", 0.5),  # alice +1 (tie counts positive)
            ("u3", "d1", 0.2),
        ]
        ledger = metrics.record_impressions(preds, doc_store())
        assert ledger.counts == {"alice": 2, "bob": 1}

    def test_unknown_creator_is_data_error(self):
        with pytest.raises(metrics.DataError):
            metrics.record_impressions([("u1", "ghost", 0.9)], doc_store())

    def test_merge_is_addition(self):
        a = metrics.ImpressionLedger({"x": 1, "y": 2})
        b = metrics.ImpressionLedger({"y": 3, "z": 4})
        a.merge(b)
        assert a.counts == {"x": 1, "y": 5, "z": 4}

    def test_tsv_export(self, tmp_path):
        ledger = metrics.ImpressionLedger({"b": 2, "a": 1})
        path = tmp_path / "ledger.tsv"
        ledger.save_tsv(path)
        assert path.read_text() == "a\t1\nb\t2\n"
