import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kdlab.distributions import (
    TeacherSpec,
    active_set_size,
    confidence,
    entropy,
    gaussian_bin_masses,
    make_teacher,
    prob_vector,
    softmax,
    split_target,
    uniform,
)
from kdlab.errors import ConfigError, InvalidInputError, TargetIndexError

from conftest import logits


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0, 0, 0, 0]), [0.25] * 4, atol=1e-15)

    def test_two_to_one(self):
        np.testing.assert_allclose(softmax([np.log(2), 0.0]), [2 / 3, 1 / 3], atol=1e-15)

    def test_against_high_precision(self):
        # exp/sum evaluated at 40 digits
        expected = [0.090030573170380458, 0.24472847105479765, 0.66524095577482189]
        np.testing.assert_allclose(softmax([1.0, 2.0, 3.0]), expected, rtol=1e-14)

    def test_no_overflow(self):
        q = softmax([1000.0, 999.0, -1000.0])
        assert np.all(np.isfinite(q))
        assert abs(q.sum() - 1) < 1e-12

    def test_temperature(self):
        np.testing.assert_allclose(softmax([2.0, 0.0], temperature=2.0), softmax([1.0, 0.0]))

    @pytest.mark.parametrize("bad", [[0.0, np.inf], [np.nan, 1.0]])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidInputError):
            softmax(bad)

    def test_bad_temperature(self):
        with pytest.raises(InvalidInputError):
            softmax([0.0, 1.0], temperature=0.0)

    @given(logits(), st.floats(-50, 50))
    def test_shift_invariance(self, z, c):
        np.testing.assert_allclose(softmax(z + c), softmax(z), atol=1e-12)

    @given(logits())
    def test_entropy_grows_with_temperature(self, z):
        hs = [entropy(prob_vector(softmax(z, t))) for t in (0.5, 1.0, 2.0, 4.0)]
        assert all(b >= a - 1e-9 for a, b in zip(hs, hs[1:]))


class TestProbVector:
    def test_floor_keeps_entries_positive(self):
        p = prob_vector([1.0, 0.0, 0.0])
        assert np.all(p > 0)
        assert abs(p.sum() - 1) < 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidInputError):
            prob_vector([0.5, 0.6])

    def test_normalize_flag(self):
        np.testing.assert_allclose(prob_vector([1, 3], normalize=True), [0.25, 0.75])

    @pytest.mark.parametrize("bad", [[1.0], [[0.5, 0.5]], [-0.1, 1.1]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidInputError):
            prob_vector(bad)


class TestSplitTarget:
    def test_two_classes(self):
        (t, r), nt = split_target(np.array([0.5, 0.5]), 0)
        assert (t, r) == (0.5, 0.5)
        np.testing.assert_allclose(nt.probs, [1.0])

    def test_three_classes(self):
        (t, r), nt = split_target(np.array([0.7, 0.2, 0.1]), 0)
        assert t == pytest.approx(0.7, abs=1e-15) and r == pytest.approx(0.3, abs=1e-15)
        np.testing.assert_allclose(nt.probs, [2 / 3, 1 / 3], atol=1e-15)
        assert nt.target_index == 0

    def test_uniform(self):
        (t, r), nt = split_target(uniform(5), 2)
        assert t == pytest.approx(0.2) and r == pytest.approx(0.8)
        np.testing.assert_allclose(nt.probs, np.full(4, 0.25))

    def test_order_preserved(self):
        _, nt = split_target(np.array([0.1, 0.2, 0.3, 0.4]), 1)
        np.testing.assert_allclose(nt.probs, np.array([0.1, 0.3, 0.4]) / 0.8)

    @pytest.mark.parametrize("m", [-1, 3, 1.0])
    def test_bad_index(self, m):
        with pytest.raises(TargetIndexError):
            split_target(np.array([0.2, 0.3, 0.5]), m)

    @given(logits(), st.data())
    def test_recombination(self, z, data):
        p = prob_vector(softmax(z))
        m = data.draw(st.integers(0, p.size - 1))
        (t, rest), nt = split_target(p, m)
        rebuilt = np.insert(rest * nt.probs, m, t)
        np.testing.assert_allclose(rebuilt, p, atol=1e-12, rtol=0)


class TestSummaries:
    def test_entropy_uniform(self):
        assert entropy(uniform(4)) == pytest.approx(np.log(4), abs=1e-12)

    def test_entropy_degenerate(self):
        e = 1e-12
        assert entropy(np.array([1 - 3 * e, e, e, e])) < 1e-9

    def test_entropy_value(self):
        assert entropy(np.array([0.7, 0.2, 0.1])) == pytest.approx(0.80181855254333731, abs=1e-12)

    @given(logits())
    def test_entropy_bounds(self, z):
        p = prob_vector(softmax(z))
        assert -1e-12 <= entropy(p) <= np.log(p.size) + 1e-12

    def test_confidence(self):
        assert confidence(uniform(7)) == pytest.approx(1 / 7)
        p = np.array([0.91, 0.03, 0.03, 0.03])
        assert confidence(p) == 0.91
        assert confidence(softmax([3.0, 1.0, 0.0])) == pytest.approx(0.84379473448133947, abs=1e-12)

    def test_active_set(self):
        assert active_set_size(uniform(10), 0.05) == 10
        assert active_set_size(uniform(10), 0.1) == 0
        assert active_set_size(np.array([0.5, 0.3, 0.1, 0.05, 0.05]), 0.08) == 3

    @given(logits(), st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
    def test_active_set_monotone(self, z, a, b):
        q = softmax(z)
        lo, hi = sorted((a, b))
        assert active_set_size(q, lo) >= active_set_size(q, hi)


class TestTeachers:
    def test_zipf_identity(self):
        p = make_teacher(TeacherSpec("zipf", 4, exponent=1.0, permute=False))
        np.testing.assert_allclose(p, [12 / 25, 6 / 25, 4 / 25, 3 / 25], atol=1e-15)

    def test_zipf_permuted_is_rearrangement(self):
        a = make_teacher(TeacherSpec("zipf", 50, exponent=1.1, seed=3))
        b = make_teacher(TeacherSpec("zipf", 50, exponent=1.1, permute=False))
        np.testing.assert_allclose(np.sort(a), np.sort(b))
        assert not np.allclose(a, b)

    @pytest.mark.parametrize("spec", [
        TeacherSpec("zipf", 100, exponent=1.1, seed=7),
        TeacherSpec("two_spike", 30, spike_masses=(0.6, 0.3), tail_decay=0.5, seed=7),
        TeacherSpec("mixture_grid", 64),
    ])
    def test_deterministic_and_valid(self, spec):
        a, b = make_teacher(spec), make_teacher(spec)
        assert np.array_equal(a, b)
        assert abs(a.sum() - 1) < 1e-9 and np.all(a > 0)

    def test_two_spike_masses(self):
        p = make_teacher(TeacherSpec("two_spike", 10, spike_masses=(0.6, 0.3), seed=1))
        np.testing.assert_allclose(np.sort(p)[-2:], [0.3, 0.6])
        np.testing.assert_allclose(np.sort(p)[:-2], np.full(8, 0.1 / 8))

    def test_mixture_symmetric(self):
        spec = TeacherSpec("mixture_grid", 101, means=(0.0,), stds=(1.3,), weights=(1.0,))
        p = make_teacher(spec)
        np.testing.assert_allclose(p, p[::-1], rtol=1e-12)

    def test_bin_masses_sum_to_one_on_wide_grid(self):
        edges = np.linspace(-30, 30, 601)
        assert gaussian_bin_masses(edges, 0.3, 1.7).sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("kw", [
        dict(kind="zipf", vocab_size=10, exponent=0.0),
        dict(kind="zipf", vocab_size=1),
        dict(kind="two_spike", vocab_size=10, spike_masses=(0.6, 0.5)),
        dict(kind="mixture_grid", vocab_size=10, weights=(0.5, 0.4)),
        dict(kind="poisson", vocab_size=10),
    ])
    def test_invalid_specs(self, kw):
        with pytest.raises(ConfigError):
            make_teacher(TeacherSpec(**kw))
