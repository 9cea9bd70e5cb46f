import numpy as np
import pytest

from kdlab.distributions import TeacherSpec
from kdlab.errors import ConfigError
from kdlab.gradients import dloss_dq
from kdlab.objectives import ObjectiveSpec, evaluate
from kdlab.distributions import make_teacher, prob_vector
from kdlab.toy_lab import MixtureConfig, fit_gaussian, mixture_toy, student_probs

SINGLE = TeacherSpec("mixture_grid", 512, means=(0.5,), stds=(0.8,), weights=(1.0,))
FULL_KINDS = ("fkl", "rkl", "symkl", "js", "sfkl", "srkl", "drkl")


def test_student_jacobian_matches_fd():
    edges = SINGLE.edges
    theta = np.array([0.3, np.log(1.2)])
    _, dq = student_probs(edges, *theta)
    h = 1e-6
    for i in range(2):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (student_probs(edges, *tp)[0] - student_probs(edges, *tm)[0]) / (2 * h)
        np.testing.assert_allclose(dq[:, i], fd, atol=1e-8)


@pytest.mark.parametrize("kind", FULL_KINDS)
def test_parameter_gradient_matches_fd(kind):
    spec = ObjectiveSpec(kind)
    p = make_teacher(TeacherSpec("mixture_grid", 128))
    m = int(np.argmax(p))
    edges = TeacherSpec("mixture_grid", 128).edges
    theta = np.array([-0.7, np.log(1.5)])

    def loss(t):
        return evaluate(spec, p, prob_vector(student_probs(edges, *t)[0]), m)

    q, dq = student_probs(edges, *theta)
    g = dloss_dq(spec, p, prob_vector(q), m) @ dq
    h = 1e-5
    fd = [(loss(theta + h * e) - loss(theta - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("kind", FULL_KINDS)
def test_realizable_teacher_recovered(kind):
    cfg = MixtureConfig(SINGLE, steps=1000, learning_rate=0.05, record_every=100)
    res = fit_gaussian(cfg, ObjectiveSpec(kind))
    assert res.mean == pytest.approx(0.5, abs=cfg.bin_width)
    assert res.std == pytest.approx(0.8, abs=cfg.bin_width)
    assert not res.warnings


def test_std_clamped_with_warning():
    teacher = TeacherSpec("mixture_grid", 512, means=(1 / 64,), stds=(0.01,), weights=(1.0,))
    cfg = MixtureConfig(teacher, steps=3000, learning_rate=0.002, init_std=0.3)
    with pytest.warns(RuntimeWarning, match="clamped"):
        res = fit_gaussian(cfg, ObjectiveSpec("fkl"))
    assert res.std == pytest.approx(cfg.bin_width)
    assert res.warnings


def test_needs_mixture_teacher():
    with pytest.raises(ConfigError):
        fit_gaussian(MixtureConfig(TeacherSpec("zipf", 10)), ObjectiveSpec("rkl"))


def test_off_grid_student_diverges_without_stopping_siblings():
    cfg = MixtureConfig(SINGLE, steps=5, init_mean=60.0, init_std=0.1)
    assert mixture_toy(cfg, [ObjectiveSpec("rkl")]) == [None]
