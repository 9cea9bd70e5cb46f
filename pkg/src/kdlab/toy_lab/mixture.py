"""Unimodal Gaussian student against a discretized Gaussian-mixture teacher.

The student has two parameters, a mean and a log standard deviation. Its
categorical distribution is the Gaussian's mass in each grid bin,
renormalized over the grid, so every objective is evaluated exactly on the
same categoricals as the logit toys.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .. import distributions as dist
from ..errors import ConfigError, RunDivergedError
from ..gradients import dloss_dq
from ..objectives import ObjectiveSpec, decompose_rkl, evaluate
from .fit import Trajectory, TrajectoryRow

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixtureConfig:
    teacher: dist.TeacherSpec
    steps: int = 2000
    learning_rate: float = 0.05
    init_mean: float = 0.0
    init_std: float = 2.0
    record_every: int = 10
    active_set_threshold: float = 1e-3
    # defaults to one bin width when None
    min_std: Optional[float] = None

    def validate(self):
        if self.teacher.kind != "mixture_grid":
            raise ConfigError("mixture toy needs a mixture_grid teacher")
        self.teacher.validate()
        if self.steps < 1 or self.record_every < 1:
            raise ConfigError("steps and record_every must be positive")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not self.init_std > 0:
            raise ConfigError("init_std must be positive")

    @property
    def bin_width(self) -> float:
        t = self.teacher
        return (t.grid_max - t.grid_min) / t.vocab_size


@dataclass
class MixtureResult:
    objective: ObjectiveSpec
    trajectory: Trajectory
    mean: float
    std: float
    density: np.ndarray
    centers: np.ndarray
    bin_width: float
    warnings: list = field(default_factory=list)

    @property
    def peak_density(self) -> float:
        return float(self.density.max() / self.bin_width)

    @property
    def teacher_peak_density(self) -> float:
        return float(self.trajectory.teacher.max() / self.bin_width)


def student_probs(edges: np.ndarray, mean: float, log_std: float):
    """Grid distribution of N(mean, exp(log_std)^2) and its Jacobian.

    Returns ``(q, dq)`` where ``dq`` has shape (V, 2): derivatives of ``q``
    with respect to the mean and the log standard deviation.
    """
    std = float(np.exp(log_std))
    w = dist.gaussian_bin_masses(edges, mean, std)
    u = (edges - mean) / std
    phi = norm.pdf(u)
    dw_dmean = -(phi[1:] - phi[:-1]) / std
    dw_dlogstd = -(phi[1:] * u[1:] - phi[:-1] * u[:-1])
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise RunDivergedError(f"student N({mean:g}, {std:g}^2) has no mass on the grid")
    q = w / total
    dw = np.stack([dw_dmean, dw_dlogstd], axis=1)
    dq = (dw - np.outer(q, dw.sum(axis=0))) / total
    return q, dq


def _row(p, q, m, spec, grad, step, threshold, mean, std) -> TrajectoryRow:
    qf = dist.prob_vector(q)
    d = decompose_rkl(p, qf, m)
    row = TrajectoryRow(
        step=step,
        loss=evaluate(spec, p, qf, m),
        trkl=d.trkl,
        nrkl=d.nrkl,
        one_minus_qm=d.weight,
        entropy=dist.entropy(qf),
        confidence=dist.confidence(qf),
        active_set_size=dist.active_set_size(qf, threshold),
        grad_norm=float(np.linalg.norm(grad)),
    )
    row.extra.update(mean=mean, std=std)
    return row


def fit_gaussian(config: MixtureConfig, spec: ObjectiveSpec) -> MixtureResult:
    """Gradient descent on (mean, log std) for one objective."""
    config.validate()
    p = dist.make_teacher(config.teacher)
    m = int(np.argmax(p))
    edges = config.teacher.edges
    min_std = config.min_std if config.min_std is not None else config.bin_width
    min_log_std = float(np.log(min_std))
    theta = np.array([config.init_mean, np.log(config.init_std)], dtype=np.float64)
    notes = []
    rows = []
    q = None
    for step in range(config.steps + 1):
        try:
            q, dq = student_probs(edges, theta[0], theta[1])
        except RunDivergedError as exc:
            partial = Trajectory(config, rows, q, p, m, diverged=str(exc))
            raise RunDivergedError(str(exc), rows[-1] if rows else None, partial) from None
        g = dloss_dq(spec, p, dist.prob_vector(q), m) @ dq
        if step % config.record_every == 0 or step == config.steps:
            row = _row(p, q, m, spec, g, step, config.active_set_threshold,
                       float(theta[0]), float(np.exp(theta[1])))
            if not row.is_finite():
                partial = Trajectory(config, rows, q, p, m, diverged=f"non-finite values at step {step}")
                raise RunDivergedError(partial.diverged, rows[-1] if rows else None, partial)
            rows.append(row)
        if step == config.steps:
            break
        theta = theta - config.learning_rate * g
        if not np.all(np.isfinite(theta)):
            partial = Trajectory(config, rows, q, p, m, diverged=f"non-finite parameters after step {step}")
            raise RunDivergedError(partial.diverged, rows[-1] if rows else None, partial)
        if theta[1] < min_log_std:
            theta[1] = min_log_std
            if not notes:
                msg = (f"{spec.label()}: student std clamped to grid resolution "
                       f"{min_std:g} at step {step + 1}")
                notes.append(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
    traj = Trajectory(config, rows, dist.prob_vector(q), p, m)
    return MixtureResult(spec, traj, float(theta[0]), float(np.exp(theta[1])),
                         traj.final_student, dist.grid_centers(edges), config.bin_width, notes)


def mixture_toy(config: MixtureConfig, specs) -> list:
    """One :class:`MixtureResult` per objective, all from the same initialization.

    A diverged objective is logged and contributes ``None``.
    """
    results = []
    for spec in specs:
        try:
            results.append(fit_gaussian(config, spec))
        except RunDivergedError as exc:
            log.warning("mixture run %s diverged: %s", spec.label(), exc)
            results.append(None)
    return results
