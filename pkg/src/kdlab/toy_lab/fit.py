"""Full-batch gradient descent of student logits against a fixed teacher."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .. import distributions as dist
from ..errors import ConfigError, RunDivergedError, UndefinedRatioError
from ..gradients import grad_any, grad_norm_ratio
from ..objectives import ObjectiveSpec, decompose_rkl, evaluate

log = logging.getLogger(__name__)

Monitor = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class InitSpec:
    kind: str = "zero_logits"
    std: float = 0.0
    seed: int = 0

    def validate(self):
        if self.kind not in ("zero_logits", "gaussian"):
            raise ConfigError(f"unknown init kind {self.kind!r}")
        if self.kind == "gaussian" and not self.std > 0:
            raise ConfigError("gaussian init needs a positive std")

    def logits(self, V: int) -> np.ndarray:
        if self.kind == "zero_logits":
            return np.zeros(V)
        return np.random.default_rng(int(self.seed)).normal(0.0, self.std, V)


@dataclass(frozen=True)
class RunConfig:
    teacher: dist.TeacherSpec
    objective: ObjectiveSpec
    target_index: Union[str, int] = "argmax"
    steps: int = 300
    learning_rate: float = 0.5
    init: InitSpec = field(default_factory=InitSpec)
    record_every: int = 1
    active_set_threshold: float = 1e-3

    def validate(self):
        self.teacher.validate()
        self.init.validate()
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise ConfigError(f"steps must be a positive integer, got {self.steps!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not isinstance(self.record_every, (int, np.integer)) or self.record_every < 1:
            raise ConfigError(f"record_every must be a positive integer, got {self.record_every!r}")
        if not 0 < self.active_set_threshold < 1:
            raise ConfigError("active_set_threshold must lie in (0, 1)")
        if self.target_index != "argmax":
            dist.check_index(self.target_index, self.teacher.vocab_size)

    def resolve_target(self, p: np.ndarray) -> int:
        if self.target_index == "argmax":
            return int(np.argmax(p))
        return dist.check_index(self.target_index, p.size)


CSV_FIELDS = ("step", "loss", "trkl", "nrkl", "one_minus_qm", "entropy", "confidence",
              "active_set_size", "grad_norm", "grad_ratio_rho")


@dataclass
class TrajectoryRow:
    step: int
    loss: float
    trkl: float
    nrkl: float
    one_minus_qm: float
    entropy: float
    confidence: float
    active_set_size: int
    grad_norm: float
    grad_ratio_rho: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def is_finite(self) -> bool:
        vals = [self.loss, self.trkl, self.nrkl, self.one_minus_qm, self.entropy,
                self.confidence, self.grad_norm]
        if self.grad_ratio_rho is not None:
            vals.append(self.grad_ratio_rho)
        return bool(np.all(np.isfinite(vals)))


@dataclass
class Trajectory:
    config: RunConfig
    rows: list
    final_student: np.ndarray
    teacher: np.ndarray
    target_index: int
    diverged: Optional[str] = None

    def column(self, name: str) -> np.ndarray:
        if name in CSV_FIELDS:
            return np.array([getattr(r, name) for r in self.rows], dtype=float)
        return np.array([r.extra[name] for r in self.rows], dtype=float)

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.step for r in self.rows])


def measure(p: np.ndarray, q: np.ndarray, m: int, spec: ObjectiveSpec, grad: np.ndarray,
            step: int, threshold: float, monitors=None) -> TrajectoryRow:
    d = decompose_rkl(p, q, m)
    try:
        rho = grad_norm_ratio(p, q)
    except UndefinedRatioError:
        rho = None
    row = TrajectoryRow(
        step=step,
        loss=evaluate(spec, p, q, m),
        trkl=d.trkl,
        nrkl=d.nrkl,
        one_minus_qm=d.weight,
        entropy=dist.entropy(q),
        confidence=dist.confidence(q),
        active_set_size=dist.active_set_size(q, threshold),
        grad_norm=float(np.linalg.norm(grad)),
        grad_ratio_rho=rho,
    )
    for name, fn in (monitors or {}).items():
        row.extra[name] = float(fn(p, q))
    return row


def run_fit(config: RunConfig, monitors: Optional[dict] = None) -> Trajectory:
    """Fit student logits to the teacher by ``z <- z - lr * grad``.

    Rows are recorded at step 0 (the initial student), every
    ``record_every`` updates, and after the final update. ``monitors`` maps
    extra column names to ``fn(p, q)``; their values land in ``row.extra``.

    Raises :class:`RunDivergedError` carrying the partial trajectory if the
    loss or the logits stop being finite.
    """
    config.validate()
    p = dist.make_teacher(config.teacher)
    m = config.resolve_target(p)
    spec = config.objective
    z = config.init.logits(p.size)
    rows = []
    q = dist.softmax(z)
    for step in range(config.steps + 1):
        g = grad_any(spec, p, q, m)
        if step % config.record_every == 0 or step == config.steps:
            row = measure(p, q, m, spec, g, step, config.active_set_threshold, monitors)
            if not row.is_finite():
                partial = Trajectory(config, rows, q, p, m, diverged=f"non-finite values at step {step}")
                raise RunDivergedError(partial.diverged, rows[-1] if rows else None, partial)
            rows.append(row)
        if step == config.steps:
            break
        z = z - config.learning_rate * g
        if not np.all(np.isfinite(z)):
            partial = Trajectory(config, rows, q, p, m, diverged=f"non-finite logits after step {step}")
            raise RunDivergedError(partial.diverged, rows[-1] if rows else None, partial)
        q = dist.softmax(z)
    return Trajectory(config, rows, q, p, m)


def compare_objectives(base: RunConfig, specs, monitors: Optional[dict] = None,
                       max_workers: int = 1) -> list:
    """Run ``base`` once per objective in ``specs`` from the same initialization.

    A diverged run contributes its partial trajectory (``diverged`` set) and
    does not stop the others.
    """
    specs = list(specs)
    if not specs:
        raise ConfigError("need at least one objective")

    def one(spec):
        try:
            return run_fit(replace(base, objective=spec), monitors)
        except RunDivergedError as exc:
            log.warning("run %s diverged: %s", spec.label(), exc)
            return exc.partial

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, specs))
    return [one(s) for s in specs]


def rho_probe(config: RunConfig) -> list:
    """(step, rho) at every recorded step of an RKL run built from ``config``."""
    traj = run_fit(replace(config, objective=ObjectiveSpec("rkl")))
    series = []
    for row in traj.rows:
        if row.grad_ratio_rho is None:
            raise UndefinedRatioError(f"gradient ratio undefined at step {row.step}")
        series.append((row.step, row.grad_ratio_rho))
    return series


def steps_to_threshold(traj: Trajectory, column: str, tau: float) -> Optional[int]:
    """First recorded step whose ``column`` value is below ``tau``, or None."""
    for row in traj.rows:
        value = getattr(row, column) if column in CSV_FIELDS else row.extra[column]
        if value < tau:
            return row.step
    return None


def calibrate_threshold(trajectories, column: str, slack: float = 0.1) -> float:
    """Smallest level every run reaches by its last row, inflated by ``slack``."""
    finals = [getattr(t.rows[-1], column) if column in CSV_FIELDS else t.rows[-1].extra[column]
              for t in trajectories]
    return float(max(finals) * (1.0 + slack))
