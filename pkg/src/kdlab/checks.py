"""Randomized self-checks of the analytic gradients and the RKL decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gradients
from .distributions import softmax
from .objectives import KINDS, ObjectiveSpec, decompose_rkl, rkl

FLOOR = 1e-8


def random_instance(rng: np.random.Generator, v_min: int = 2, v_max: int = 64, scale: float = 2.0):
    """Teacher, student logits and target index with every probability >= FLOOR."""
    while True:
        V = int(rng.integers(v_min, v_max + 1))
        p = softmax(rng.normal(0.0, scale, V))
        z = rng.normal(0.0, scale, V)
        q = softmax(z)
        if p.min() >= FLOOR and q.min() >= FLOOR:
            return p, z, int(rng.integers(V))


def random_spec(kind: str, rng: np.random.Generator) -> ObjectiveSpec:
    if kind == "symkl":
        return ObjectiveSpec(kind, alpha=float(rng.uniform(0, 1)))
    if kind == "js":
        return ObjectiveSpec(kind, beta_js=float(rng.uniform(0.05, 0.95)))
    if kind in ("sfkl", "srkl"):
        return ObjectiveSpec(kind, lambda_skew=float(rng.uniform(0.05, 0.95)))
    if kind == "drkl":
        return ObjectiveSpec(kind, gamma=float(rng.uniform(0.1, 4.0)))
    return ObjectiveSpec(kind)


@dataclass
class GradcheckReport:
    trials: int
    seed: int
    tolerance: float
    max_error: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)
    identity_residual: float = 0.0
    prop2_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return all(e < self.tolerance for e in self.max_error.values())

    def lines(self) -> list:
        out = [f"{'kind':<6} {'max_rel_err':>12}  status"]
        for kind, err in self.max_error.items():
            out.append(f"{kind:<6} {err:12.3e}  {'ok' if err < self.tolerance else 'FAIL'}")
        out.append(f"rkl decomposition identity residual (max): {self.identity_residual:.3e}")
        out.append(f"target-gradient decomposition residual (max): {self.prop2_residual:.3e}")
        return out


def gradcheck(trials: int = 200, seed: int = 0, h: float = 1e-5, tolerance: float = 1e-5) -> GradcheckReport:
    """Compare analytic gradients against central differences for every kind.

    Each kind gets ``trials`` random instances. Errors are measured with
    :func:`kdlab.gradients.relative_error` over coordinates where both the
    teacher and student probabilities are at least 1e-8.
    """
    rng = np.random.default_rng(seed)
    report = GradcheckReport(trials, seed, tolerance)
    for kind in KINDS:
        worst = -1.0
        for _ in range(trials):
            p, z, m = random_instance(rng)
            spec = random_spec(kind, rng)
            q = softmax(z)
            mask = (p >= FLOOR) & (q >= FLOOR)
            err = gradients.relative_error(gradients.grad_any(spec, p, q, m),
                                           gradients.fd_gradient(spec, p, z, m, h), mask)
            if not np.isfinite(err):
                err = float("inf")
            if err > worst:
                worst = err
                report.worst[kind] = {"objective": spec.to_dict(), "teacher": p.tolist(),
                                      "student_logits": z.tolist(), "target_index": m, "error": err}
        report.max_error[kind] = worst
        if worst >= tolerance:
            report.worst[kind]["failed"] = True
    for _ in range(trials):
        p, z, m = random_instance(rng)
        q = softmax(z)
        d = decompose_rkl(p, q, m)
        report.identity_residual = max(report.identity_residual, abs(rkl(p, q) - d.total_rkl))
        t = gradients.grad_target_decomposed(p, q, m)
        report.prop2_residual = max(report.prop2_residual,
                                    abs(t.combined - gradients.grad_rkl(p, q)[m]))
    return report
