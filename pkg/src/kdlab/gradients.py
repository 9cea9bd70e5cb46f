"""Gradients of the objectives with respect to student logits.

The student is ``q = softmax(z)`` and every gradient here is d loss / d z.
Two routes are used:

* closed forms for FKL, RKL and the target-decomposed family (TRKL, NRKL,
  DRKL), written out coordinate by coordinate;
* for the mixture-based objectives, the probability-space gradient
  ``g = d loss / d q`` pushed through the softmax Jacobian
  ``dq_k/dz_j = q_k (delta_kj - q_j)``, i.e. ``grad_j = q_j (g_j - <q, g>)``.

Closed forms for the non-target coordinates of the decomposed objectives
(``k != m``, with ``r = 1 - q_m``, ``q_hat = q_k / r`` and
``N = KL(q_hat || p_hat)``)::

    TRKL:      -q_k q_m log(q_m (1 - p_m) / (p_m r))
    r * N:      q_k (log(q_hat_k / p_hat_k) - r N)
    N:          q_hat_k (log(q_hat_k / p_hat_k) - N)      (zero at k = m)

:func:`fd_gradient` is the independent central-difference check.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from .distributions import check_index, prob_vector, softmax, split_target
from .errors import ConfigError, ShapeError, UndefinedRatioError
from .objectives import ObjectiveSpec, evaluate, kl


class TargetGradReport(NamedTuple):
    trkl_grad: float
    nrkl_grad: float
    combined: float
    q_m: float
    p_m: float
    nrkl_value: float


def _pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"teacher and student shapes differ: {p.shape} vs {q.shape}")
    return prob_vector(p), prob_vector(q)


def through_softmax(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pull a probability-space gradient back to logits."""
    return q * (g - np.dot(q, g))


def grad_fkl(p, q) -> np.ndarray:
    p, q = _pair(p, q)
    return q - p


def grad_rkl(p, q) -> np.ndarray:
    p, q = _pair(p, q)
    log_ratio = np.log(q / p)
    return q * (log_ratio - np.dot(q, log_ratio))


# --- target-decomposed family ----------------------------------------------

def _split(p, q, m):
    m = check_index(m, p.size)
    (pm, prest), p_hat = split_target(p, m)
    (qm, qrest), q_hat = split_target(q, m)
    return m, pm, prest, p_hat.probs, qm, qrest, q_hat.probs


def _grad_trkl(p, q, m) -> np.ndarray:
    m, pm, prest, _, qm, qrest, _ = _split(p, q, m)
    log_odds = np.log(qm * prest / (pm * qrest))
    g = -qm * log_odds * q
    g[m] = qm * qrest * log_odds
    return g


def _nontarget_parts(p, q, m):
    m, _, _, p_hat, qm, qrest, q_hat = _split(p, q, m)
    log_ratio = np.log(q_hat / p_hat)
    n = float(np.dot(q_hat, log_ratio))
    return m, qm, qrest, q_hat, log_ratio, n


def _grad_nrkl_weighted(p, q, m) -> np.ndarray:
    m, qm, qrest, q_hat, log_ratio, n = _nontarget_parts(p, q, m)
    g = np.empty_like(q)
    g[np.arange(q.size) != m] = np.delete(q, m) * (log_ratio - qrest * n)
    g[m] = -qm * qrest * n
    return g


def _grad_nrkl_unweighted(p, q, m) -> np.ndarray:
    m, _, _, q_hat, log_ratio, n = _nontarget_parts(p, q, m)
    g = np.zeros_like(q)
    g[np.arange(q.size) != m] = q_hat * (log_ratio - n)
    return g


def grad_target_decomposed(p, q, m: int) -> TargetGradReport:
    """Gradients of the target and weighted non-target terms on the target logit."""
    p, q = _pair(p, q)
    m, pm, prest, p_hat, qm, qrest, q_hat = _split(p, q, m)
    n = kl(q_hat, p_hat) if p.size > 2 else 0.0
    t_grad = qm * qrest * float(np.log(qm * prest / (pm * qrest)))
    n_grad = -qm * qrest * n
    return TargetGradReport(t_grad, n_grad, t_grad + n_grad, qm, pm, n)


def grad_drkl(p, q, m: int, gamma: float = 1.0) -> np.ndarray:
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    p, q = _pair(p, q)
    return _grad_trkl(p, q, m) + gamma * _grad_nrkl_unweighted(p, q, m)


# --- probability-space gradients --------------------------------------------

def dloss_dq(spec: ObjectiveSpec, p, q, m: Optional[int] = None) -> np.ndarray:
    """d loss / d q for ``spec``, valid up to an additive multiple of ones."""
    if spec.needs_target and m is None:
        raise ConfigError(f"objective {spec.kind!r} needs a target index")
    p, q = _pair(p, q)
    k = spec.kind
    if k == "fkl":
        return -p / q
    if k == "rkl":
        return np.log(q / p) + 1.0
    if k == "symkl":
        a = spec.alpha
        return a * (-p / q) + (1 - a) * (np.log(q / p) + 1.0)
    if k == "js":
        b = spec.beta_js
        return (1 - b) * np.log(q / (b * p + (1 - b) * q))
    if k == "sfkl":
        lam = spec.lambda_skew
        return -(1 - lam) * p / (lam * p + (1 - lam) * q)
    if k == "srkl":
        lam = spec.lambda_skew
        mix = (1 - lam) * p + lam * q
        return np.log(q / mix) + 1.0 - lam * q / mix
    m, pm, prest, p_hat, qm, qrest, q_hat = _split(p, q, m)
    others = np.arange(q.size) != m
    g = np.zeros_like(q)
    if k in ("trkl", "drkl"):
        g[m] += np.log(qm / pm)
        g[others] += np.log(qrest / prest)
    if k in ("nrkl", "drkl"):
        log_ratio = np.log(q_hat / p_hat)
        if k == "nrkl":
            g[others] += log_ratio
        else:
            n = float(np.dot(q_hat, log_ratio))
            g[others] += spec.gamma * (log_ratio - n) / qrest
    return g


def grad_any(spec: ObjectiveSpec, p, q, m: Optional[int] = None) -> np.ndarray:
    """Analytic logit gradient for any objective kind."""
    if spec.needs_target and m is None:
        raise ConfigError(f"objective {spec.kind!r} needs a target index")
    k = spec.kind
    if k == "fkl":
        return grad_fkl(p, q)
    if k == "rkl":
        return grad_rkl(p, q)
    if k == "symkl":
        return spec.alpha * grad_fkl(p, q) + (1 - spec.alpha) * grad_rkl(p, q)
    if k == "drkl":
        return grad_drkl(p, q, m, spec.gamma)
    if k in ("trkl", "nrkl"):
        p, q = _pair(p, q)
        return _grad_trkl(p, q, m) if k == "trkl" else _grad_nrkl_weighted(p, q, m)
    p, q = _pair(p, q)
    return through_softmax(q, dloss_dq(spec, p, q, m))


def fd_gradient(spec: ObjectiveSpec, p_teacher, z_student, m: Optional[int] = None,
                h: float = 1e-5) -> np.ndarray:
    """Central differences of ``evaluate(spec, p, softmax(z), m)`` in each logit."""
    if not 1e-8 <= h <= 1e-3:
        raise ConfigError(f"finite-difference step must lie in [1e-8, 1e-3], got {h}")
    z = np.array(z_student, dtype=np.float64)
    grad = np.empty_like(z)
    for j in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[j] += h
        zm[j] -= h
        grad[j] = (evaluate(spec, p_teacher, softmax(zp), m)
                   - evaluate(spec, p_teacher, softmax(zm), m)) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, reference: np.ndarray, mask=None) -> float:
    """Max-norm error of ``analytic`` relative to the max-norm of ``reference``.

    Coordinates where ``mask`` is False are ignored.
    """
    a = np.asarray(analytic, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if mask is not None:
        a, r = a[mask], r[mask]
    if a.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(r))), 1e-12)
    return float(np.max(np.abs(a - r)) / scale)


def grad_norm_ratio(p, q) -> float:
    """||grad RKL||_2 / ||grad FKL||_2 at the current student."""
    f = np.linalg.norm(grad_fkl(p, q))
    if f <= 1e-12:
        raise UndefinedRatioError("forward-KL gradient vanishes; ratio undefined")
    return float(np.linalg.norm(grad_rkl(p, q)) / f)
