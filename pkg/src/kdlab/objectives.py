"""Divergence objectives between a teacher ``p`` and a student ``q``.

All values are in nats. Inputs go through :func:`kdlab.distributions.prob_vector`
so the eps floor applies uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .distributions import check_index, prob_vector, split_target
from .errors import ConfigError, ShapeError

KINDS = ("fkl", "rkl", "symkl", "js", "sfkl", "srkl", "trkl", "nrkl", "drkl")
TARGET_KINDS = ("trkl", "nrkl", "drkl")

# hyperparameter name -> (kinds using it, default)
_PARAMS = {
    "alpha": (("symkl",), 0.5),
    "lambda_skew": (("sfkl", "srkl"), 0.1),
    "beta_js": (("js",), 0.5),
    "gamma": (("drkl",), 1.0),
}


@dataclass(frozen=True)
class ObjectiveSpec:
    """A divergence kind together with the hyperparameters it uses.

    Hyperparameters that the kind does not use must stay ``None``; the ones it
    does use are filled with their defaults when omitted.
    """

    kind: str
    alpha: Optional[float] = None
    lambda_skew: Optional[float] = None
    beta_js: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ConfigError(f"unknown objective kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        for name, (kinds, default) in _PARAMS.items():
            value = getattr(self, name)
            if kind in kinds:
                object.__setattr__(self, name, float(default if value is None else value))
            elif value is not None:
                raise ConfigError(f"objective {kind!r} does not take {name!r}")
        if kind == "symkl" and not 0 <= self.alpha <= 1:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if kind in ("sfkl", "srkl") and not 0 < self.lambda_skew < 1:
            raise ConfigError(f"lambda_skew must lie in (0, 1), got {self.lambda_skew}")
        if kind == "js" and not 0 < self.beta_js < 1:
            raise ConfigError(f"beta_js must lie in (0, 1), got {self.beta_js}")
        if kind == "drkl" and not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")

    @property
    def needs_target(self) -> bool:
        return self.kind in TARGET_KINDS

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for name in _PARAMS:
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveSpec":
        d = dict(d)
        # config files may use the short flag names
        for short, name in (("lambda", "lambda_skew"), ("beta", "beta_js")):
            if short in d:
                if name in d:
                    raise ConfigError(f"both {short!r} and {name!r} given")
                d[name] = d.pop(short)
        if "kind" not in d:
            raise ConfigError("objective needs a 'kind'")
        unknown = set(d) - {"kind", *_PARAMS}
        if unknown:
            raise ConfigError(f"unknown objective keys: {sorted(unknown)}")
        return cls(**d)

    def label(self) -> str:
        extra = [f"{k}={v:g}" for k, v in self.to_dict().items() if k != "kind"]
        return self.kind + (f"({', '.join(extra)})" if extra else "")


class Decomposition(NamedTuple):
    trkl: float
    nrkl: float
    weight: float
    total_rkl: float


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"teacher and student shapes differ: {p.shape} vs {q.shape}")
    return prob_vector(p), prob_vector(q)


def kl(a: np.ndarray, b: np.ndarray) -> float:
    """Plain sum a_j log(a_j / b_j); no validation."""
    return float(np.sum(a * np.log(a / b)))


def fkl(p, q) -> float:
    p, q = _pair(p, q)
    return kl(p, q)


def rkl(p, q) -> float:
    p, q = _pair(p, q)
    return kl(q, p)


def sym_kl(p, q, alpha: float = 0.5) -> float:
    if not 0 <= alpha <= 1:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    p, q = _pair(p, q)
    return alpha * kl(p, q) + (1 - alpha) * kl(q, p)


def js(p, q, beta: float = 0.5) -> float:
    """Generalized Jensen-Shannon divergence with mixture beta*p + (1-beta)*q."""
    if not 0 < beta < 1:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    p, q = _pair(p, q)
    mix = beta * p + (1 - beta) * q
    return beta * kl(p, mix) + (1 - beta) * kl(q, mix)


def sfkl(p, q, lam: float = 0.1) -> float:
    """KL(p || lam*p + (1-lam)*q)."""
    if not 0 < lam < 1:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    p, q = _pair(p, q)
    return kl(p, lam * p + (1 - lam) * q)


def srkl(p, q, lam: float = 0.1) -> float:
    """KL(q || (1-lam)*p + lam*q)."""
    if not 0 < lam < 1:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    p, q = _pair(p, q)
    return kl(q, (1 - lam) * p + lam * q)


def _binary_kl(a: float, a_rest: float, b: float, b_rest: float) -> float:
    return a * np.log(a / b) + a_rest * np.log(a_rest / b_rest)


def decompose_rkl(p, q, m: int) -> Decomposition:
    """Target / non-target split of KL(q || p) around class ``m``.

    ``trkl`` is the KL between the binary (target, rest) marginals, ``nrkl`` the
    KL between the renormalized non-target distributions, and ``weight`` is
    ``1 - q[m]``. ``total_rkl`` recombines them as ``trkl + weight * nrkl``.
    """
    p, q = _pair(p, q)
    m = check_index(m, p.size)
    (pm, prest), p_hat = split_target(p, m)
    (qm, qrest), q_hat = split_target(q, m)
    trkl = float(_binary_kl(qm, qrest, pm, prest))
    nrkl = kl(q_hat.probs, p_hat.probs) if p.size > 2 else 0.0
    return Decomposition(trkl, nrkl, qrest, trkl + qrest * nrkl)


def trkl(p, q, m: int) -> float:
    return decompose_rkl(p, q, m).trkl


def nrkl(p, q, m: int) -> float:
    """Weighted non-target term ``(1 - q_m) * KL(q_hat || p_hat)``."""
    d = decompose_rkl(p, q, m)
    return d.weight * d.nrkl


def drkl(p, q, m: int, gamma: float = 1.0) -> float:
    """Target term plus ``gamma`` times the unweighted non-target KL."""
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    d = decompose_rkl(p, q, m)
    return d.trkl + gamma * d.nrkl


def evaluate(spec: ObjectiveSpec, p, q, m: Optional[int] = None) -> float:
    if spec.needs_target and m is None:
        raise ConfigError(f"objective {spec.kind!r} needs a target index")
    k = spec.kind
    if k == "fkl":
        return fkl(p, q)
    if k == "rkl":
        return rkl(p, q)
    if k == "symkl":
        return sym_kl(p, q, spec.alpha)
    if k == "js":
        return js(p, q, spec.beta_js)
    if k == "sfkl":
        return sfkl(p, q, spec.lambda_skew)
    if k == "srkl":
        return srkl(p, q, spec.lambda_skew)
    if k == "trkl":
        return trkl(p, q, m)
    if k == "nrkl":
        return nrkl(p, q, m)
    return drkl(p, q, m, spec.gamma)
