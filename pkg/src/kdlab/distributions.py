"""Categorical distributions over a finite vocabulary.

Probability vectors are plain 1-D float64 numpy arrays. Every constructor in
this module routes through :func:`prob_vector`, which clamps entries to an
``eps`` floor and renormalizes, so downstream log ratios stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import entr, ndtr

from .errors import ConfigError, InvalidInputError, TargetIndexError

EPS = 1e-12
# tolerance on the input sum before the floor/renormalize step
_SUM_TOL = 1e-6


def prob_vector(x, eps: float = EPS, normalize: bool = False) -> np.ndarray:
    """Validate ``x`` as a categorical distribution and apply the ``eps`` floor.

    With ``normalize=False`` the input must already sum to one (within 1e-6);
    with ``normalize=True`` any non-negative vector with positive mass is
    accepted and rescaled.
    """
    p = np.array(x, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise InvalidInputError(f"expected a 1-D vector with at least 2 entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("probability vector contains non-finite entries")
    if np.any(p < 0):
        raise InvalidInputError("probability vector contains negative entries")
    total = p.sum()
    if total <= 0:
        raise InvalidInputError("probability vector has no mass")
    if not normalize and abs(total - 1.0) > _SUM_TOL:
        raise InvalidInputError(f"probabilities sum to {total!r}, expected 1")
    p = np.maximum(p / total, eps)
    return p / p.sum()


def logit_vector(z) -> np.ndarray:
    z = np.array(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise InvalidInputError(f"expected a 1-D logit vector with at least 2 entries, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logit vector contains non-finite entries")
    return z


def softmax(z, temperature: float = 1.0) -> np.ndarray:
    """Max-shifted softmax of ``z / temperature``.

    The result is not floored: gradients in :mod:`kdlab.gradients` assume the
    exact softmax chain.
    """
    if not temperature > 0:
        raise InvalidInputError(f"temperature must be positive, got {temperature!r}")
    z = logit_vector(z) / temperature
    e = np.exp(z - z.max())
    return e / e.sum()


class BinaryMarginal(NamedTuple):
    target: float
    rest: float


class NonTargetDist(NamedTuple):
    probs: np.ndarray
    target_index: int


def check_index(m, size: int) -> int:
    if isinstance(m, (bool, np.bool_)) or not isinstance(m, (int, np.integer)):
        raise TargetIndexError(f"target index must be an integer, got {m!r}")
    if not 0 <= m < size:
        raise TargetIndexError(f"target index {m} out of range for V={size}")
    return int(m)


def split_target(p: np.ndarray, m: int) -> tuple[BinaryMarginal, NonTargetDist]:
    """Split ``p`` into the (target, rest) marginal and the renormalized non-target part.

    The non-target vector keeps the original index order with ``m`` removed.
    ``rest`` is summed from the non-target entries rather than taken as
    ``1 - p[m]``, which keeps it accurate when ``p[m]`` is close to one.
    """
    p = np.asarray(p, dtype=np.float64)
    m = check_index(m, p.size)
    others = np.delete(p, m)
    rest = float(others.sum())
    return BinaryMarginal(float(p[m]), rest), NonTargetDist(others / rest, m)


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    # entr treats 0 * log 0 as 0
    return float(max(np.sum(entr(p)), 0.0))


def confidence(p: np.ndarray) -> float:
    return float(np.max(p))


def active_set_size(q: np.ndarray, threshold: float) -> int:
    """Number of classes whose probability is strictly above ``threshold``."""
    if not 0 < threshold < 1:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold!r}")
    return int(np.count_nonzero(np.asarray(q) > threshold))


# --- discretized Gaussians -------------------------------------------------

def grid_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    return np.linspace(lo, hi, bins + 1)


def grid_centers(edges: np.ndarray) -> np.ndarray:
    return 0.5 * (edges[:-1] + edges[1:])


def gaussian_bin_masses(edges: np.ndarray, mean: float, std: float) -> np.ndarray:
    """Probability mass of N(mean, std^2) inside each bin (not renormalized).

    Bins right of the mean are integrated through the upper tail so that far
    bins do not lose all precision to cancellation.
    """
    u = (edges - mean) / std
    lo, hi = u[:-1], u[1:]
    left = ndtr(hi) - ndtr(lo)
    right = ndtr(-lo) - ndtr(-hi)
    return np.where(lo >= 0, right, left)


# --- teachers --------------------------------------------------------------

TEACHER_KINDS = ("zipf", "two_spike", "mixture_grid")


@dataclass(frozen=True)
class TeacherSpec:
    """Recipe for a fixed teacher distribution.

    ``zipf`` uses ``exponent`` (and ``permute`` to shuffle ranks with ``seed``);
    ``two_spike`` puts ``spike_masses`` on seeded positions and spreads the
    remainder over the other classes with weights ``exp(-tail_decay * k)``;
    ``mixture_grid`` integrates a Gaussian mixture over ``vocab_size`` bins
    spanning ``[grid_min, grid_max]``.
    """

    kind: str
    vocab_size: int
    seed: int = 0
    exponent: float = 1.0
    permute: bool = True
    spike_masses: tuple[float, ...] = (0.99,)
    tail_decay: float = 0.0
    means: tuple[float, ...] = (-2.0, 2.0)
    stds: tuple[float, ...] = (0.4, 0.4)
    weights: tuple[float, ...] = (0.7, 0.3)
    grid_min: float = -8.0
    grid_max: float = 8.0
    eps: float = field(default=EPS)

    def validate(self) -> None:
        if self.kind not in TEACHER_KINDS:
            raise ConfigError(f"unknown teacher kind {self.kind!r}; expected one of {TEACHER_KINDS}")
        if not isinstance(self.vocab_size, (int, np.integer)) or self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be an integer >= 2, got {self.vocab_size!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.kind == "zipf" and not self.exponent > 0:
            raise ConfigError(f"zipf exponent must be positive, got {self.exponent!r}")
        if self.kind == "two_spike":
            masses = tuple(self.spike_masses)
            if not 1 <= len(masses) <= 2 or any(not 0 < s < 1 for s in masses):
                raise ConfigError("spike_masses must hold one or two fractions in (0, 1)")
            if sum(masses) >= 1:
                raise ConfigError("spike_masses must leave some mass for the tail")
            if len(masses) >= self.vocab_size:
                raise ConfigError("vocab_size too small for the requested spikes")
            if self.tail_decay < 0:
                raise ConfigError("tail_decay must be non-negative")
        if self.kind == "mixture_grid":
            n = len(self.means)
            if n == 0 or len(self.stds) != n or len(self.weights) != n:
                raise ConfigError("means, stds and weights must have the same non-zero length")
            if any(s <= 0 for s in self.stds):
                raise ConfigError("mixture stds must be positive")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
                raise ConfigError("mixture weights must be non-negative and sum to 1")
            if not self.grid_max > self.grid_min:
                raise ConfigError("grid_max must exceed grid_min")

    @property
    def edges(self) -> np.ndarray:
        return grid_edges(self.grid_min, self.grid_max, self.vocab_size)


def make_teacher(spec: TeacherSpec) -> np.ndarray:
    spec.validate()
    V = int(spec.vocab_size)
    rng = np.random.default_rng(int(spec.seed))
    if spec.kind == "zipf":
        ranks = np.arange(1, V + 1, dtype=np.float64)
        if spec.permute:
            ranks = ranks[rng.permutation(V)]
        p = ranks ** (-float(spec.exponent))
    elif spec.kind == "two_spike":
        masses = np.asarray(spec.spike_masses, dtype=np.float64)
        spikes = rng.choice(V, size=masses.size, replace=False)
        tail_idx = np.setdiff1d(np.arange(V), spikes)
        tail = np.exp(-float(spec.tail_decay) * np.arange(tail_idx.size))
        p = np.empty(V)
        p[tail_idx] = (1.0 - masses.sum()) * tail / tail.sum()
        p[spikes] = masses
    else:
        edges = spec.edges
        p = np.zeros(V)
        for mu, sd, w in zip(spec.means, spec.stds, spec.weights):
            p += w * gaussian_bin_masses(edges, mu, sd)
    return prob_vector(p, eps=spec.eps, normalize=True)


def teacher_from_dict(d: dict) -> TeacherSpec:
    d = dict(d)
    for key in ("spike_masses", "means", "stds", "weights"):
        if key in d:
            d[key] = tuple(float(v) for v in d[key])
    try:
        spec = TeacherSpec(**d)
    except TypeError as exc:
        raise ConfigError(f"bad teacher fields: {exc}") from None
    spec.validate()
    return spec


def uniform(V: int) -> np.ndarray:
    return np.full(V, 1.0 / V)
