"""Distributions over [2k], the paired perturbation family, and divergences.

All logarithms are base 2. Domain symbols are 0-indexed in code, so the
pair ``(2i-1, 2i)`` of 1-indexed notation is ``(2i, 2i + 1)`` here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

import numpy as np

SUM_TOL = 1e-12


class DomainMismatchError(ValueError):
    pass


class AbsoluteContinuityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability mass function over ``2k`` symbols.

    ``probs`` is stored as a read-only float64 array. Construction never
    renormalizes; a vector that does not sum to one within ``1e-12`` is
    rejected.
    """

    k: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if probs.size != 2 * self.k:
            raise ValueError(f"expected {2 * self.k} masses, got {probs.size}")
        if np.any(probs < 0) or np.any(probs > 1) or not np.all(np.isfinite(probs)):
            raise ValueError("masses must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"masses sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "Distribution":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.size % 2:
            raise ValueError("domain size must be even")
        return cls(probs.size // 2, probs)

    @property
    def support_size(self) -> int:
        return 2 * self.k

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` i.i.d. symbols by inverse CDF on ``rng.random(n)``."""
        return symbols_from_uniforms(self, rng.random(n))

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.k, self.probs.tobytes()))

    def __repr__(self):
        return f"Distribution(k={self.k}, probs={np.array2string(self.probs, precision=4)})"


def symbols_from_uniforms(p: Distribution, uniforms: np.ndarray) -> np.ndarray:
    """Map uniforms in [0, 1) to symbols of ``p`` by inverse CDF.

    Zero-mass symbols are never returned.
    """
    cdf = p.cdf()
    idx = np.searchsorted(cdf, uniforms, side="right")
    last = int(np.flatnonzero(p.probs > 0)[-1])
    return np.minimum(idx, last)


@dataclass(frozen=True, eq=False)
class PerturbationSign:
    z: np.ndarray
    eps: float

    def __post_init__(self):
        z = np.array(self.z, dtype=np.int64).reshape(-1)
        if z.size < 1:
            raise ValueError("sign vector must be nonempty")
        if not np.all(np.isin(z, (-1, 1))):
            raise ValueError("sign entries must be -1 or +1")
        if not 0 < self.eps <= 0.25:
            raise ValueError(f"eps must lie in (0, 1/4], got {self.eps}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return self.z.size

    def flip(self, i: int) -> "PerturbationSign":
        z = self.z.copy()
        z[i] = -z[i]
        return PerturbationSign(z, self.eps)

    def __eq__(self, other):
        if not isinstance(other, PerturbationSign):
            return NotImplemented
        return self.eps == other.eps and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash((self.eps, self.z.tobytes()))


def all_signs(k: int) -> np.ndarray:
    """All ``2**k`` sign vectors as rows, in lexicographic order with -1 < +1."""
    return np.array(list(itertools.product((-1, 1), repeat=k)), dtype=np.int64).reshape(-1, k)


def uniform_dist(k: int) -> Distribution:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return Distribution(k, np.full(2 * k, 1.0 / (2 * k)))


# Pair masses are (1 ± scale*eps*z_i)/(2k). The family's defining formula
# uses scale 4 (distance 2*eps from uniform); the information bounds are
# derived for scale 2 (distance exactly eps).
DEFINITION_SCALE = 4.0
TV_SCALE = 2.0


def paninski_masses(z: np.ndarray, eps: float, scale: float = DEFINITION_SCALE) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if scale * eps > 1:
        raise ValueError(f"scale*eps = {scale * eps} exceeds 1; masses would be negative")
    k = z.size
    out = np.empty(2 * k)
    out[0::2] = (1 + scale * eps * z) / (2 * k)
    out[1::2] = (1 - scale * eps * z) / (2 * k)
    return out


def paninski_dist(sign: PerturbationSign, scale: float = DEFINITION_SCALE) -> Distribution:
    """Perturbed distribution shifting ``±scale*eps/(2k)`` mass within each pair.

    Its total variation distance from uniform is ``scale * eps / 2``: ``2*eps``
    at the default scale and exactly ``eps`` at ``TV_SCALE``.
    """
    return Distribution(sign.k, paninski_masses(sign.z, sign.eps, scale))


def far_dist(z: Sequence[int], eps: float) -> Distribution:
    """Member of the perturbation family at total variation exactly ``eps`` from uniform."""
    z = np.asarray(z)
    return Distribution(z.size, paninski_masses(z, eps, TV_SCALE))


def _check_same_domain(p: Distribution, q: Distribution):
    if p.k != q.k:
        raise DomainMismatchError(f"domains differ: 2*{p.k} vs 2*{q.k}")


def tv(p: Distribution, q: Distribution) -> float:
    _check_same_domain(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def _kl_array(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    if np.any(q[support] == 0):
        raise AbsoluteContinuityError("q vanishes where p has mass")
    return float(np.sum(p[support] * np.log2(p[support] / q[support])))


def kl(p: Distribution, q: Distribution) -> float:
    """Kullback-Leibler divergence in bits."""
    _check_same_domain(p, q)
    return max(_kl_array(p.probs, q.probs), 0.0)


def chi2(p: Distribution, q: Distribution) -> float:
    _check_same_domain(p, q)
    support = q.probs > 0
    if np.any(p.probs[~support] > 0):
        raise AbsoluteContinuityError("q vanishes where p has mass")
    d = p.probs[support] - q.probs[support]
    return float(np.sum(d * d / q.probs[support]))


def binary_entropy(t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"binary entropy needs t in [0, 1], got {t}")
    if t in (0.0, 1.0):
        return 0.0
    return -t * math.log2(t) - (1 - t) * math.log2(1 - t)


def hamming(u: Sequence[int], v: Sequence[int]) -> int:
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("sign vectors differ in length")
    return int(np.sum(u != v))


def l2(p: Distribution, q: Distribution) -> float:
    _check_same_domain(p, q)
    return float(np.linalg.norm(p.probs - q.probs))


def iter_paninski(k: int, eps: float, scale: float = DEFINITION_SCALE) -> Iterator[tuple[np.ndarray, Distribution]]:
    for z in all_signs(k):
        yield z, paninski_dist(PerturbationSign(z, eps), scale)


def dist_from_json(obj: dict[str, Any]) -> Distribution:
    kind = obj.get("type")
    if kind == "uniform":
        return uniform_dist(int(obj["k"]))
    if kind == "paninski":
        sign = PerturbationSign(obj["z"], float(obj["eps"]))
        if "k" in obj and int(obj["k"]) != sign.k:
            raise ValueError("k does not match length of z")
        return paninski_dist(sign, float(obj.get("scale", DEFINITION_SCALE)))
    if kind == "explicit":
        return Distribution.from_probs(obj["probs"])
    raise ValueError(f"unknown distribution type {kind!r}")


def dist_to_json(p: Distribution) -> dict[str, Any]:
    return {"type": "explicit", "probs": p.probs.tolist()}
