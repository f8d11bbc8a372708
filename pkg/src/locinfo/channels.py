"""Channels as row-stochastic matrices and the channel information matrix.

A channel maps inputs ``0..2k-1`` to a finite labeled alphabet. The
information matrix ``H(W)`` is the ``k x k`` PSD matrix whose ``(i, j)``
entry sums, over messages ``y``, the product of the within-pair
differences ``W(y|2i) - W(y|2i+1)`` and ``W(y|2j) - W(y|2j+1)`` divided by
the column mass ``sum_x W(y|x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np
import scipy.linalg

from .dist_core import DomainMismatchError, Distribution

ROW_TOL = 1e-12
SYM_TOL = 1e-10
PSD_TOL = 1e-9
MAX_LABELS = 2**16

ERASED = "⊥"
ONE_STAR = "1*"
ZERO_STAR = "0*"


@dataclass(frozen=True, eq=False)
class Channel:
    k: int
    labels: tuple
    matrix: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape != (2 * self.k, len(labels)):
            raise ValueError(
                f"matrix must be {2 * self.k} x {len(labels)}, got {matrix.shape}"
            )
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique")
        if len(labels) > MAX_LABELS:
            raise ValueError(f"alphabet exceeds {MAX_LABELS} labels")
        if np.any(matrix < 0) or np.any(matrix > 1):
            raise ValueError("channel entries must lie in [0, 1]")
        bad = np.abs(matrix.sum(axis=1) - 1.0) > ROW_TOL
        if np.any(bad):
            raise ValueError(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        matrix.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)

    def permuted(self, perm: Sequence[int]) -> "Channel":
        """Reindex inputs so that new input ``x`` is old input ``perm[x]``."""
        perm = np.asarray(perm)
        if sorted(perm.tolist()) != list(range(2 * self.k)):
            raise ValueError("perm must be a permutation of the input domain")
        return Channel(self.k, self.labels, self.matrix[perm])

    def __eq__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented
        return (
            self.k == other.k
            and self.labels == other.labels
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.k, self.labels, self.matrix.tobytes()))


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    k: int
    entries: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64)
        eig = np.array(self.eigenvalues, dtype=np.float64)
        if entries.shape != (self.k, self.k):
            raise ValueError("entries must be k x k")
        if not np.allclose(entries, entries.T, rtol=0, atol=SYM_TOL):
            raise ValueError("information matrix is not symmetric")
        if eig.size != self.k or np.any(np.diff(eig) > SYM_TOL):
            raise ValueError("eigenvalues must be k values in nonincreasing order")
        entries.setflags(write=False)
        eig.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "eigenvalues", eig)

    @classmethod
    def from_entries(cls, entries: np.ndarray) -> "InfoMatrix":
        entries = np.asarray(entries, dtype=np.float64)
        entries = 0.5 * (entries + entries.T)
        eig = scipy.linalg.eigvalsh(entries)[::-1]
        return cls(entries.shape[0], entries, eig)

    @property
    def is_psd(self) -> bool:
        return bool(self.eigenvalues[-1] >= -PSD_TOL)


@dataclass(frozen=True)
class FamilyNorms:
    op: float
    nuclear: float
    frobenius: float

    def holder_holds(self, tol: float = PSD_TOL) -> bool:
        return (
            self.frobenius**2 <= self.op * self.nuclear + tol
            and self.op <= self.frobenius + tol
            and self.frobenius <= self.nuclear + tol
        )

    @classmethod
    def family_max(cls, many: Sequence["FamilyNorms"]) -> "FamilyNorms":
        return cls(
            max(m.op for m in many),
            max(m.nuclear for m in many),
            max(m.frobenius for m in many),
        )


def apply(ch: Channel, x: int, rng: np.random.Generator):
    """Sample one message label for input ``x``."""
    return ch.labels[apply_uniform(ch, x, rng.random())]


def apply_uniform(ch: Channel, x: int, v: float) -> int:
    """Label index selected by inverse CDF of row ``x`` at uniform ``v``."""
    row = ch.matrix[x]
    idx = int(np.searchsorted(np.cumsum(row), v, side="right"))
    if idx >= row.size:
        idx = int(np.flatnonzero(row > 0)[-1])
    return idx


def output_dist(ch: Channel, p: Distribution) -> np.ndarray:
    """Push-forward law of the message, indexed like ``ch.labels``."""
    if ch.k != p.k:
        raise DomainMismatchError(f"channel over 2*{ch.k} inputs, distribution over 2*{p.k}")
    return p.probs @ ch.matrix


def pair_differences(matrix: np.ndarray) -> np.ndarray:
    """Rows ``W(.|2i) - W(.|2i+1)`` for each pair ``i``; shape ``(k, |Y|)``."""
    return matrix[0::2] - matrix[1::2]


def info_matrix_entries(matrix: np.ndarray) -> np.ndarray:
    col = matrix.sum(axis=0)
    d = pair_differences(matrix)
    live = col > 0
    # unreachable labels contribute 0; their differences vanish as well
    d = d[:, live] / np.sqrt(col[live])
    return d @ d.T


def info_matrix(ch: Channel, perm: Sequence[int] | None = None) -> InfoMatrix:
    if perm is not None:
        ch = ch.permuted(perm)
    return InfoMatrix.from_entries(info_matrix_entries(ch.matrix))


def gershgorin_bound(h: InfoMatrix) -> float:
    return float(np.abs(h.entries).sum(axis=1).max())


def norms(h: InfoMatrix) -> FamilyNorms:
    if not h.is_psd:
        raise ValueError(f"matrix is not PSD: min eigenvalue {h.eigenvalues[-1]:.3e}")
    op = float(max(h.eigenvalues[0], 0.0))
    if op > gershgorin_bound(h) + PSD_TOL:
        raise ArithmeticError("largest eigenvalue exceeds the Gershgorin row-sum bound")
    return FamilyNorms(
        op=op,
        nuclear=float(np.trace(h.entries)),
        frobenius=float(np.linalg.norm(h.entries, "fro")),
    )


def channel_norms(ch: Channel) -> FamilyNorms:
    return norms(info_matrix(ch))


def is_ldp(ch: Channel, rho: float) -> bool:
    """True when every column satisfies ``max W(y|x) <= e^rho * min W(y|x)``."""
    m = ch.matrix
    live = m.max(axis=0) > 0
    hi = m[:, live].max(axis=0)
    lo = m[:, live].min(axis=0)
    return bool(np.all(hi <= math.exp(rho) * lo * (1 + 1e-12)))


def is_b_bit(ch: Channel, bits: int) -> bool:
    if bits < 1:
        raise ValueError("bits must be positive")
    return ch.n_labels <= 2**bits


# -- constructors ---------------------------------------------------------


def identity_channel(k: int) -> Channel:
    return Channel(k, tuple(range(2 * k)), np.eye(2 * k))


def constant_channel(k: int, label: Hashable = 0) -> Channel:
    return Channel(k, (label,), np.ones((2 * k, 1)))


def randomized_response(k: int, rho: float) -> Channel:
    if rho <= 0:
        raise ValueError("rho must be positive")
    d = 2 * k
    er = math.exp(rho)
    m = np.full((d, d), 1.0 / (er + d - 1))
    np.fill_diagonal(m, er / (er + d - 1))
    return Channel(k, tuple(range(d)), m)


def partial_erasure(k: int, eta: float, x_star: int) -> Channel:
    """Pass ``x_star`` exactly; pass every other symbol with probability ``eta``."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    d = 2 * k
    if not 0 <= x_star < d:
        raise ValueError(f"x_star must lie in [0, {d})")
    m = np.zeros((d, d + 1))
    m[np.arange(d), np.arange(d)] = eta
    m[:, d] = 1 - eta
    m[x_star, x_star] = 1.0
    m[x_star, d] = 0.0
    return Channel(k, tuple(range(d)) + (ERASED,), m)


def leaky_query(k: int, eta: float, u: Sequence[float]) -> Channel:
    """Leak the input with probability ``eta``, else answer the query ``u``."""
    if not 0 <= eta < 1:
        raise ValueError("eta must lie in [0, 1)")
    d = 2 * k
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (d,) or np.any(u < 0) or np.any(u > 1):
        raise ValueError(f"u must be {d} values in [0, 1]")
    m = np.zeros((d, d + 2))
    m[np.arange(d), np.arange(d)] = eta
    m[:, d] = (1 - eta) * u
    m[:, d + 1] = (1 - eta) * (1 - u)
    return Channel(k, tuple(range(d)) + (ONE_STAR, ZERO_STAR), m)


def query_direction(u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    d = u.size
    mass = u.sum()
    if mass <= 0 or mass >= d:
        return np.zeros(d // 2)
    return (u[0::2] - u[1::2]) * math.sqrt(d / (mass * (d - mass)))


def leaky_query_info_closed_form(k: int, eta: float, u: Sequence[float]) -> InfoMatrix:
    delta = query_direction(u)
    if delta.size != k:
        raise ValueError(f"u must have {2 * k} entries")
    return InfoMatrix.from_entries(2 * eta * np.eye(k) + (1 - eta) * np.outer(delta, delta))


def alternating_query(k: int) -> np.ndarray:
    """Query ``(1, 0, 1, 0, ...)`` whose direction has squared norm 2."""
    u = np.zeros(2 * k)
    u[0::2] = 1.0
    return u


def random_channel(k: int, n_labels: int, rng: np.random.Generator) -> Channel:
    m = rng.dirichlet(np.ones(n_labels), size=2 * k)
    # restore exact row sums lost to rounding
    m /= m.sum(axis=1, keepdims=True)
    return Channel(k, tuple(range(n_labels)), m)


# -- JSON -----------------------------------------------------------------


def channel_from_json(obj: dict[str, Any]) -> Channel:
    kind = obj.get("type")
    k = int(obj["k"])
    if kind == "rr":
        return randomized_response(k, float(obj["rho"]))
    if kind == "partial_erasure":
        return partial_erasure(k, float(obj["eta"]), int(obj["x_star"]))
    if kind == "leaky_query":
        return leaky_query(k, float(obj["eta"]), obj["u"])
    if kind == "matrix":
        return Channel(k, tuple(obj["labels"]), np.asarray(obj["rows"]))
    raise ValueError(f"unknown channel type {kind!r}")


def channel_to_json(ch: Channel) -> dict[str, Any]:
    return {
        "type": "matrix",
        "k": ch.k,
        "labels": list(ch.labels),
        "rows": ch.matrix.tolist(),
    }
