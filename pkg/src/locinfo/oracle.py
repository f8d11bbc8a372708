"""Exact transcript laws and information inequalities on small instances.

Strategies here are deterministic (public coin fixed): the channel used by
user ``t`` is looked up from the full table of message prefixes. Every
quantity is computed by enumerating all ``|Y|**n`` transcripts and all
``2**k`` perturbation signs, in bits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

from .channels import Channel, channel_norms, info_matrix, output_dist, random_channel
from .dist_core import TV_SCALE, all_signs, binary_entropy, paninski_masses, uniform_dist

TOL = 1e-9
LN2 = math.log(2)
# perturbation scale used by every bound check unless overridden
PROOF_SCALE = TV_SCALE


class SizeCapError(ValueError):
    pass


@dataclass(frozen=True)
class OracleCaps:
    k: int = 3
    alphabet: int = 4
    depth: int = 4


DEFAULT_CAPS = OracleCaps()


@dataclass(frozen=True)
class EnumerableStrategy:
    """Deterministic strategy given by a channel for every message prefix.

    Prefixes are tuples of label indices into ``labels``.
    """

    k: int
    labels: tuple
    depth: int
    table: dict
    caps: OracleCaps = DEFAULT_CAPS

    def __post_init__(self):
        if self.k > self.caps.k or len(self.labels) > self.caps.alphabet or self.depth > self.caps.depth:
            raise SizeCapError(
                f"instance (k={self.k}, |Y|={len(self.labels)}, n={self.depth}) exceeds {self.caps}"
            )
        a = len(self.labels)
        for t in range(self.depth):
            for prefix in itertools.product(range(a), repeat=t):
                ch = self.table.get(prefix)
                if ch is None:
                    raise ValueError(f"no channel for prefix {prefix}")
                if ch.labels != tuple(self.labels) or ch.k != self.k:
                    raise ValueError(f"channel at prefix {prefix} has a different alphabet or domain")

    @property
    def alphabet_size(self) -> int:
        return len(self.labels)

    def channels(self, depth: int | None = None) -> list[Channel]:
        """Channels at prefix lengths below ``depth`` (all by default)."""
        depth = self.depth if depth is None else depth
        return [ch for prefix, ch in self.table.items() if len(prefix) < depth]

    def channels_at(self, t: int) -> list[Channel]:
        return [ch for prefix, ch in self.table.items() if len(prefix) == t]

    def describe(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "labels": list(self.labels),
            "depth": self.depth,
            "table": {
                ",".join(map(str, prefix)): ch.matrix.tolist()
                for prefix, ch in sorted(self.table.items())
            },
        }


def constant_strategy(k: int, depth: int, n_labels: int = 2) -> EnumerableStrategy:
    m = np.zeros((2 * k, n_labels))
    m[:, 0] = 1.0
    ch = Channel(k, tuple(range(n_labels)), m)
    table = {
        prefix: ch
        for t in range(depth)
        for prefix in itertools.product(range(n_labels), repeat=t)
    }
    return EnumerableStrategy(k, ch.labels, depth, table)


def fixed_channel_strategy(ch: Channel, depth: int, caps: OracleCaps = DEFAULT_CAPS) -> EnumerableStrategy:
    a = ch.n_labels
    table = {
        prefix: ch
        for t in range(depth)
        for prefix in itertools.product(range(a), repeat=t)
    }
    return EnumerableStrategy(ch.k, ch.labels, depth, table, caps)


def random_strategy(
    k: int, n_labels: int, depth: int, rng: np.random.Generator, caps: OracleCaps = DEFAULT_CAPS
) -> EnumerableStrategy:
    """Independent Dirichlet(1, ..., 1) channel for every prefix."""
    table = {
        prefix: random_channel(k, n_labels, rng)
        for t in range(depth)
        for prefix in itertools.product(range(n_labels), repeat=t)
    }
    return EnumerableStrategy(k, tuple(range(n_labels)), depth, table, caps)


def strategy_table_from_protocol(protocol, seed: int, k: int, labels: Sequence[Hashable], depth: int) -> EnumerableStrategy:
    """Tabulate ``protocol.select_channel`` over every prefix for a fixed seed."""
    labels = tuple(labels)
    table = {}
    for t in range(depth):
        for prefix in itertools.product(range(len(labels)), repeat=t):
            table[prefix] = protocol.select_channel(seed, t, tuple(labels[j] for j in prefix))
    return EnumerableStrategy(k, labels, depth, table)


# -- transcript laws --------------------------------------------------------


def _laws(s: EnumerableStrategy, inputs: np.ndarray, n: int) -> list[np.ndarray]:
    """Prefix laws for each row of ``inputs``.

    Returns ``[L_0, ..., L_n]`` with ``L_t`` of shape ``(rows, |Y|**t)``,
    prefixes in base-``|Y|`` order with the first message most significant.
    """
    if n > s.depth:
        raise SizeCapError(f"n={n} exceeds strategy depth {s.depth}")
    a = s.alphabet_size
    law = np.ones((inputs.shape[0], 1))
    out = [law]
    for t in range(n):
        nxt = np.empty((inputs.shape[0], a**(t + 1)))
        for j, prefix in enumerate(itertools.product(range(a), repeat=t)):
            step = inputs @ s.table[prefix].matrix
            nxt[:, j * a : (j + 1) * a] = law[:, j : j + 1] * step
        law = nxt
        out.append(law)
    return out


def _sign_inputs(k: int, eps: float, scale: float) -> tuple[np.ndarray, np.ndarray]:
    signs = all_signs(k)
    return signs, np.array([paninski_masses(z, eps, scale) for z in signs])


def transcript_dist(s: EnumerableStrategy, p, n: int) -> np.ndarray:
    """Exact law of ``Y^n`` under i.i.d. inputs from ``p``; shape ``(|Y|,)*n``."""
    probs = np.asarray(getattr(p, "probs", p), dtype=np.float64)
    law = _laws(s, probs[None, :], n)[n][0]
    return law.reshape((s.alphabet_size,) * n)


def mixture_transcript_dist(s: EnumerableStrategy, k: int, eps: float, n: int, scale: float = PROOF_SCALE) -> np.ndarray:
    """Uniform mixture over all ``2**k`` perturbed inputs of the transcript law."""
    _check_k(s, k)
    _, inputs = _sign_inputs(k, eps, scale)
    law = _laws(s, inputs, n)[n].mean(axis=0)
    return law.reshape((s.alphabet_size,) * n)


def _check_k(s, k):
    if s.k != k:
        raise ValueError(f"strategy is over 2*{s.k} inputs, not 2*{k}")


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def _coordinate_infos(signs: np.ndarray, laws: np.ndarray) -> np.ndarray:
    """``I(Z_i; Y)`` for every ``i`` from per-sign laws ``(2**k, m)``."""
    marginal = laws.mean(axis=0)
    out = np.empty(signs.shape[1])
    for i in range(signs.shape[1]):
        plus = laws[signs[:, i] == 1].mean(axis=0)
        minus = laws[signs[:, i] == -1].mean(axis=0)
        out[i] = 0.5 * _xlogy_ratio(plus, marginal) + 0.5 * _xlogy_ratio(minus, marginal)
    return np.maximum(out, 0.0)


def coordinate_infos(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> np.ndarray:
    _check_k(s, k)
    signs, inputs = _sign_inputs(k, eps, scale)
    return _coordinate_infos(signs, _laws(s, inputs, t)[t])


def coordinate_mutual_info(s: EnumerableStrategy, k: int, eps: float, n: int, i: int, scale: float = PROOF_SCALE) -> float:
    """Exact ``I(Z_i; Y^n)`` in bits with ``Z`` uniform over signs."""
    return float(coordinate_infos(s, k, eps, n, scale)[i])


# -- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    instance: dict
    lhs: float
    rhs: float
    holds: bool = field(init=False)
    slack: float = field(init=False)
    suite: str = ""

    def __post_init__(self):
        object.__setattr__(self, "holds", bool(self.lhs <= self.rhs + TOL))
        object.__setattr__(self, "slack", float(self.rhs - self.lhs))

    def to_json(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "instance": self.instance,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "slack": self.slack,
        }


def _instance(s: EnumerableStrategy, **extra) -> dict[str, Any]:
    return {"k": s.k, "alphabet": s.alphabet_size, "depth": s.depth, **extra}


def _with_table(report: VerificationReport, s: EnumerableStrategy) -> VerificationReport:
    if report.holds:
        return report
    inst = dict(report.instance, strategy=s.describe())
    return VerificationReport(inst, report.lhs, report.rhs, suite=report.suite)


def _max_nuclear(channels: list[Channel]) -> float:
    return max((channel_norms(ch).nuclear for ch in channels), default=0.0)


def _max_op(channels: list[Channel]) -> float:
    return max((channel_norms(ch).op for ch in channels), default=0.0)


def check_avg_info_bound(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> VerificationReport:
    """Average coordinate information after ``t`` messages versus ``8 t eps^2 |W|_* / k^2``."""
    if not 0 < eps <= 0.25:
        raise ValueError("eps must lie in (0, 1/4]")
    lhs = float(coordinate_infos(s, k, eps, t, scale).mean())
    rhs = 8 * t * eps**2 / k**2 * _max_nuclear(s.channels(t))
    report = VerificationReport(_instance(s, scale=scale, eps=eps, t=t), lhs, rhs, suite="avg-info")
    return _with_table(report, s)


def _conditional_kls(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> tuple[float, np.ndarray]:
    """Expected KL between next-message laws under the mixture and under uniform.

    Returns the expectation (over mixture prefixes of length ``t``) and the
    per-prefix values.
    """
    _, inputs = _sign_inputs(k, eps, scale)
    a = s.alphabet_size
    q_laws = _laws(s, inputs, t + 1)
    q_t = q_laws[t].mean(axis=0)
    q_next = q_laws[t + 1].mean(axis=0).reshape(-1, a)
    u = uniform_dist(k)
    per_prefix = np.zeros(q_t.size)
    for j, prefix in enumerate(itertools.product(range(a), repeat=t)):
        if q_t[j] <= 0:
            continue
        cond_q = q_next[j] / q_t[j]
        cond_u = output_dist(s.table[prefix], u)
        per_prefix[j] = max(_xlogy_ratio(cond_q, cond_u), 0.0)
    return float(q_t @ per_prefix), per_prefix


def expected_conditional_kl(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> float:
    return _conditional_kls(s, k, eps, t, scale)[0]


def check_per_round_bound(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> VerificationReport:
    """Expected next-message divergence versus ``4 ln2 eps^2 |W|_op / k * sum_i I(Z_i; Y^t)``.

    The operator norm is maximized over the channels usable by message ``t+1``.
    """
    if not 0 <= t < s.depth:
        raise ValueError(f"t must lie in [0, {s.depth})")
    lhs = expected_conditional_kl(s, k, eps, t, scale)
    info = float(coordinate_infos(s, k, eps, t, scale).sum())
    rhs = 4 * LN2 * eps**2 / k * _max_op(s.channels_at(t)) * info
    report = VerificationReport(_instance(s, scale=scale, eps=eps, t=t, info_sum=info), lhs, rhs, suite="per-round")
    return _with_table(report, s)


def transcript_kl(s: EnumerableStrategy, k: int, eps: float, n: int, scale: float = PROOF_SCALE) -> float:
    q = mixture_transcript_dist(s, k, eps, n, scale).reshape(-1)
    u = transcript_dist(s, uniform_dist(k), n).reshape(-1)
    return max(_xlogy_ratio(q, u), 0.0)


def lecam_kl_check(s: EnumerableStrategy, k: int, eps: float, n: int, scale: float = PROOF_SCALE) -> VerificationReport:
    """Transcript divergence from the uniform-input law versus ``16 ln2 eps^4 n^2 |W|_op |W|_* / k^2``."""
    lhs = transcript_kl(s, k, eps, n, scale)
    used = s.channels(n)
    rhs = 16 * LN2 * eps**4 * n**2 / k**2 * _max_op(used) * _max_nuclear(used)
    report = VerificationReport(_instance(s, scale=scale, eps=eps, n=n), lhs, rhs, suite="lecam")
    return _with_table(report, s)


def check_chain_rule(s: EnumerableStrategy, k: int, eps: float, n: int, scale: float = PROOF_SCALE) -> float:
    """Absolute gap between the transcript divergence and the summed conditional terms."""
    total = sum(expected_conditional_kl(s, k, eps, t, scale) for t in range(n))
    return abs(transcript_kl(s, k, eps, n, scale) - total)


def check_coordinate_bound(s: EnumerableStrategy, k: int, eps: float, t: int, scale: float = PROOF_SCALE) -> list[VerificationReport]:
    """Per-coordinate information versus accumulated expected diagonal entries of ``H``."""
    _check_k(s, k)
    signs, inputs = _sign_inputs(k, eps, scale)
    laws = _laws(s, inputs, t)
    infos = _coordinate_infos(signs, laws[t])
    a = s.alphabet_size
    diag = np.zeros(k)
    for r in range(t):
        q_r = laws[r].mean(axis=0)
        for j, prefix in enumerate(itertools.product(range(a), repeat=r)):
            diag += q_r[j] * np.diag(info_matrix(s.table[prefix]).entries)
    reports = []
    for i in range(k):
        rhs = 8 * eps**2 / k * diag[i]
        rep = VerificationReport(_instance(s, scale=scale, eps=eps, t=t, i=i), float(infos[i]), float(rhs), suite="coordinate")
        reports.append(_with_table(rep, s))
    return reports


def flip_identity_gap(s: EnumerableStrategy, k: int, eps: float, scale: float = PROOF_SCALE) -> float:
    """Largest deviation from the single-coordinate flip identity over all prefixes.

    Under fixed sign ``z``, the next-message law minus the law under ``z``
    with coordinate ``i`` flipped equals ``scale * eps * z_i / k`` times the
    pair difference of the current channel.
    """
    signs, inputs = _sign_inputs(k, eps, scale)
    worst = 0.0
    for prefix, ch in s.table.items():
        laws = inputs @ ch.matrix
        diffs = ch.matrix[0::2] - ch.matrix[1::2]
        for zi, z in enumerate(signs):
            for i in range(k):
                flipped = z.copy()
                flipped[i] = -flipped[i]
                fi = int(np.flatnonzero((signs == flipped).all(axis=1))[0])
                expected = scale * eps * z[i] / k * diffs[i]
                worst = max(worst, float(np.abs(laws[zi] - laws[fi] - expected).max()))
    return worst


# -- information-loss lemmas -------------------------------------------------


class MalformedJointError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteJoint:
    """Joint law of ``(Z, Y)``; rows follow ``all_signs(k)``, columns index ``Y``."""

    k: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != 2**self.k:
            raise MalformedJointError(f"expected {2**self.k} rows of sign probabilities")
        if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise MalformedJointError("joint must be a probability table")
        signs = all_signs(self.k)
        # independent fair coordinates <=> uniform over sign vectors
        if np.any(np.abs(probs.sum(axis=1) - 2.0**-self.k) > 1e-12):
            raise MalformedJointError("Z must be uniform over sign vectors")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "signs", signs)

    def coordinate_tables(self) -> list[np.ndarray]:
        """Per coordinate, a ``(2, |Y|)`` table of ``P(Z_i = -1, y)`` and ``P(Z_i = +1, y)``."""
        return [
            np.stack([self.probs[self.signs[:, i] == -1].sum(axis=0), self.probs[self.signs[:, i] == 1].sum(axis=0)])
            for i in range(self.k)
        ]


def random_joint(k: int, n_labels: int, rng: np.random.Generator) -> FiniteJoint:
    cond = rng.dirichlet(np.ones(n_labels), size=2**k)
    probs = cond / cond.sum(axis=1, keepdims=True) / 2**k
    return FiniteJoint(k, probs)


def identity_joint(k: int) -> FiniteJoint:
    return FiniteJoint(k, np.eye(2**k) / 2**k)


def independent_joint(k: int, y_law: Sequence[float]) -> FiniteJoint:
    y_law = np.asarray(y_law, dtype=np.float64)
    return FiniteJoint(k, np.tile(y_law / y_law.sum(), (2**k, 1)) / 2**k)


def _pair_info(table: np.ndarray) -> float:
    py = table.sum(axis=0)
    pz = table.sum(axis=1, keepdims=True)
    return max(_xlogy_ratio(table, pz * py[None, :]), 0.0)


def check_hamming_info_loss(joint: FiniteJoint) -> list[VerificationReport]:
    """Fano-type bound ``1 - h(P[Z_i != MAP_i(Y)]) <= I(Z_i; Y)``.

    One report per coordinate, then the averaged form with the mean error.
    """
    tables = joint.coordinate_tables()
    infos = [_pair_info(tab) for tab in tables]
    errors = [float(np.minimum(tab[0], tab[1]).sum()) for tab in tables]
    reports = [
        VerificationReport({"k": joint.k, "i": i, "error": e}, 1 - binary_entropy(min(e, 1.0)), info, suite="info-loss-hamming")
        for i, (info, e) in enumerate(zip(infos, errors))
    ]
    mean_err = float(np.mean(errors))
    reports.append(
        VerificationReport(
            {"k": joint.k, "i": "avg", "error": mean_err},
            1 - binary_entropy(min(mean_err, 1.0)),
            float(np.mean(infos)),
            suite="info-loss-hamming",
        )
    )
    return reports


def check_mse_info_loss(joint: FiniteJoint) -> list[VerificationReport]:
    """Pinsker-type bound ``E[E[Z_i|Y]^2] / (2 ln 2) <= I(Z_i; Y)``, per coordinate and averaged via mmse."""
    tables = joint.coordinate_tables()
    reports = []
    infos, mses = [], []
    for i, tab in enumerate(tables):
        py = tab.sum(axis=0)
        live = py > 0
        cond_mean = np.zeros_like(py)
        cond_mean[live] = (tab[1, live] - tab[0, live]) / py[live]
        second = float(py @ cond_mean**2)
        info = _pair_info(tab)
        infos.append(info)
        mses.append(1 - second)
        reports.append(
            VerificationReport({"k": joint.k, "i": i}, second / (2 * LN2), info, suite="info-loss-mse")
        )
    mmse = float(np.sum(mses))
    reports.append(
        VerificationReport(
            {"k": joint.k, "i": "avg", "mmse": mmse},
            (1 - mmse / joint.k) / (2 * LN2),
            float(np.mean(infos)),
            suite="info-loss-mse",
        )
    )
    return reports
