"""Sequentially interactive protocol runtime and uniformity testers.

Randomness is split into independent streams derived from one integer
seed, so a change in protocol logic never perturbs the sample sequence:

* ``SAMPLE``: one uniform per user, mapped to ``X_t`` by inverse CDF;
* ``CHANNEL``: one uniform per user, fed to the inverse CDF of the
  user's channel row ``W(.|X_t)``;
* ``SERVER``: randomness used by the finalizer (re-erasure coins).

Every tester has a generic ``select_channel``/``finalize`` strategy for
``run_transcript`` and a vectorized ``simulate`` path that consumes the
same streams and reproduces the same verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .channels import (
    ERASED,
    ONE_STAR,
    ZERO_STAR,
    Channel,
    alternating_query,
    apply_uniform,
    identity_channel,
    leaky_query,
    partial_erasure,
)
from .dist_core import Distribution, PerturbationSign, symbols_from_uniforms, uniform_dist

SAMPLE, CHANNEL, SERVER = 0, 1, 2

UNIFORM = "uniform"
FAR = "far"

MODES = ("private-coin", "public-coin", "interactive")


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(which,)))


def user_uniforms(seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-user sample and channel uniforms for ``n`` users."""
    return stream(seed, SAMPLE).random(n), stream(seed, CHANNEL).random(n)


@dataclass(frozen=True)
class Transcript:
    messages: tuple
    public_seed: int
    n: int

    def __post_init__(self):
        if len(self.messages) != self.n:
            raise ValueError("transcript length must equal the number of users")

    @property
    def labels(self) -> tuple:
        return tuple(y for _, y in self.messages)

    @classmethod
    def from_labels(cls, labels: Sequence[Hashable], seed: int) -> "Transcript":
        return cls(tuple(enumerate(labels)), seed, len(labels))


@dataclass(frozen=True)
class Decision:
    verdict: str
    statistics: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (UNIFORM, FAR):
            raise ValueError(f"verdict must be {UNIFORM!r} or {FAR!r}")

    @property
    def is_far(self) -> bool:
        return self.verdict == FAR

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "statistics": {k: float(v) for k, v in self.statistics.items()},
            "constants": dict(self.constants),
        }


SelectChannel = Callable[[int, int, tuple], Channel]
Finalize = Callable[[Transcript, int], Any]


@dataclass(frozen=True)
class ProtocolStrategy:
    """Channel selector plus finalizer.

    ``select_channel(seed, t, prefix)`` sees only the messages of users
    ``0..t-1``. ``simulate(X, V, seed)``, when present, is a vectorized
    path over explicit samples and channel uniforms.
    """

    select_channel: SelectChannel
    finalize: Finalize
    mode: str
    name: str = "custom"
    simulate: Callable[[np.ndarray, np.ndarray, int], Any] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def run(self, p: Distribution, n: int, seed: int):
        """Outcome of the protocol on ``n`` users drawing from ``p``."""
        u, v = user_uniforms(seed, n)
        x = symbols_from_uniforms(p, u) if n else np.zeros(0, dtype=np.int64)
        return self.run_on_samples(x, v, seed)

    def run_on_samples(self, x: np.ndarray, v: np.ndarray, seed: int):
        if self.simulate is not None:
            return self.simulate(np.asarray(x), np.asarray(v), seed)
        return self.finalize(transcript_from_samples(self, x, v, seed), seed)


def public_coin(channel_for_user: Callable[[int, int], Channel], finalize: Finalize, name="public-coin"):
    """Strategy whose channel depends on the seed and user index only."""
    return ProtocolStrategy(
        select_channel=lambda seed, t, prefix: channel_for_user(seed, t),
        finalize=finalize,
        mode="public-coin",
        name=name,
    )


def as_interactive(strategy: ProtocolStrategy) -> ProtocolStrategy:
    return replace(strategy, mode="interactive", name=f"interactive({strategy.name})", simulate=None)


def transcript_from_samples(
    strategy: ProtocolStrategy, x: Sequence[int], v: Sequence[float], seed: int
) -> Transcript:
    msgs: list = []
    for t, (xt, vt) in enumerate(zip(x, v)):
        ch = strategy.select_channel(seed, t, tuple(msgs))
        msgs.append(ch.labels[apply_uniform(ch, int(xt), float(vt))])
    return Transcript.from_labels(msgs, seed)


def run_transcript(strategy: ProtocolStrategy, p: Distribution, n: int, seed: int) -> Transcript:
    """Run users ``0..n-1`` in order; user ``t`` picks its channel from ``y^{t-1}``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    u, v = user_uniforms(seed, n)
    x = symbols_from_uniforms(p, u) if n else np.zeros(0, dtype=np.int64)
    return transcript_from_samples(strategy, x, v, seed)


# -- centralized test ------------------------------------------------------


def collision_count(samples: np.ndarray, size: int) -> int:
    c = np.bincount(np.asarray(samples, dtype=np.int64), minlength=size)
    return int(np.sum(c * (c - 1)) // 2)


def collision_threshold(m: int, k: int, eps: float) -> float:
    """Midpoint between the uniform mean and the far-case lower bound."""
    return math.comb(m, 2) * (1 + 2 * eps**2) / (2 * k)


def centralized_collision_tester(samples: Sequence[int], k: int, eps: float) -> Decision:
    samples = np.asarray(samples, dtype=np.int64)
    m = samples.size
    if m < 2:
        raise ValueError("collision tester needs at least two samples")
    if np.any(samples < 0) or np.any(samples >= 2 * k):
        raise ValueError(f"samples must lie in [0, {2 * k})")
    t = collision_count(samples, 2 * k)
    thr = collision_threshold(m, k, eps)
    return Decision(
        FAR if t > thr else UNIFORM,
        {"samples": m, "collisions": t, "threshold": thr},
    )


def _survivor_decision(survivors: np.ndarray, k: int, eps: float, n: int) -> Decision:
    m = survivors.size
    if m < 2:
        stats = {"samples": m, "collisions": 0, "threshold": 0.0}
        decision = Decision(UNIFORM, stats)
    else:
        decision = centralized_collision_tester(survivors, k, eps)
    decision.statistics.update(users=n, too_few_samples=float(m < 2))
    return decision


def default_eta(k: int) -> float:
    return 1 / math.sqrt(k)


# -- noninteractive testers ------------------------------------------------


def identity_collision_tester(k: int, eps: float, n: int, seed: int = 0) -> ProtocolStrategy:
    """Unconstrained tester: every user sends its sample, the server counts collisions."""
    channel = identity_channel(k)

    def finalize(transcript, public_seed):
        return _survivor_decision(np.asarray(transcript.labels, dtype=np.int64), k, eps, transcript.n)

    def simulate(x, v, public_seed):
        return _survivor_decision(np.asarray(x, dtype=np.int64), k, eps, len(x))

    return ProtocolStrategy(
        select_channel=lambda s, t, prefix: channel,
        finalize=finalize,
        mode="private-coin",
        name="identity_collision",
        simulate=simulate,
        metadata={"k": k, "eps": eps, "n": n, "seed": seed},
    )


def _erasure_survivors(x, v, seed, k, eta):
    """Symbols left after W_1 plus server-side re-erasure of symbol 0."""
    coins = stream(seed, SERVER).random(len(x))
    x = np.asarray(x)
    passed = np.where(x == 0, coins < eta, v < eta)
    return x[passed]


def _erasure_survivors_from_transcript(transcript: Transcript, k: int, eta: float) -> np.ndarray:
    labels = transcript.labels
    coins = stream(transcript.public_seed, SERVER).random(transcript.n)
    out = [
        y for y, c in zip(labels, coins)
        if y != ERASED and (y != 0 or c < eta)
    ]
    return np.asarray(out, dtype=np.int64)


def erasure_simulation_tester(k: int, eps: float, n: int, seed: int = 0, eta: float | None = None) -> ProtocolStrategy:
    """Private-coin tester using the partial-erasure channel that keeps symbol 0."""
    eta = default_eta(k) if eta is None else eta
    w1 = partial_erasure(k, eta, 0)

    def finalize(transcript, public_seed):
        return _survivor_decision(
            _erasure_survivors_from_transcript(transcript, k, eta), k, eps, transcript.n
        )

    def simulate(x, v, public_seed):
        return _survivor_decision(_erasure_survivors(x, v, public_seed, k, eta), k, eps, len(x))

    return ProtocolStrategy(
        select_channel=lambda s, t, prefix: w1,
        finalize=finalize,
        mode="private-coin",
        name="erasure_sim",
        simulate=simulate,
        metadata={"k": k, "eps": eps, "n": n, "eta": eta, "seed": seed},
    )


def noninteractive_leaky_tester(
    k: int, eps: float, n: int, seed: int = 0, u: Sequence[float] | None = None
) -> ProtocolStrategy:
    """Private-coin tester that keeps leaked symbols and drops query answers."""
    eta = default_eta(k)
    u = alternating_query(k) if u is None else np.asarray(u, dtype=np.float64)
    channel = leaky_query(k, eta, u)

    def finalize(transcript, public_seed):
        leaked = [y for y in transcript.labels if y not in (ONE_STAR, ZERO_STAR)]
        return _survivor_decision(np.asarray(leaked, dtype=np.int64), k, eps, transcript.n)

    def simulate(x, v, public_seed):
        return _survivor_decision(np.asarray(x)[np.asarray(v) < eta], k, eps, len(x))

    return ProtocolStrategy(
        select_channel=lambda s, t, prefix: channel,
        finalize=finalize,
        mode="private-coin",
        name="noninteractive_leaky",
        simulate=simulate,
        metadata={"k": k, "eps": eps, "n": n, "eta": eta, "seed": seed},
    )


# -- interactive tester ----------------------------------------------------


@dataclass(frozen=True)
class TesterConstants:
    """Constants of the three-stage interactive tester.

    ``heavy_coeff`` sets the stage-1 heaviness level ``heavy_coeff*sqrt(k)/n``;
    a symbol is flagged once it appears ``heavy_cutoff`` times, which is 3
    at the default 22. The stage-3 threshold is
    ``(1 + threshold_margin * eps**2) * E[u(S)]``. ``C`` and ``c_ni`` are
    user-count coefficients for ``C k^{3/4}/eps^2`` and ``c_ni k/eps^2``.
    """

    heavy_coeff: float = 22.0
    C: float = 4840.0
    repeats: int = 43
    threshold_margin: float = 0.75
    stage3_coeff: float = 720.0
    c_ni: float | None = None
    calibrated: bool = False
    preset: str = "paper"
    version: str = "paper"
    target_error: float = 0.01
    eps: float | None = None
    ks: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        if self.repeats < 1 or self.repeats % 2 == 0:
            raise ValueError("repeats must be a positive odd integer")
        if self.heavy_coeff <= 0 or self.threshold_margin <= 0:
            raise ValueError("heavy_coeff and threshold_margin must be positive")
        object.__setattr__(self, "ks", tuple(self.ks))

    @property
    def heavy_cutoff(self) -> int:
        return max(1, math.ceil(3 * self.heavy_coeff / 22 - 1e-12))

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["ks"] = list(self.ks)
        return d

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TesterConstants":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in obj.items() if k in names})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


PROOF_CONSTANTS = TesterConstants()


def calibrated_constants() -> TesterConstants:
    text = resources.files("locinfo").joinpath("data/calibrated_constants.json").read_text()
    return TesterConstants.from_json(json.loads(text))


def preset_constants(preset: str) -> TesterConstants:
    if preset == "paper":
        return PROOF_CONSTANTS
    if preset == "calibrated":
        return calibrated_constants()
    raise ValueError(f"unknown preset {preset!r}")


def expected_uniform_mass(k: int, n_leaked: int) -> float:
    """Mean uniform mass of the set of distinct symbols among ``n_leaked`` draws."""
    return -math.expm1(n_leaked * math.log1p(-1 / (2 * k)))


INTERACTIVE_STAT_KEYS = (
    "stage1_max_count",
    "stage1_exit",
    "stage2_leaks",
    "stage2_set_size",
    "expected_uniform_mass",
    "stage3_users",
    "stage3_ones",
    "mass_estimate",
    "threshold",
    "empty_set",
)


def _group_decision(sym, one, s, k, eps, eta, constants: TesterConstants) -> tuple[bool, dict]:
    """Verdict of one group from its messages.

    ``sym`` holds the leaked symbol or -1; ``one`` marks ``1*`` answers.
    """
    stats = dict.fromkeys(INTERACTIVE_STAT_KEYS, 0.0)
    leaked1 = sym[:s][sym[:s] >= 0]
    max_count = int(np.bincount(leaked1).max()) if leaked1.size else 0
    early = max_count >= constants.heavy_cutoff
    leaked2 = sym[s : 2 * s][sym[s : 2 * s] >= 0]
    n_leaked = int(leaked2.size)
    e_u = expected_uniform_mass(k, n_leaked)
    ones = int(np.count_nonzero(one[2 * s : 3 * s]))
    estimate = ones / s / (1 - eta)
    threshold = (1 + constants.threshold_margin * eps**2) * e_u
    stats.update(
        stage1_max_count=max_count,
        stage1_exit=float(early),
        stage2_leaks=n_leaked,
        stage2_set_size=int(np.unique(leaked2).size),
        expected_uniform_mass=e_u,
        stage3_users=s,
        stage3_ones=ones,
        mass_estimate=estimate,
        threshold=threshold,
        empty_set=float(n_leaked == 0),
    )
    if early:
        return True, stats
    if n_leaked == 0:
        return False, stats
    return estimate > threshold, stats


def _interactive_decision(sym, one, k, eps, eta, constants: TesterConstants) -> Decision:
    n = len(sym)
    m = n // constants.repeats
    s = m // 3
    votes, group_stats = [], []
    for g in range(constants.repeats):
        far, st = _group_decision(sym[g * m : (g + 1) * m], one[g * m : (g + 1) * m], s, k, eps, eta, constants)
        votes.append(far)
        group_stats.append(st)
    stats = {key: float(np.mean([st[key] for st in group_stats])) for key in INTERACTIVE_STAT_KEYS}
    stats.update(votes_far=float(sum(votes)), groups=float(constants.repeats), users=float(n))
    verdict = FAR if 2 * sum(votes) > constants.repeats else UNIFORM
    return Decision(verdict, stats, constants.to_json())


def _decode_leaky_messages(labels: Sequence[Hashable]) -> tuple[np.ndarray, np.ndarray]:
    sym = np.array([y if isinstance(y, (int, np.integer)) else -1 for y in labels], dtype=np.int64)
    one = np.array([y == ONE_STAR for y in labels], dtype=bool)
    return sym, one


def _interactive_messages(x, v, k, eta, repeats) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized messages of the interactive tester for samples ``x``.

    Matches inverse-CDF sampling of the leaky-query rows: the input leaks
    iff ``v < eta``; otherwise stage-3 users answer ``1*`` iff ``x`` is in
    the group's stage-2 set.
    """
    n = len(x)
    m = n // repeats
    s = m // 3
    leak = v < eta
    sym = np.where(leak, x, -1)
    one = np.zeros(n, dtype=bool)
    for g in range(repeats):
        base = g * m
        stage2 = sym[base + s : base + 2 * s]
        in_set = np.zeros(2 * k, dtype=bool)
        in_set[stage2[stage2 >= 0]] = True
        lo, hi = base + 2 * s, base + 3 * s
        one[lo:hi] = ~leak[lo:hi] & in_set[x[lo:hi]]
    return sym, one


def interactive_leaky_tester(
    k: int,
    eps: float,
    n: int,
    constants: TesterConstants | None = None,
    seed: int = 0,
) -> ProtocolStrategy:
    """Three-stage sequentially interactive tester over leaky-query channels.

    Users are split into ``constants.repeats`` groups that vote by majority.
    Within a group, stage 1 flags a heavy symbol, stage 2 gathers the set
    ``S`` of leaked symbols, and stage 3 queries membership in ``S`` to
    estimate ``p(S)``. Users left over by the split use the erasure channel
    and are ignored.
    """
    constants = PROOF_CONSTANTS if constants is None else constants
    eta = default_eta(k)
    m = n // constants.repeats
    if m < 3:
        raise ValueError(f"need at least 3 users per group, got n={n} for {constants.repeats} groups")
    s = m // 3
    erasure = leaky_query(k, eta, np.zeros(2 * k))

    def select_channel(public_seed, t, prefix):
        g, pos = divmod(t, m)
        if g >= constants.repeats or pos < 2 * s or pos >= 3 * s:
            return erasure
        start = g * m + s
        leaked = sorted({y for y in prefix[start : start + s] if isinstance(y, (int, np.integer))})
        u = np.zeros(2 * k)
        u[leaked] = 1.0
        return leaky_query(k, eta, u)

    def finalize(transcript, public_seed):
        sym, one = _decode_leaky_messages(transcript.labels)
        return _interactive_decision(sym, one, k, eps, eta, constants)

    def simulate(x, v, public_seed):
        sym, one = _interactive_messages(np.asarray(x), np.asarray(v), k, eta, constants.repeats)
        return _interactive_decision(sym, one, k, eps, eta, constants)

    return ProtocolStrategy(
        select_channel=select_channel,
        finalize=finalize,
        mode="interactive",
        name="interactive_leaky",
        simulate=simulate,
        metadata={"k": k, "eps": eps, "n": n, "eta": eta, "seed": seed, "constants": constants.to_json()},
    )


# -- learning --------------------------------------------------------------


def _histogram(survivors: np.ndarray, k: int) -> Distribution:
    if survivors.size == 0:
        return uniform_dist(k)
    counts = np.bincount(survivors, minlength=2 * k).astype(np.float64)
    probs = counts / counts.sum()
    return Distribution(k, probs / probs.sum())


def erasure_histogram_learner(k: int, eta: float, n: int, seed: int = 0) -> ProtocolStrategy:
    """Empirical distribution of the symbols surviving a pure-erasure conversion."""
    w1 = partial_erasure(k, eta, 0)

    def finalize(transcript, public_seed):
        return _histogram(_erasure_survivors_from_transcript(transcript, k, eta), k)

    def simulate(x, v, public_seed):
        return _histogram(_erasure_survivors(x, v, public_seed, k, eta), k)

    return ProtocolStrategy(
        select_channel=lambda s, t, prefix: w1,
        finalize=finalize,
        mode="private-coin",
        name="erasure_learner",
        simulate=simulate,
        metadata={"k": k, "eta": eta, "n": n, "seed": seed},
    )


def decode_to_hamming(estimate: Distribution, sign: PerturbationSign) -> tuple[np.ndarray, int]:
    """Nearest perturbation sign to ``estimate`` and its Hamming distance to ``sign``.

    Coordinatewise, the closest ``p_z`` in total variation picks the sign
    of the within-pair mass difference; ties go to +1.
    """
    if estimate.k != sign.k:
        raise ValueError("estimate and sign have different k")
    diff = estimate.probs[0::2] - estimate.probs[1::2]
    z_hat = np.where(diff >= 0, 1, -1)
    return z_hat, int(np.sum(z_hat != sign.z))


# -- protocol spec JSON ----------------------------------------------------


PROTOCOLS = ("interactive_leaky", "noninteractive_leaky", "erasure_sim", "erasure_learner", "identity_collision")


def strategy_from_spec(spec: dict[str, Any], constants: TesterConstants | None = None) -> ProtocolStrategy:
    name = spec["protocol"]
    k, n = int(spec["k"]), int(spec["n"])
    seed = int(spec.get("seed", 0))
    eps = float(spec.get("eps", 0.0))
    if name == "interactive_leaky":
        if constants is None:
            constants = preset_constants(spec.get("preset", "calibrated"))
        return interactive_leaky_tester(k, eps, n, constants, seed)
    if name == "noninteractive_leaky":
        return noninteractive_leaky_tester(k, eps, n, seed)
    if name == "erasure_sim":
        return erasure_simulation_tester(k, eps, n, seed)
    if name == "identity_collision":
        return identity_collision_tester(k, eps, n, seed)
    if name == "erasure_learner":
        return erasure_histogram_learner(k, float(spec.get("eta", default_eta(k))), n, seed)
    raise ValueError(f"unknown protocol {name!r}; expected one of {PROTOCOLS}")
