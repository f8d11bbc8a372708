"""Monte Carlo error estimates, sample-complexity search, calibration and scaling.

Trials use counter-based seeds derived from one base seed, and the same
trial seeds are reused for every candidate ``n`` and every input
distribution. Comparisons against a target error use Wilson 95% interval
edges.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .dist_core import Distribution, all_signs, far_dist, tv, uniform_dist
from .protocols import (
    FAR,
    UNIFORM,
    ProtocolStrategy,
    TesterConstants,
    preset_constants,
    strategy_from_spec,
)

log = logging.getLogger(__name__)

Factory = Callable[[int], ProtocolStrategy]

DEFAULT_ADVERSARIES = 20
CONFIDENCE = 0.95


def wilson_interval(errors: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ErrorEstimate:
    errors: int
    trials: int
    low: float
    high: float

    @classmethod
    def from_counts(cls, errors: int, trials: int) -> "ErrorEstimate":
        lo, hi = wilson_interval(errors, trials)
        return cls(errors, trials, lo, hi)

    @property
    def rate(self) -> float:
        return self.errors / self.trials if self.trials else 0.0

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2

    def to_json(self) -> dict[str, Any]:
        return {"rate": self.rate, "low": self.low, "high": self.high, "errors": self.errors, "trials": self.trials}


def trial_seeds(seed: int, trials: int) -> np.ndarray:
    """Independent 63-bit seeds, one per trial."""
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(trials, dtype=np.uint64) >> np.uint64(1)


def as_factory(spec: dict[str, Any] | Factory, constants: TesterConstants | None = None) -> Factory:
    """Map a protocol spec (any ``n``) or a factory to a factory of strategies."""
    if callable(spec):
        return spec
    if spec.get("protocol") == "interactive_leaky" and constants is None:
        constants = preset_constants(spec.get("preset", "calibrated"))
    return lambda n: strategy_from_spec({**spec, "n": n}, constants)


def _verdict(outcome) -> str:
    verdict = getattr(outcome, "verdict", outcome)
    if verdict not in (UNIFORM, FAR):
        raise TypeError(f"protocol returned {outcome!r}, not a test decision")
    return verdict


def mc_error(
    strategy: ProtocolStrategy,
    p: Distribution,
    n: int,
    trials: int,
    seed: int,
    expect_far: bool | None = None,
    stop_above: float | None = None,
) -> ErrorEstimate:
    """Fraction of wrong verdicts over seeded trials on ``n`` users from ``p``.

    The correct verdict is ``far`` unless ``p`` is uniform. With
    ``stop_above``, trials stop once the Wilson upper edge is certain to end
    above that level; the estimate then covers the trials run so far.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if expect_far is None:
        expect_far = tv(p, uniform_dist(p.k)) > 0
    wrong = UNIFORM if expect_far else FAR
    errors = 0
    for j, s in enumerate(trial_seeds(seed, trials)):
        if _verdict(strategy.run(p, n, int(s))) == wrong:
            errors += 1
            if stop_above is not None and wilson_interval(errors, trials)[1] > stop_above:
                # the final count can only be larger, so the final upper edge is too
                return ErrorEstimate.from_counts(errors, j + 1)
    return ErrorEstimate.from_counts(errors, trials)


def adversary_signs(k: int, count: int = DEFAULT_ADVERSARIES, seed: int = 0) -> np.ndarray:
    """All-(+1) sign followed by ``count`` random signs."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    rand = rng.choice((-1, 1), size=(count, k))
    return np.vstack([np.ones((1, k), dtype=np.int64), rand]).astype(np.int64)


@dataclass(frozen=True)
class WorstCase:
    n: int
    error: ErrorEstimate
    worst: str
    complete: bool
    per_input: dict = field(default_factory=dict)

    def passes(self, target: float) -> bool:
        return self.complete and self.error.high <= target

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "worst": self.worst,
            "complete": self.complete,
            **self.error.to_json(),
        }


def worst_case_error(
    factory: Factory | dict,
    k: int,
    eps: float,
    n: int,
    trials: int,
    seed: int,
    signs: np.ndarray | None = None,
    stop_above: float | None = None,
) -> WorstCase:
    """Largest miss rate over uniform and perturbed inputs at distance ``eps``.

    ``signs`` defaults to all-(+1) plus 20 random sign vectors. With
    ``stop_above``, evaluation ends at the first input whose Wilson upper
    edge must exceed that level (``complete`` is then False).
    """
    factory = as_factory(factory)
    strategy = factory(n)
    signs = adversary_signs(k, seed=seed) if signs is None else np.asarray(signs)
    inputs = [("uniform", uniform_dist(k), False)]
    inputs += [(f"z{j}", far_dist(z, eps), True) for j, z in enumerate(signs)]
    worst_name, worst = None, None
    per_input = {}
    for name, p, far in inputs:
        est = mc_error(strategy, p, n, trials, seed, expect_far=far, stop_above=stop_above)
        per_input[name] = est.rate
        if worst is None or (est.high, est.rate) > (worst.high, worst.rate):
            worst_name, worst = name, est
        if est.trials < trials:
            return WorstCase(n, est, name, False, per_input)
    return WorstCase(n, worst, worst_name, True, per_input)


@dataclass(frozen=True)
class SearchResult:
    n_star: int
    result: WorstCase
    history: tuple

    def to_json(self) -> dict[str, Any]:
        return {"n_star": self.n_star, **self.result.error.to_json(), "evaluated": [h[0] for h in self.history]}


class SearchFailure(RuntimeError):
    pass


def sample_complexity_search(
    factory: Factory | dict,
    k: int,
    eps: float,
    target: float = 1 / 3,
    trials: int = 200,
    seed: int = 0,
    n_start: int = 8,
    n_cap: int = 2**24,
    bisect_steps: int = 8,
    signs: np.ndarray | None = None,
) -> SearchResult:
    """Smallest passing ``n`` found by doubling then bisection.

    ``n`` passes when the Wilson upper edge of its worst-case error is at
    most ``target``.
    """
    if not 0 < target < 0.5:
        raise ValueError("target must lie in (0, 1/2)")
    factory = as_factory(factory)
    history = []

    def evaluate(n):
        try:
            wc = worst_case_error(factory, k, eps, n, trials, seed, signs, stop_above=target)
        except ValueError as exc:
            # too few users for the protocol's structure
            log.debug("n=%d rejected: %s", n, exc)
            wc = None
        ok = wc is not None and wc.passes(target)
        history.append((n, ok))
        log.info("k=%d n=%d pass=%s err=%s", k, n, ok, None if wc is None else round(wc.error.rate, 4))
        return ok, wc

    lo, hi, best = 0, max(1, n_start), None
    while True:
        ok, wc = evaluate(hi)
        if ok:
            best = wc
            break
        lo = hi
        hi *= 2
        if hi > n_cap:
            raise SearchFailure(f"no passing n up to {n_cap} at k={k}")
    for _ in range(bisect_steps):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        ok, wc = evaluate(mid)
        if ok:
            hi, best = mid, wc
        else:
            lo = mid
    return SearchResult(hi, best, tuple(history))


# -- calibration ----------------------------------------------------------


CAL_GRID = {
    "heavy_coeff": (22.0, 44.0, 88.0),
    "threshold_margin": (0.5, 0.75, 1.0, 1.5, 2.0),
    "repeats": (1, 3),
}


@dataclass(frozen=True)
class ExperimentSpec:
    protocol: dict
    ks: tuple
    eps: float
    trials: int = 200
    target_error: float = 1 / 3
    seed: int = 0
    preset: str = "calibrated"

    def __post_init__(self):
        if self.trials < 100:
            raise ValueError("trials must be at least 100")
        if not 0 < self.target_error < 0.5:
            raise ValueError("target error must lie in (0, 1/2)")
        if any(int(k) < 1 for k in self.ks):
            raise ValueError("k values must be positive")
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))

    def to_json(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "ks": list(self.ks),
            "eps": self.eps,
            "trials": self.trials,
            "target_error": self.target_error,
            "seed": self.seed,
            "preset": self.preset,
        }


def _interactive_factory(k: int, eps: float, constants: TesterConstants) -> Factory:
    return lambda n: strategy_from_spec(
        {"protocol": "interactive_leaky", "k": k, "eps": eps, "n": n}, constants
    )


def _noninteractive_factory(k: int, eps: float) -> Factory:
    return lambda n: strategy_from_spec({"protocol": "noninteractive_leaky", "k": k, "eps": eps, "n": n})


def start_guess(protocol: str, k: int, eps: float, constants: TesterConstants | None = None) -> int:
    """Conservative lower starting point for the doubling phase."""
    if protocol == "interactive_leaky":
        reps = constants.repeats if constants else 1
        return max(3 * reps, int(0.5 * k**0.75 / eps**2))
    return max(8, int(0.25 * k / eps**2))


def calibrate_constants(
    ks: Sequence[int],
    eps: float,
    seed: int = 0,
    target: float = 1 / 3,
    trials: int = 100,
    grid: dict | None = None,
    ni_k: int | None = None,
    ni_target: float = 0.25,
    ni_trials: int = 400,
    cap_factor: int = 64,
) -> TesterConstants:
    """Grid search of the interactive tester's constants plus the noninteractive coefficient.

    The grid point minimizing the geometric mean of ``n*`` over ``ks`` is
    kept. ``C`` is the largest ``n* eps^2 / k^{3/4}`` seen for it. ``c_ni`` is
    ``n* eps^2 / k`` of the noninteractive tester at ``ni_k`` (default the
    smallest ``k``), searched at the stricter ``ni_target`` with
    ``ni_trials`` trials so the coefficient carries a safety margin.
    Grid points with no passing ``n`` below ``cap_factor`` times the
    starting guess are infeasible.
    """
    grid = CAL_GRID if grid is None else grid
    names = tuple(grid)
    best, best_score, best_ns = None, math.inf, None
    for values in itertools.product(*(grid[n] for n in names)):
        cand = TesterConstants(**dict(zip(names, values)), calibrated=True, preset="calibrated")
        ns = []
        try:
            for k in ks:
                start = start_guess("interactive_leaky", k, eps, cand)
                res = sample_complexity_search(
                    _interactive_factory(k, eps, cand), k, eps, target, trials, seed,
                    n_start=start, n_cap=cap_factor * start,
                )
                ns.append(res.n_star)
        except SearchFailure:
            log.info("grid %s infeasible", dict(zip(names, values)))
            continue
        score = float(np.mean(np.log(ns)))
        log.info("grid %s -> %s", dict(zip(names, values)), ns)
        if score < best_score:
            best, best_score, best_ns = cand, score, ns
    if best is None:
        raise SearchFailure("no feasible grid point")
    c_fit = max(n * eps**2 / k**0.75 for n, k in zip(best_ns, ks))
    ni_k = min(ks) if ni_k is None else ni_k
    ni = sample_complexity_search(
        _noninteractive_factory(ni_k, eps), ni_k, eps, ni_target, ni_trials, seed,
        n_start=start_guess("noninteractive_leaky", ni_k, eps),
    )
    return replace(
        best,
        C=float(c_fit),
        c_ni=float(ni.n_star * eps**2 / ni_k),
        version="calibrated-1",
        target_error=target,
        eps=eps,
        ks=tuple(ks),
        seed=seed,
    )


# -- scaling experiment ---------------------------------------------------


CSV_COLUMNS = ("protocol", "k", "n_star", "error", "ci_low", "ci_high")


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, check=True, cwd=Path(__file__).parent,
        )
        return out.stdout.strip()
    except (OSError, subprocess.CalledProcessError):
        return "unknown"


@dataclass(frozen=True)
class SlopeFit:
    protocol: str
    slope: float
    intercept: float
    residuals: tuple
    ks: tuple
    n_stars: tuple
    intervals: tuple

    def to_json(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "slope": self.slope,
            "intercept": self.intercept,
            "residuals": list(self.residuals),
            "ks": list(self.ks),
            "n_stars": list(self.n_stars),
        }


def fit_slope(ks: Sequence[int], ns: Sequence[int]) -> tuple[float, float, np.ndarray]:
    x, y = np.log(np.asarray(ks, float)), np.log(np.asarray(ns, float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), y - (slope * x + intercept)


def scaling_experiment(
    ks: Sequence[int],
    eps: float = 0.3,
    seed: int = 0,
    trials: int = 200,
    target: float = 1 / 3,
    protocols: Sequence[str] = ("interactive_leaky", "noninteractive_leaky"),
    constants: TesterConstants | None = None,
) -> tuple[dict[str, SlopeFit], str]:
    """Fit log ``n*`` against log ``k`` per protocol; return fits and the CSV text."""
    ks = [int(k) for k in ks]
    if len(ks) < 3 or max(ks) < 16 * min(ks):
        raise ValueError("need at least three k values spanning at least 16x")
    constants = preset_constants("calibrated") if constants is None else constants
    spec = ExperimentSpec({"protocols": list(protocols)}, tuple(ks), eps, trials, target, seed, constants.preset)
    fits, rows = {}, []
    for proto in protocols:
        ns, intervals = [], []
        for k in ks:
            if proto == "interactive_leaky":
                fac = _interactive_factory(k, eps, constants)
            elif proto == "noninteractive_leaky":
                fac = _noninteractive_factory(k, eps)
            else:
                fac = as_factory({"protocol": proto, "k": k, "eps": eps})
            res = sample_complexity_search(
                fac, k, eps, target, trials, seed, n_start=start_guess(proto, k, eps, constants)
            )
            err = res.result.error
            ns.append(res.n_star)
            intervals.append((err.low, err.high))
            rows.append((proto, k, res.n_star, f"{err.rate:.6f}", f"{err.low:.6f}", f"{err.high:.6f}"))
        slope, intercept, resid = fit_slope(ks, ns)
        fits[proto] = SlopeFit(proto, slope, intercept, tuple(float(r) for r in resid), tuple(ks), tuple(ns), tuple(intervals))
    meta = {
        "git": git_describe(),
        "spec": spec.to_json(),
        "seed": seed,
        "preset": constants.preset,
        "constants": constants.to_json(),
        "adversaries": DEFAULT_ADVERSARIES + 1,
        # the analysis needs eps >= 8/k^(1/8); record whether this run meets it
        "eps_condition": {
            "min_eps": [round(8 / k**0.125, 6) for k in ks],
            "met": all(eps >= 8 / k**0.125 for k in ks),
        },
    }
    return fits, render_csv(rows, meta)


def render_csv(rows: Sequence[Sequence[Any]], meta: dict[str, Any]) -> str:
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()
