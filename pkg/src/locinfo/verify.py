"""Seeded verification suites over random instances.

Every case draws its instance from its own seed, recorded in the report,
so any failing case replays in isolation with ``replay(suite, case_seed)``.
"""

from __future__ import annotations

import math
from typing import Callable, Iterator

import numpy as np

from . import oracle
from .channels import (
    FamilyNorms,
    channel_norms,
    info_matrix,
    leaky_query,
    leaky_query_info_closed_form,
    random_channel,
)
from .oracle import VerificationReport

EPS_GRID = (0.05, 0.1, 0.25)


def case_seeds(seed: int, cases: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(cases, dtype=np.uint32)]


def random_instance(case_seed: int, k: int = 2, max_labels: int = 3, max_depth: int = 3):
    """Random strategy with ``k``, alphabet size in ``[2, max_labels]``, depth in ``[1, max_depth]``."""
    rng = np.random.default_rng(case_seed)
    a = int(rng.integers(2, max_labels + 1))
    n = int(rng.integers(1, max_depth + 1))
    eps = float(rng.choice(EPS_GRID))
    return oracle.random_strategy(k, a, n, rng), k, eps, n


def _tag(report: VerificationReport, case_seed: int) -> VerificationReport:
    inst = dict(report.instance, case_seed=case_seed)
    return VerificationReport(inst, report.lhs, report.rhs, suite=report.suite)


def avg_info_case(case_seed: int) -> list[VerificationReport]:
    s, k, eps, n = random_instance(case_seed)
    return [_tag(oracle.check_avg_info_bound(s, k, eps, t), case_seed) for t in range(1, n + 1)]


def per_round_case(case_seed: int) -> list[VerificationReport]:
    s, k, eps, n = random_instance(case_seed)
    return [_tag(oracle.check_per_round_bound(s, k, eps, t), case_seed) for t in range(n)]


def lecam_case(case_seed: int) -> list[VerificationReport]:
    s, k, eps, n = random_instance(case_seed)
    return [_tag(oracle.lecam_kl_check(s, k, eps, n), case_seed)]


def _joint(case_seed: int):
    rng = np.random.default_rng(case_seed)
    return oracle.random_joint(2, 3, rng)


def hamming_case(case_seed: int) -> list[VerificationReport]:
    return [_tag(r, case_seed) for r in oracle.check_hamming_info_loss(_joint(case_seed))]


def mse_case(case_seed: int) -> list[VerificationReport]:
    return [_tag(r, case_seed) for r in oracle.check_mse_info_loss(_joint(case_seed))]


def _channel(case_seed: int):
    rng = np.random.default_rng(case_seed)
    k = int(rng.choice((2, 4, 8)))
    a = int(rng.integers(2, 3 * k + 1))
    return random_channel(k, a, rng)


def gershgorin_case(case_seed: int) -> list[VerificationReport]:
    ch = _channel(case_seed)
    op = channel_norms(ch).op
    inst = {"k": ch.k, "alphabet": ch.n_labels, "case_seed": case_seed}
    return [VerificationReport(inst, op, 2.0, suite="gershgorin")]


def holder_case(case_seed: int) -> list[VerificationReport]:
    ch = _channel(case_seed)
    n: FamilyNorms = channel_norms(ch)
    inst = {"k": ch.k, "alphabet": ch.n_labels, "case_seed": case_seed}
    return [
        VerificationReport(dict(inst, relation="frob^2 <= op*nuc"), n.frobenius**2, n.op * n.nuclear, suite="holder"),
        VerificationReport(dict(inst, relation="op <= frob"), n.op, n.frobenius, suite="holder"),
        VerificationReport(dict(inst, relation="frob <= nuc"), n.frobenius, n.nuclear, suite="holder"),
    ]


def closed_form_case(case_seed: int) -> list[VerificationReport]:
    rng = np.random.default_rng(case_seed)
    k = int(rng.choice((4, 16, 64)))
    eta = float(rng.uniform(0, 1))
    u = rng.uniform(0, 1, size=2 * k)
    if rng.random() < 0.5:
        u = (u < 0.5).astype(float)
    generic = info_matrix(leaky_query(k, eta, u)).entries
    closed = leaky_query_info_closed_form(k, eta, u).entries
    gap = float(np.abs(generic - closed).max())
    inst = {"k": k, "eta": eta, "case_seed": case_seed}
    return [VerificationReport(inst, gap, 0.0, suite="closed-form")]


SUITES: dict[str, Callable[[int], list[VerificationReport]]] = {
    "avg-info": avg_info_case,
    "per-round": per_round_case,
    "info-loss-hamming": hamming_case,
    "info-loss-mse": mse_case,
    "lecam": lecam_case,
    "gershgorin": gershgorin_case,
    "holder": holder_case,
    "closed-form": closed_form_case,
}


def _named(report: VerificationReport, suite: str) -> VerificationReport:
    if report.suite == suite:
        return report
    return VerificationReport(report.instance, report.lhs, report.rhs, suite=suite)


def run_suite(name: str, cases: int, seed: int) -> Iterator[VerificationReport]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    fn = SUITES[name]
    for cs in case_seeds(seed, cases):
        for report in fn(cs):
            yield _named(report, name)


def replay(name: str, case_seed: int) -> list[VerificationReport]:
    return [_named(r, name) for r in SUITES[name](case_seed)]


def slack_summary(reports: list[VerificationReport]) -> dict[str, float]:
    """Violations and slack quantiles; ``max_ratio`` is the largest ``lhs/rhs``."""
    slack = np.array([r.slack for r in reports])
    ratios = [r.lhs / r.rhs for r in reports if r.rhs > 0]
    return {
        "reports": len(reports),
        "violations": int(sum(not r.holds for r in reports)),
        "min_slack": float(slack.min()) if slack.size else math.nan,
        "median_slack": float(np.median(slack)) if slack.size else math.nan,
        "max_ratio": float(max(ratios)) if ratios else 0.0,
    }
