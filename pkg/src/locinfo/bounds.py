"""Order-level lower bounds for learning and uniformity testing (constants set to 1).

Each cell depends on the channel family only through three norms of its
information matrices:

* learning in TV distance: ``k^2 / (eps^2 nuc)`` for every protocol class;
* learning in l2 distance: ``k/(eps^2 nuc)`` min ``1/(eps^4 nuc)``;
* testing: ``k^{3/2}/(eps^2 nuc)`` private-coin, ``k/(eps^2 frob)``
  public-coin and ``k/(eps^2 sqrt(op nuc))`` interactive.

Closed-form families use their order-level norms: ``rho^2`` for all three
norms under rho-LDP, ``(1, 2^{l/2}, 2^l)`` for ``l``-bit messages and
``(1, 1, sqrt(k))`` for leaky queries.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any

import numpy as np

from .channels import FamilyNorms, channel_norms, partial_erasure

TASKS = ("learning-TV", "learning-L2", "testing")
MODELS = ("private-coin", "public-coin", "interactive")


@dataclass(frozen=True)
class Family:
    """Channel family with symbolic and numeric norms.

    ``symbols`` maps ``op``, ``frob`` and ``nuc`` to expression strings in
    the variables ``k``, ``rho`` and ``l``.
    """

    name: str
    norms: FamilyNorms
    symbols: dict
    params: dict


@dataclass(frozen=True)
class BoundRow:
    task: str
    model: str
    family: str
    bound: float
    formula: str
    norm: str

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if not self.bound > 0:
            raise ValueError("bound must be positive")

    def to_json(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "model": self.model,
            "family": self.family,
            "bound": self.bound,
            "formula": self.formula,
            "norm": self.norm,
        }


def _fmt(x: float) -> str:
    return repr(float(x))


def ldp_family(k: int, rho: float) -> Family:
    if not rho > 0:
        raise ValueError("rho must be positive")
    r2 = rho**2
    return Family(
        f"ldp({rho:g})",
        FamilyNorms(r2, r2, r2),
        {"op": "rho^2", "frob": "rho^2", "nuc": "rho^2"},
        {"k": k, "rho": rho},
    )


def comm_family(k: int, bits: int) -> Family:
    if bits < 1:
        raise ValueError("bits must be at least 1")
    return Family(
        f"comm({bits})",
        FamilyNorms(1.0, 2.0**bits, 2.0 ** (bits / 2)),
        {"op": "1", "frob": "2^(l/2)", "nuc": "2^l"},
        {"k": k, "l": bits},
    )


def leaky_family(k: int) -> Family:
    return Family(
        "leaky",
        FamilyNorms(1.0, math.sqrt(k), 1.0),
        {"op": "1", "frob": "1", "nuc": "k^(1/2)"},
        {"k": k},
    )


def custom_family(k: int, norms: FamilyNorms, name: str = "custom") -> Family:
    return Family(
        name,
        norms,
        {"op": _fmt(norms.op), "frob": _fmt(norms.frobenius), "nuc": _fmt(norms.nuclear)},
        {"k": k},
    )


def erasure_family(k: int, eta: float | None = None) -> Family:
    """Partial-erasure channels; every ``x_star`` gives the same norms up to relabeling."""
    eta = 1 / math.sqrt(k) if eta is None else eta
    norms = FamilyNorms.family_max([channel_norms(partial_erasure(k, eta, x)) for x in (0, 1)])
    return custom_family(k, norms, f"erasure({eta:g})")


def parse_family(spec: str | dict, k: int) -> Family:
    """Family from ``"ldp:0.5"``, ``"comm:3"``, ``"leaky"``, ``"erasure"`` or a dict.

    The dict form ``{"type": "custom", "op": .., "nuclear": .., "frobenius": ..}``
    supplies norms directly.
    """
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "ldp":
            return ldp_family(k, float(spec["rho"]))
        if kind == "comm":
            return comm_family(k, int(spec["l"]))
        if kind == "leaky":
            return leaky_family(k)
        if kind == "erasure":
            return erasure_family(k, spec.get("eta"))
        if kind == "custom":
            return custom_family(
                k, FamilyNorms(float(spec["op"]), float(spec["nuclear"]), float(spec["frobenius"]))
            )
        raise ValueError(f"unknown family {kind!r}")
    name, _, arg = spec.partition(":")
    name = name.strip()
    m = re.fullmatch(r"(\w+)\((.*)\)", name)
    if m:
        name, arg = m.group(1), m.group(2)
    if name == "ldp":
        return ldp_family(k, float(arg))
    if name == "comm":
        return comm_family(k, int(arg))
    if name == "leaky":
        return leaky_family(k)
    if name == "erasure":
        return erasure_family(k, float(arg) if arg else None)
    raise ValueError(f"unknown family {spec!r}")


def _sqrt_product(op: str, nuc: str) -> str:
    known = {
        ("rho^2", "rho^2"): "rho^2",
        ("1", "2^l"): "2^(l/2)",
        ("1", "k^(1/2)"): "k^(1/4)",
    }
    if (op, nuc) in known:
        return known[(op, nuc)]
    return f"({op}*{nuc})^(1/2)"


def _formula(task: str, model: str, sym: dict) -> tuple[str, str]:
    nuc, frob, op = sym["nuc"], sym["frob"], sym["op"]
    if task == "learning-TV":
        return _fmt_ratio("k^2", "eps^2", nuc), "nuclear"
    if task == "learning-L2":
        return f"min({_fmt_ratio('k', 'eps^2', nuc)}, {_fmt_ratio('1', 'eps^4', nuc)})", "nuclear"
    if model == "private-coin":
        return _fmt_ratio("k^(3/2)", "eps^2", nuc), "nuclear"
    if model == "public-coin":
        return _fmt_ratio("k", "eps^2", frob), "frobenius"
    return _fmt_ratio("k", "eps^2", _sqrt_product(op, nuc)), "sqrt(op*nuclear)"


def _fmt_ratio(num: str, eps_pow: str, norm: str) -> str:
    # absorb sqrt(k) into the numerator power where it appears in the norm
    if norm == "k^(1/2)" and num in ("k", "k^(3/2)", "k^2"):
        power = {"k": "1/2", "k^(3/2)": "1", "k^2": "3/2"}[num]
        num = "k" if power == "1" else f"k^({power})"
        norm = "1"
    elif norm == "k^(1/4)" and num == "k":
        num, norm = "k^(3/4)", "1"
    if norm == "1":
        return f"{num}/{eps_pow}"
    return f"{num}/({eps_pow}*{norm})"


def evaluate_formula(formula: str, **values: float) -> float:
    """Numeric value of a formula string produced by this module."""
    expr = formula.replace("^", "**")
    return float(eval(expr, {"__builtins__": {}, "min": min}, dict(values)))


def _value(task: str, model: str, k: int, eps: float, n: FamilyNorms) -> float:
    if task == "learning-TV":
        return k**2 / (eps**2 * n.nuclear)
    if task == "learning-L2":
        return min(k / (eps**2 * n.nuclear), 1 / (eps**4 * n.nuclear))
    if model == "private-coin":
        return k**1.5 / (eps**2 * n.nuclear)
    if model == "public-coin":
        return k / (eps**2 * n.frobenius)
    return k / (eps**2 * math.sqrt(n.op * n.nuclear))


def lower_bound_table(k: int, eps: float, family: Family | str | dict) -> list[BoundRow]:
    """One row per (task, protocol class) cell, order-level with constant 1."""
    if k < 1 or not 0 < eps <= 1:
        raise ValueError("need k >= 1 and eps in (0, 1]")
    if not isinstance(family, Family):
        family = parse_family(family, k)
    n = family.norms
    if min(n.op, n.nuclear, n.frobenius) <= 0:
        raise ValueError("family norms must be positive")
    rows = []
    for task in TASKS:
        for model in MODELS:
            formula, norm = _formula(task, model, family.symbols)
            rows.append(BoundRow(task, model, family.name, _value(task, model, k, eps, n), formula, norm))
    return rows


def find_row(rows: list[BoundRow], task: str, model: str) -> BoundRow:
    for r in rows:
        if r.task == task and r.model == model:
            return r
    raise KeyError((task, model))


def holder_consistent(rows: list[BoundRow], k: int, eps: float) -> bool:
    """Interactive and public-coin testing bounds dominate ``k/(eps^2 nuc)``.

    Holds whenever ``op <= nuc`` and ``frob <= nuc``, i.e. for every
    family satisfying the Holder chain.
    """
    learning = find_row(rows, "learning-TV", "interactive").bound
    floor = learning / k  # k/(eps^2 nuc)
    test = {r.model: r.bound for r in rows if r.task == "testing"}
    tol = 1e-9 * floor
    return test["interactive"] >= floor - tol and test["public-coin"] >= floor - tol
