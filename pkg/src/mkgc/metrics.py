"""Cost model and reporting for the homomorphic operators.

The cost unit is refresh (bootstrap) invocations, not wall-clock: evaluation
time is proportional to the bootstrapped-gate count, which is what these
reports measure by instrumented evaluation. Published closed forms sit next
to the measured numbers; the divider's published total undercounts its own
inventory and the report carries the delta instead of forcing agreement.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import circuits as cir
from .gates import ClearBackend, GateBackend

PAPER_FORMULAS: dict[str, Callable[[int], int]] = {
    "add": lambda w: 5 * w,
    "sub": lambda w: 6 * w,
    "mul": lambda w: 7 * w * (w - 1),
    "div": lambda w: 7 * w * w + 2 * w + 1,
}

CSV_HEADER = "op,w,gates,nots,depth,paper_formula,match"


@dataclass(frozen=True)
class CostReport:
    op: str
    w: int
    gates: int          # bootstrapped gates measured during one evaluation
    nots: int           # zero-cost NOT gates
    depth: int          # longest refresh chain over the returned bits
    layers: int         # divider quotient layers (0 for other operators)
    paper_formula: int
    match: bool

    def csv_row(self) -> str:
        return (f"{self.op},{self.w},{self.gates},{self.nots},{self.depth},"
                f"{self.paper_formula},{int(self.match)}")


def _operands(op: str, w: int) -> tuple[int, int]:
    lo, hi = cir.int_range(w)
    if op == "div":
        # any valid pair; counts are value-independent (w=1 only holds -1..0)
        return (5, 1) if w > 1 else (0, -1)
    return hi, lo + 1


def measure(op: str, w: int, backend: Optional[GateBackend] = None,
            key=None, sampler=None) -> CostReport:
    """Run one instrumented evaluation of an operator and report its costs."""
    if op not in PAPER_FORMULAS:
        raise ValueError(f"unknown operator {op!r}; expected one of add/sub/mul/div")
    backend = backend or ClearBackend()
    before = backend.counter.snapshot()
    va, vb = _operands(op, w)
    if op == "div":
        a = cir.encode_int(va, 2 * w, backend, key, sampler)
        b = cir.encode_int(vb, w, backend, key, sampler)
        q, r = cir.div_w(a, b)
        result_bits = list(q.bits) + list(r.bits)
    else:
        a = cir.encode_int(va, w, backend, key, sampler)
        b = cir.encode_int(vb, w, backend, key, sampler)
        out = {"add": cir.add_w, "sub": cir.sub_w, "mul": cir.mul_w}[op](a, b)
        result_bits = list(out.bits)
    after = backend.counter.snapshot()
    gates = after["refreshes"] - before["refreshes"]
    nots = after["not_gates"] - before["not_gates"]
    layers = after["div_layers"] - before["div_layers"]
    formula = PAPER_FORMULAS[op](w)
    return CostReport(
        op=op, w=w, gates=gates, nots=nots,
        depth=max(bit.depth for bit in result_bits),
        layers=layers, paper_formula=formula, match=(gates == formula),
    )


#: Refresh counts per gate: the direct constructions against textbook
#: NAND-only compositions. The published naive timings imply slightly
#: different decompositions for OR/NOR than the textbook ones; these are the
#: standard counts and the ratios are reported for them.
NAIVE_NAND_REFRESHES = {
    "and": 2, "or": 3, "not": 1, "nand": 1, "nor": 4, "xor": 4, "xnor": 5,
}
DIRECT_REFRESHES = {
    "and": 1, "or": 1, "not": 0, "nand": 1, "nor": 1, "xor": 1, "xnor": 1,
}


@dataclass(frozen=True)
class GateComparison:
    gate: str
    direct: int
    nand_composed: int

    @property
    def reduction_pct(self) -> float:
        if self.nand_composed == 0:
            return 0.0
        return 100.0 * (self.nand_composed - self.direct) / self.nand_composed


def naive_gate_comparison() -> list[GateComparison]:
    return [GateComparison(g, DIRECT_REFRESHES[g], NAIVE_NAND_REFRESHES[g])
            for g in ("and", "or", "not", "nand", "nor", "xor", "xnor")]


@dataclass(frozen=True)
class ScalingReport:
    op: str
    widths: tuple[int, ...]
    gates: tuple[int, ...]
    layers: tuple[int, ...]
    growth: str           # "linear" or "quadratic", from exact differences

    def matches_formula(self) -> bool:
        f = PAPER_FORMULAS[self.op]
        return all(g == f(w) for w, g in zip(self.widths, self.gates))


def _growth_order(widths: Sequence[int], gates: Sequence[int]) -> str:
    if len(gates) < 3:
        return "linear" if len(set(gates)) <= 2 else "unknown"
    # consecutive unit-width steps: constant first differences = linear,
    # constant second differences = quadratic
    d1 = [b - a for a, b in zip(gates, gates[1:])]
    if len(set(d1)) == 1:
        return "linear"
    d2 = [b - a for a, b in zip(d1, d1[1:])]
    if len(set(d2)) == 1:
        return "quadratic"
    return "unknown"


def scaling_report(op: str, w_range: Sequence[int]) -> ScalingReport:
    if not w_range:
        raise ValueError("w_range must be non-empty")
    reports = [measure(op, w) for w in w_range]
    return ScalingReport(
        op=op,
        widths=tuple(w_range),
        gates=tuple(r.gates for r in reports),
        layers=tuple(r.layers for r in reports),
        growth=_growth_order(w_range, [r.gates for r in reports]),
    )


def reports_to_text(reports: Sequence[CostReport]) -> str:
    out = io.StringIO()
    cols = ("op", "w", "gates", "nots", "depth", "layers", "paper", "match")
    rows = [(r.op, r.w, r.gates, r.nots, r.depth, r.layers, r.paper_formula,
             "yes" if r.match else "no") for r in reports]
    widths = [max(len(str(c)), max((len(str(row[i])) for row in rows), default=0))
              for i, c in enumerate(cols)]
    out.write("  ".join(str(c).rjust(widths[i]) for i, c in enumerate(cols)) + "\n")
    for row in rows:
        out.write("  ".join(str(v).rjust(widths[i]) for i, v in enumerate(row)) + "\n")
    return out.getvalue()


def reports_to_csv(reports: Sequence[CostReport]) -> str:
    lines = [CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"


def comparison_to_text(rows: Sequence[GateComparison]) -> str:
    out = io.StringIO()
    out.write(f"{'gate':>6}  {'direct':>6}  {'nand-composed':>13}  {'reduction':>9}\n")
    for r in rows:
        out.write(f"{r.gate:>6}  {r.direct:>6}  {r.nand_composed:>13}  "
                  f"{r.reduction_pct:>8.0f}%\n")
    return out.getvalue()
