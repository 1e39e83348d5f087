"""Per-KVI computation: bounded results with rationales, plus the verifier."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .evidence import KpiTable, nominal_bindings, table_to_bindings
from .formula import EvalError, Interval, eval_interval, eval_point, parse_formula
from .taxonomy import KviDefinition


class KviComputationError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class KviResult:
    code: str
    exact: float
    min: float
    max: float
    unit: str
    rationale: str
    cited_kpis: tuple[str, ...]
    flags: tuple[str, ...] = ()


def compute_kvi(defn: KviDefinition, table: KpiTable) -> KviResult:
    """Evaluate a KVI definition over the table's evidence.

    min/max come from interval arithmetic over the interval bindings;
    exact from point evaluation at per-KPI nominals (interval midpoints).
    The rationale is template-generated and deterministic.
    """
    intervals = table_to_bindings(table)
    nominals = nominal_bindings(table)
    missing = [s for s in defn.kpi_symbols if s not in intervals]
    if missing:
        raise KviComputationError(defn.code, f"no KPI value bound for symbol(s) {missing}")

    expr = parse_formula(defn.formula)
    try:
        bounds = eval_interval(expr, intervals)
        exact = eval_point(expr, nominals)
    except EvalError as exc:
        raise KviComputationError(defn.code, str(exc)) from exc

    cited = []
    lines = [f"{defn.code} = {defn.formula} ({defn.unit})."]
    for kpi, val in table.rows:
        if kpi.symbol not in defn.kpi_symbols or val is None:
            continue
        cited.append(kpi.id)
        if isinstance(val.value, Interval):
            shown = f"[{_num(val.value.lo)}, {_num(val.value.hi)}] (nominal {_num(val.value.mid)})"
        else:
            shown = _num(val.value)
        basis = (
            "assumption (system-decided)"
            if val.provenance == "system-decided"
            else "user-provided observation"
        )
        lines.append(f"{kpi.symbol} = {shown} {val.unit} from KPI {kpi.id}, {basis}.")
    lines.append(
        f"Result: exact {_num(exact)}, bounds [{_num(bounds.lo)}, {_num(bounds.hi)}] {defn.unit}."
    )
    result = KviResult(
        code=defn.code,
        exact=exact,
        min=bounds.lo,
        max=bounds.hi,
        unit=defn.unit,
        rationale=" ".join(lines),
        cited_kpis=tuple(cited),
    )
    return replace(result, flags=tuple(verify_result(result, defn)))


def _num(x: float) -> str:
    r = float(f"{x:.12g}")
    return repr(int(r)) if r == int(r) else repr(r)


def verify_result(r: KviResult, defn: KviDefinition) -> list[str]:
    """Deterministic consistency checks; an empty list means the result is clean."""
    flags = []
    if not (r.min <= r.exact <= r.max):
        flags.append("bounds-order")
    if r.unit != defn.unit:
        flags.append("unit-mismatch")
    if r.unit == "%" and not (0.0 <= r.min and r.max <= 100.0):
        flags.append("percent-range")
    if not r.rationale.strip():
        flags.append("empty-rationale")
    if not r.cited_kpis and defn.kpi_symbols:
        flags.append("no-citations")
    return flags


def _round12(x: float) -> float:
    # 12 significant digits: strips float arithmetic noise, stays far
    # inside the 1e-9 tolerance used for bound checks
    return float(f"{x:.12g}")


def result_to_json(r: KviResult) -> str:
    return json.dumps(
        {
            "code": r.code,
            "exact": _round12(r.exact),
            "min": _round12(r.min),
            "max": _round12(r.max),
            "unit": r.unit,
            "rationale": r.rationale,
            "cited_kpis": list(r.cited_kpis),
            "flags": list(r.flags),
        },
        sort_keys=True,
    )


def result_from_json(document: str) -> KviResult:
    data = json.loads(document)
    return KviResult(
        code=data["code"],
        exact=float(data["exact"]),
        min=float(data["min"]),
        max=float(data["max"]),
        unit=data["unit"],
        rationale=data["rationale"],
        cited_kpis=tuple(data["cited_kpis"]),
        flags=tuple(data.get("flags", [])),
    )
