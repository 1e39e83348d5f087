"""KPI evidence: utterance parsing, unit normalization, and the KPI table.

The table is the single source of truth for downstream KVI calculation:
ordered rows of (Kpi, KpiValue) with provenance flags.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Optional, Union

from .formula import Interval


class UtteranceError(ValueError):
    """Value utterance not recognized; the collector should re-prompt."""


class UnitError(ValueError):
    """No conversion between the given unit pair."""


class TableError(ValueError):
    """Inconsistent KPI table construction or use."""


@dataclass(frozen=True)
class Kpi:
    id: str
    symbol: str
    name: str
    description: str
    unit: str


@dataclass(frozen=True)
class KpiValue:
    kpi_id: str
    value: Union[float, Interval]
    unit: str
    provenance: str  # "user-provided" | "system-decided"
    raw_text: str


@dataclass(frozen=True)
class KpiTable:
    rows: tuple[tuple[Kpi, Optional[KpiValue]], ...]
    complete: bool


@dataclass(frozen=True)
class ParsedValue:
    kind: str  # "point" | "interval" | "delegate"
    point: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    unit_hint: Optional[str] = None

    def __post_init__(self):
        if self.kind == "interval" and not (self.lo <= self.hi):
            raise ValueError(f"interval lo {self.lo} > hi {self.hi}")


_DELEGATE_RE = re.compile(r"\b(estimate it|delegate|unknown|you decide)\b", re.IGNORECASE)
_NUM = r"-?\d+(?:\.\d+)?"
_UNIT = r"(?:\s*(?P<unit>[A-Za-z%][A-Za-z%_/]*))?"
_POINT_RE = re.compile(rf"^\s*(?P<v>{_NUM}){_UNIT}\s*$")
_BRACKET_RE = re.compile(rf"^\s*\[\s*(?P<lo>{_NUM})\s*,\s*(?P<hi>{_NUM})\s*\]{_UNIT}\s*$")
_DASH_RE = re.compile(rf"^\s*(?P<lo>{_NUM})\s*-\s*(?P<hi>{_NUM}){_UNIT}\s*$")
_TO_RE = re.compile(
    rf"^\s*(?:between\s+)?(?P<lo>{_NUM})\s+(?:to|and)\s+(?P<hi>{_NUM}){_UNIT}\s*$",
    re.IGNORECASE,
)


def parse_value_utterance(text: str) -> ParsedValue:
    """Parse a chat utterance into a point, interval, or delegation.

    Accepted shapes: "10", "[7,9]", "7-9", "7 to 9", "between 7 and 9",
    each with an optional trailing unit token, plus delegation phrases
    ("estimate it", "delegate", "unknown", "you decide").
    """
    if _DELEGATE_RE.search(text):
        return ParsedValue(kind="delegate")
    m = _POINT_RE.match(text)
    if m:
        return ParsedValue(kind="point", point=float(m.group("v")), unit_hint=m.group("unit"))
    for rx in (_BRACKET_RE, _TO_RE, _DASH_RE):
        m = rx.match(text)
        if m:
            lo, hi = float(m.group("lo")), float(m.group("hi"))
            if lo > hi:
                raise UtteranceError(f"interval bounds reversed in {text!r}")
            return ParsedValue(kind="interval", lo=lo, hi=hi, unit_hint=m.group("unit"))
    raise UtteranceError(f"could not read a value from {text!r}")


def format_value_utterance(v: ParsedValue) -> str:
    """Render a ParsedValue as an utterance that parses back to itself."""
    if v.kind == "delegate":
        return "please estimate it"
    suffix = f" {v.unit_hint}" if v.unit_hint else ""
    if v.kind == "point":
        return f"{_fmt_num(v.point)}{suffix}"
    return f"between {_fmt_num(v.lo)} and {_fmt_num(v.hi)}{suffix}"


def _fmt_num(x: float) -> str:
    return repr(int(x)) if x == int(x) else repr(x)


# (hint, declared) -> multiplicative factor
_CONVERSIONS = {
    ("ms", "s"): 0.001,
    ("s", "ms"): 1000.0,
    ("fraction", "%"): 100.0,
    ("%", "fraction"): 0.01,
}


def normalize_unit(v: ParsedValue, declared_unit: str) -> ParsedValue:
    """Express v in declared_unit, consuming the unit hint."""
    if v.kind == "delegate":
        return v
    hint = v.unit_hint
    if hint is None or hint == declared_unit:
        factor = 1.0
    elif (hint, declared_unit) in _CONVERSIONS:
        factor = _CONVERSIONS[(hint, declared_unit)]
    else:
        raise UnitError(f"cannot convert {hint!r} to {declared_unit!r}")
    if v.kind == "point":
        return ParsedValue(kind="point", point=v.point * factor, unit_hint=declared_unit)
    return ParsedValue(kind="interval", lo=v.lo * factor, hi=v.hi * factor, unit_hint=declared_unit)


def build_kpi_table(plan: list[Kpi], collected: list[KpiValue]) -> KpiTable:
    """Assemble rows in plan order; duplicate kpi_ids resolve last-write-wins."""
    by_id = {k.id: k for k in plan}
    values: dict[str, KpiValue] = {}
    for v in collected:
        if v.kpi_id not in by_id:
            raise TableError(f"collected value for unknown kpi_id {v.kpi_id!r}")
        prior = values.get(v.kpi_id)
        if prior is not None:
            v = replace(v, raw_text=f"{v.raw_text} (supersedes: {prior.raw_text})")
        values[v.kpi_id] = v
    rows = tuple((k, values.get(k.id)) for k in plan)
    complete = all(val is not None for _, val in rows)
    return KpiTable(rows=rows, complete=complete)


def table_to_bindings(t: KpiTable) -> dict[str, Interval]:
    """Symbol -> Interval map; point values become degenerate intervals."""
    if not t.complete:
        missing = [k.id for k, v in t.rows if v is None]
        raise TableError(f"incomplete table, missing values for: {missing}")
    out = {}
    for kpi, val in t.rows:
        iv = val.value if isinstance(val.value, Interval) else Interval.point(val.value)
        out[kpi.symbol] = iv
    return out


def nominal_bindings(t: KpiTable) -> dict[str, float]:
    """Symbol -> nominal real: midpoints for intervals, the point otherwise."""
    return {sym: iv.mid for sym, iv in table_to_bindings(t).items()}


# ---------------------------------------------------------------------------
# Serialization (artifact key "kpi_table")


def table_to_json(t: KpiTable) -> str:
    rows = []
    for kpi, val in t.rows:
        if val is None:
            continue
        if isinstance(val.value, Interval):
            value = {"kind": "interval", "lo": val.value.lo, "hi": val.value.hi}
        else:
            value = {"kind": "point", "point": val.value}
        rows.append(
            {
                "kpi_id": kpi.id,
                "symbol": kpi.symbol,
                "unit": val.unit,
                "value": value,
                "provenance": val.provenance,
                "raw_text": val.raw_text,
            }
        )
    return json.dumps({"complete": t.complete, "rows": rows}, sort_keys=True)


def table_from_json(document: str, plan: list[Kpi]) -> KpiTable:
    """Rebuild a KpiTable from its serialized form, validated against a plan."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TableError(f"malformed table document: {exc}") from exc
    collected = []
    for row in data.get("rows", []):
        v = row["value"]
        if v["kind"] == "interval":
            value: Union[float, Interval] = Interval(v["lo"], v["hi"])
        elif v["kind"] == "point":
            value = float(v["point"])
        else:
            raise TableError(f"unknown value kind {v['kind']!r}")
        if row["provenance"] not in ("user-provided", "system-decided"):
            raise TableError(f"unknown provenance {row['provenance']!r}")
        collected.append(
            KpiValue(
                kpi_id=row["kpi_id"],
                value=value,
                unit=row["unit"],
                provenance=row["provenance"],
                raw_text=row.get("raw_text", ""),
            )
        )
    return build_kpi_table(plan, collected)
