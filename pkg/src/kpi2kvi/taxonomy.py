"""KVI taxonomy: loading, validation, querying, and seeded degradation.

The taxonomy is a pure data layer: formula text is stored verbatim and
parsed elsewhere. Values are immutable after load; degradation returns a
new Taxonomy.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace

from .formula import FormulaSyntaxError, free_symbols, parse_formula

_CODE_RE = re.compile(r"^[A-Z]+-[A-Z]+$")


class TaxonomyError(ValueError):
    """Malformed or inconsistent taxonomy document."""


@dataclass(frozen=True)
class KviCategory:
    id: str
    name: str
    description: str
    kvi_codes: tuple[str, ...]
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class KviDefinition:
    code: str
    title: str
    unit: str
    narrative: tuple[str, ...]
    formula: str
    kpi_symbols: tuple[str, ...]


@dataclass(frozen=True)
class Taxonomy:
    version: str
    categories: tuple[KviCategory, ...]
    definitions: dict[str, KviDefinition] = field(default_factory=dict)


@dataclass(frozen=True)
class DegradationSpec:
    quality: float
    seed: int
    field_drop: bool = False

    def __post_init__(self):
        if not (0.0 <= self.quality <= 1.0):
            raise ValueError(f"quality must be in [0, 1], got {self.quality}")


_CATEGORY_KEYS = {"id", "name", "description", "aliases", "kvi_codes"}
_DEFINITION_KEYS = {"title", "unit", "narrative", "formula", "kpi_symbols"}


def load_taxonomy(document: str) -> Taxonomy:
    """Parse and validate a taxonomy JSON document (order-preserving)."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TaxonomyError(f"malformed taxonomy document: {exc}") from exc
    if not isinstance(data, dict):
        raise TaxonomyError("taxonomy document must be a JSON object")
    unknown = set(data) - {"version", "categories", "definitions"}
    if unknown:
        raise TaxonomyError(f"unknown top-level keys: {sorted(unknown)}")

    categories = []
    for i, raw in enumerate(data.get("categories", [])):
        extra = set(raw) - _CATEGORY_KEYS
        if extra:
            raise TaxonomyError(f"categories[{i}]: unknown keys {sorted(extra)}")
        try:
            categories.append(
                KviCategory(
                    id=raw["id"],
                    name=raw["name"],
                    description=raw["description"],
                    aliases=tuple(raw["aliases"]),
                    kvi_codes=tuple(raw["kvi_codes"]),
                )
            )
        except KeyError as exc:
            raise TaxonomyError(f"categories[{i}]: missing field {exc}") from exc

    definitions = {}
    for code, raw in data.get("definitions", {}).items():
        extra = set(raw) - _DEFINITION_KEYS
        if extra:
            raise TaxonomyError(f"definitions[{code}]: unknown keys {sorted(extra)}")
        try:
            definitions[code] = KviDefinition(
                code=code,
                title=raw["title"],
                unit=raw["unit"],
                narrative=tuple(raw["narrative"]),
                formula=raw["formula"],
                kpi_symbols=tuple(raw["kpi_symbols"]),
            )
        except KeyError as exc:
            raise TaxonomyError(f"definitions[{code}]: missing field {exc}") from exc

    t = Taxonomy(version=data.get("version", ""), categories=tuple(categories), definitions=definitions)
    violations = validate_taxonomy(t)
    if violations:
        raise TaxonomyError("invalid taxonomy: " + "; ".join(violations))
    return t


def serialize_taxonomy(t: Taxonomy) -> str:
    doc = {
        "version": t.version,
        "categories": [
            {
                "id": c.id,
                "name": c.name,
                "description": c.description,
                "aliases": list(c.aliases),
                "kvi_codes": list(c.kvi_codes),
            }
            for c in t.categories
        ],
        "definitions": {
            code: {
                "title": d.title,
                "unit": d.unit,
                "narrative": list(d.narrative),
                "formula": d.formula,
                "kpi_symbols": list(d.kpi_symbols),
            }
            for code, d in t.definitions.items()
        },
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)


def validate_taxonomy(t: Taxonomy) -> list[str]:
    """Return violation descriptions; empty list means valid."""
    violations = []
    seen_ids: set[str] = set()
    for c in t.categories:
        if not c.id:
            violations.append("category with empty id")
            continue
        if c.id in seen_ids:
            violations.append(f"duplicate category id {c.id!r}")
        seen_ids.add(c.id)
        if not c.kvi_codes:
            violations.append(f"category {c.id!r} has no kvi_codes")
        if len(set(c.kvi_codes)) != len(c.kvi_codes):
            violations.append(f"category {c.id!r} lists duplicate codes")
        for code in c.kvi_codes:
            if code not in t.definitions:
                violations.append(f"category {c.id!r} references undefined code {code!r}")
    for code, d in t.definitions.items():
        if not _CODE_RE.match(code):
            violations.append(f"code {code!r} does not match PREFIX-SUFFIX shape")
        if not d.unit:
            violations.append(f"code {code!r} has empty unit")
        try:
            syms = free_symbols(parse_formula(d.formula))
        except FormulaSyntaxError as exc:
            violations.append(f"code {code!r} formula does not parse: {exc}")
            continue
        if syms != set(d.kpi_symbols):
            missing = syms - set(d.kpi_symbols)
            extra = set(d.kpi_symbols) - syms
            for s in sorted(missing):
                violations.append(f"code {code!r} formula reads {s!r} absent from kpi_symbols")
            for s in sorted(extra):
                violations.append(f"code {code!r} lists unused symbol {s!r}")
    return violations


def degrade_taxonomy(t: Taxonomy, spec: DegradationSpec) -> Taxonomy:
    """Remove floor((1-q)*N) categories chosen by a seeded draw.

    The draw shuffles the lexicographically sorted id list, so removal
    sets are nested across q for a fixed seed and independent of the
    document's category order. With field_drop, surviving categories
    independently lose aliases and description with probability 1-q.
    """
    rng = random.Random(spec.seed)
    n = len(t.categories)
    k = int((1.0 - spec.quality) * n + 1e-12)
    ids = sorted(c.id for c in t.categories)
    rng.shuffle(ids)
    removed = set(ids[:k])

    survivors = []
    for c in t.categories:
        if c.id in removed:
            continue
        survivors.append(c)
    if spec.field_drop:
        p = 1.0 - spec.quality
        # draws keyed to sorted-id order so they do not depend on document order
        decisions = {}
        for cid in sorted(c.id for c in survivors):
            decisions[cid] = (rng.random() < p, rng.random() < p)
        survivors = [
            replace(
                c,
                aliases=() if decisions[c.id][0] else c.aliases,
                description="" if decisions[c.id][1] else c.description,
            )
            for c in survivors
        ]

    kept_codes = {code for c in survivors for code in c.kvi_codes}
    definitions = {code: d for code, d in t.definitions.items() if code in kept_codes}
    return Taxonomy(version=t.version, categories=tuple(survivors), definitions=definitions)


def lookup_codes(t: Taxonomy, category_ids: list[str]) -> list[KviDefinition]:
    """Definitions for the categories' codes, deduplicated, first-appearance order."""
    by_id = {c.id: c for c in t.categories}
    out: list[KviDefinition] = []
    seen: set[str] = set()
    for cid in category_ids:
        if cid not in by_id:
            raise TaxonomyError(f"unknown category id {cid!r}")
        for code in by_id[cid].kvi_codes:
            if code not in seen:
                seen.add(code)
                out.append(t.definitions[code])
    return out
