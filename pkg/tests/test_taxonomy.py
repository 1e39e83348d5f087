import json
import math
import random

import pytest

from kpi2kvi import fixture_text
from kpi2kvi.taxonomy import (
    DegradationSpec,
    TaxonomyError,
    degrade_taxonomy,
    load_taxonomy,
    lookup_codes,
    serialize_taxonomy,
    validate_taxonomy,
)


def test_fixture_loads_and_validates(taxonomy):
    assert len(taxonomy.categories) == 11
    assert validate_taxonomy(taxonomy) == []
    ids = [c.id for c in taxonomy.categories]
    assert len(set(ids)) == len(ids)


def test_round_trip(taxonomy):
    again = load_taxonomy(serialize_taxonomy(taxonomy))
    assert again == taxonomy


def test_load_rejects_unknown_keys():
    doc = json.loads(fixture_text("default.taxonomy.json"))
    doc["categories"][0]["color"] = "red"
    with pytest.raises(TaxonomyError, match="unknown keys"):
        load_taxonomy(json.dumps(doc))


def test_load_rejects_malformed_json():
    with pytest.raises(TaxonomyError, match="malformed"):
        load_taxonomy("{not json")


def test_validate_reports_undefined_code(taxonomy):
    doc = json.loads(serialize_taxonomy(taxonomy))
    doc["categories"][0]["kvi_codes"].append("ZZZ-MISSING")
    with pytest.raises(TaxonomyError, match="ZZZ-MISSING"):
        load_taxonomy(json.dumps(doc))


def test_validate_reports_symbol_mismatch(taxonomy):
    doc = json.loads(serialize_taxonomy(taxonomy))
    code = next(iter(doc["definitions"]))
    doc["definitions"][code]["kpi_symbols"].append("ghost_sym")
    with pytest.raises(TaxonomyError, match="ghost_sym"):
        load_taxonomy(json.dumps(doc))


def test_degrade_identity_and_empty(taxonomy):
    full = degrade_taxonomy(taxonomy, DegradationSpec(quality=1.0, seed=42))
    assert full == taxonomy
    empty = degrade_taxonomy(taxonomy, DegradationSpec(quality=0.0, seed=42))
    assert empty.categories == ()
    assert empty.definitions == {}


def test_degrade_removal_count(taxonomy):
    n = len(taxonomy.categories)
    for q in (0.0, 0.3, 0.7, 1.0):
        out = degrade_taxonomy(taxonomy, DegradationSpec(quality=q, seed=5))
        assert len(out.categories) == n - math.floor((1 - q) * n)


def test_degrade_deterministic(taxonomy):
    a = degrade_taxonomy(taxonomy, DegradationSpec(quality=0.4, seed=9))
    b = degrade_taxonomy(taxonomy, DegradationSpec(quality=0.4, seed=9))
    assert serialize_taxonomy(a) == serialize_taxonomy(b)


def test_degrade_golden_removed_set(taxonomy):
    # pinned seeded draw on the 11-category fixture
    out = degrade_taxonomy(taxonomy, DegradationSpec(quality=0.7, seed=42))
    kept = {c.id for c in out.categories}
    removed = {c.id for c in taxonomy.categories} - kept
    assert removed == {"energy-efficiency", "env-sustainability", "resilience"}
    assert len(out.categories) == 8


def test_degrade_nested_across_q(taxonomy):
    rng = random.Random(0)
    for _ in range(20):
        seed = rng.randrange(10_000)
        prev: set[str] | None = None
        for q in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
            kept = {c.id for c in degrade_taxonomy(taxonomy, DegradationSpec(q, seed)).categories}
            if prev is not None:
                assert prev <= kept
            prev = kept


def test_degrade_result_still_validates(taxonomy):
    for q in (0.2, 0.5, 0.8):
        out = degrade_taxonomy(taxonomy, DegradationSpec(quality=q, seed=3, field_drop=True))
        # dangling code references would surface here
        assert validate_taxonomy(out) == []
        for c in out.categories:
            for code in c.kvi_codes:
                assert code in out.definitions


def test_degrade_field_drop(taxonomy):
    out = degrade_taxonomy(taxonomy, DegradationSpec(quality=0.1, seed=1, field_drop=True))
    assert any(c.aliases == () or c.description == "" for c in out.categories)
    intact = degrade_taxonomy(taxonomy, DegradationSpec(quality=1.0, seed=1, field_drop=True))
    assert intact == taxonomy


def test_lookup_codes_order_and_dedup(taxonomy):
    defs = lookup_codes(taxonomy, ["user-trust", "user-trust"])
    codes = [d.code for d in defs]
    assert codes == ["PUC-UPCA", "PUC-USCA", "RPS-DDSS"]


def test_lookup_codes_unknown_id(taxonomy):
    with pytest.raises(TaxonomyError, match="unknown category"):
        lookup_codes(taxonomy, ["no-such-category"])


def test_quality_out_of_range():
    with pytest.raises(ValueError, match="quality"):
        DegradationSpec(quality=1.5, seed=0)
