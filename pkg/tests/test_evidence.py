import pytest

from kpi2kvi.evidence import (
    Kpi,
    KpiValue,
    ParsedValue,
    TableError,
    UnitError,
    UtteranceError,
    build_kpi_table,
    format_value_utterance,
    nominal_bindings,
    normalize_unit,
    parse_value_utterance,
    table_from_json,
    table_to_bindings,
    table_to_json,
)
from kpi2kvi.formula import Interval

PLAN = [
    Kpi(id="n-priv-concerns", symbol="N_p", name="Privacy concerns raised", description="", unit="count"),
    Kpi(id="a-priv-addressed", symbol="A_p", name="Concerns addressed", description="", unit="count"),
    Kpi(id="likert-security", symbol="r_s", name="Security rating", description="", unit="likert"),
]


@pytest.mark.parametrize(
    "text,expected",
    [
        ("10", ParsedValue(kind="point", point=10.0)),
        ("  3.5 ", ParsedValue(kind="point", point=3.5)),
        ("42 ms", ParsedValue(kind="point", point=42.0, unit_hint="ms")),
        ("[7, 9]", ParsedValue(kind="interval", lo=7.0, hi=9.0)),
        ("7-9", ParsedValue(kind="interval", lo=7.0, hi=9.0)),
        ("7 to 9", ParsedValue(kind="interval", lo=7.0, hi=9.0)),
        ("between 7 and 9", ParsedValue(kind="interval", lo=7.0, hi=9.0)),
        ("between 3.8 and 4.4", ParsedValue(kind="interval", lo=3.8, hi=4.4)),
        ("[80, 90] %", ParsedValue(kind="interval", lo=80.0, hi=90.0, unit_hint="%")),
        ("please estimate it", ParsedValue(kind="delegate")),
        ("you decide", ParsedValue(kind="delegate")),
        ("honestly, unknown", ParsedValue(kind="delegate")),
    ],
)
def test_parse_value_utterance(text, expected):
    assert parse_value_utterance(text) == expected


def test_parse_rejects_noise():
    with pytest.raises(UtteranceError):
        parse_value_utterance("maybe around a lot")


def test_parse_rejects_reversed_interval():
    with pytest.raises(UtteranceError, match="reversed"):
        parse_value_utterance("between 9 and 7")


@pytest.mark.parametrize(
    "value,text",
    [
        (ParsedValue(kind="delegate"), "please estimate it"),
        (ParsedValue(kind="point", point=10.0), "10"),
        (ParsedValue(kind="interval", lo=7.0, hi=9.0), "between 7 and 9"),
        (ParsedValue(kind="interval", lo=3.8, hi=4.4, unit_hint="ms"), "between 3.8 and 4.4 ms"),
    ],
)
def test_format_round_trips(value, text):
    assert format_value_utterance(value) == text
    assert parse_value_utterance(text) == value


def test_normalize_unit_conversions():
    ms = parse_value_utterance("250 ms")
    assert normalize_unit(ms, "s") == ParsedValue(kind="point", point=0.25, unit_hint="s")
    frac = parse_value_utterance("between 0.7 and 0.9 fraction")
    pct = normalize_unit(frac, "%")
    assert (pct.lo, pct.hi, pct.unit_hint) == (70.0, 90.0, "%")


def test_normalize_unit_passthrough_and_error():
    bare = parse_value_utterance("10")
    assert normalize_unit(bare, "count").point == 10.0
    with pytest.raises(UnitError):
        normalize_unit(parse_value_utterance("10 kg"), "s")


def _collected():
    return [
        KpiValue("n-priv-concerns", 10.0, "count", "user-provided", "10"),
        KpiValue("a-priv-addressed", Interval(7, 9), "count", "system-decided", "between 7 and 9"),
        KpiValue("likert-security", Interval(3.8, 4.4), "likert", "user-provided", "between 3.8 and 4.4"),
    ]


def test_build_table_complete_and_bindings():
    t = build_kpi_table(PLAN, _collected())
    assert t.complete
    b = table_to_bindings(t)
    assert b == {"N_p": Interval(10, 10), "A_p": Interval(7, 9), "r_s": Interval(3.8, 4.4)}
    assert nominal_bindings(t) == {"N_p": 10.0, "A_p": 8.0, "r_s": pytest.approx(4.1)}


def test_build_table_incomplete():
    t = build_kpi_table(PLAN, _collected()[:2])
    assert not t.complete
    with pytest.raises(TableError, match="likert-security"):
        table_to_bindings(t)


def test_build_table_last_write_wins():
    rows = _collected() + [KpiValue("n-priv-concerns", 12.0, "count", "user-provided", "12")]
    t = build_kpi_table(PLAN, rows)
    val = dict((k.id, v) for k, v in t.rows)["n-priv-concerns"]
    assert val.value == 12.0
    assert "supersedes: 10" in val.raw_text


def test_build_table_unknown_id():
    with pytest.raises(TableError, match="unknown kpi_id"):
        build_kpi_table(PLAN, [KpiValue("nope", 1.0, "count", "user-provided", "1")])


def test_table_json_round_trip():
    t = build_kpi_table(PLAN, _collected())
    doc = table_to_json(t)
    again = table_from_json(doc, PLAN)
    assert again == t
    # canonical form is stable
    assert table_to_json(again) == doc


def test_table_from_json_rejects_bad_provenance():
    doc = table_to_json(build_kpi_table(PLAN, _collected())).replace(
        "user-provided", "hearsay"
    )
    with pytest.raises(TableError, match="provenance"):
        table_from_json(doc, PLAN)
