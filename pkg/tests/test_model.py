from __future__ import annotations

import json
from datetime import datetime
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import frag
from tracerecon.errors import MalformedInput
from tracerecon.model import (
    MAX_FRAGMENTS,
    Category,
    DecisionUnit,
    Fragment,
    FragmentKind,
    FragmentsFile,
    PropertyClass,
    canonical_json,
    load_json,
    normalize_timestamp,
    round_half_away,
    score_of,
    timestamp_from_unix_nanos,
)


def test_vocabulary_is_closed_and_ordered():
    assert [k.value for k in FragmentKind] == [
        "config_snapshot",
        "policy_snapshot",
        "agent_message",
        "tool_call",
        "state_mutation",
        "human_approval",
        "model_generation",
    ]
    assert [p.value for p in PropertyClass] == [
        "inputs",
        "policy_basis",
        "operator_identity",
        "authorization_envelope",
        "reasoning_trace",
        "output_action",
        "post_condition_state",
    ]


@pytest.mark.parametrize(
    "category, score",
    [(Category.FULLY_FILLABLE, 1.0), (Category.PARTIALLY_FILLABLE, 0.5), (Category.OPAQUE, 0.0), (Category.STRUCTURALLY_UNFILLABLE, 0.0)],
)
def test_score_of(category, score):
    assert score_of(category) == score
    assert category.score == score


def test_category_codes_round_trip():
    for category in Category:
        assert Category.from_code(category.code) is category
    with pytest.raises(ValueError):
        Category.from_code("X")


@pytest.mark.parametrize(
    "value, places, expected",
    [
        (Fraction(600, 7), 1, "85.7"),
        (Fraction(500, 7), 1, "71.4"),
        (Fraction(300, 7), 1, "42.9"),
        (Fraction(11, 12), 2, "0.92"),
        (Fraction(1, 8), 2, "0.13"),  # exact half goes away from zero
        (Fraction(-1, 8), 2, "-0.13"),
        (0, 1, "0.0"),
    ],
)
def test_round_half_away(value, places, expected):
    assert round_half_away(value, places) == Decimal(expected)
    assert str(round_half_away(value, places)) == expected


def test_canonical_json_layout():
    out = canonical_json({"b": 1, "a": "ü"})
    assert out == '{\n  "a": "ü",\n  "b": 1\n}\n'.encode("utf-8")


def test_load_json_reports_byte_offset():
    with pytest.raises(MalformedInput) as info:
        load_json('{"é": }'.encode("utf-8"))
    # '}' sits after a two-byte character
    assert info.value.offset == 7
    assert "byte offset 7" in str(info.value)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("2026-04-28T10:00:00Z", "2026-04-28T10:00:00.000Z"),
        ("2026-04-28T10:00:00.123456", "2026-04-28T10:00:00.123Z"),
        ("2026-04-28T12:00:00.5+02:00", "2026-04-28T10:00:00.500Z"),
        ("2026-04-28 10:00:00.999999-0130", "2026-04-28T11:30:00.999Z"),
    ],
)
def test_normalize_timestamp(raw, expected):
    assert normalize_timestamp(raw) == expected


def test_normalize_timestamp_rejects_garbage():
    with pytest.raises(MalformedInput):
        normalize_timestamp("yesterday")


def test_timestamp_from_nanos():
    assert timestamp_from_unix_nanos("1777370400100999999") == "2026-04-28T10:00:00.100Z"


def test_fragments_file_invariants():
    a = frag("a", "agent_message", 0)
    with pytest.raises(MalformedInput, match="duplicate"):
        FragmentsFile("x", "t", "none", (a, frag("a", "tool_call", 1)))
    with pytest.raises(MalformedInput, match="contiguous"):
        FragmentsFile("x", "t", "none", (a, frag("b", "tool_call", 2)))
    with pytest.raises(MalformedInput, match="later"):
        FragmentsFile("x", "t", "none", (frag("a", "agent_message", 0, refs=("b",)), frag("b", "tool_call", 1)))
    with pytest.raises(MalformedInput, match="unknown"):
        FragmentsFile("x", "t", "none", (frag("a", "agent_message", 0, refs=("zz",)),))
    many = tuple(frag(f"f{i}", "agent_message", i) for i in range(MAX_FRAGMENTS + 1))
    with pytest.raises(MalformedInput, match="cap"):
        FragmentsFile("x", "t", "none", many)
    FragmentsFile("x", "t", "none", many[:MAX_FRAGMENTS])


def test_fragment_from_dict_errors():
    with pytest.raises(MalformedInput):
        Fragment.from_dict({"id": "a", "kind": "span_event", "ordinal": 0, "regime": "t"})
    with pytest.raises(MalformedInput):
        Fragment.from_dict({"id": "a", "kind": "tool_call", "ordinal": -1, "regime": "t"})
    with pytest.raises(MalformedInput):
        Fragment.from_dict({"kind": "tool_call", "ordinal": 0, "regime": "t"})


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=5), inner, max_size=3),
    max_leaves=8,
)

timestamps = st.datetimes(min_value=datetime(1970, 1, 1), max_value=datetime(2100, 1, 1)).map(
    lambda d: normalize_timestamp(d.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z")
)


@st.composite
def fragment_lists(draw):
    n = draw(st.integers(1, 12))
    out = []
    for i in range(n):
        refs = draw(st.lists(st.sampled_from([f"id{j}" for j in range(i)]), unique=True, max_size=2)) if i else []
        out.append(
            Fragment(
                id=f"id{i}",
                kind=draw(st.sampled_from(list(FragmentKind))),
                ordinal=i,
                regime="t",
                payload=draw(st.dictionaries(st.text(max_size=6), json_values, max_size=3)),
                timestamp=draw(st.none() | timestamps),
                attribution=draw(st.none() | st.text(min_size=1, max_size=6)),
                inspectable=draw(st.booleans()),
                refs=tuple(refs),
            )
        )
    return out


@given(fragment_lists())
def test_fragments_file_round_trips(fragments):
    original = FragmentsFile("anchor", "t", "none", tuple(fragments))
    raw = original.to_bytes()
    again = FragmentsFile.from_bytes(raw)
    assert again == original
    assert again.to_bytes() == raw
    assert json.loads(raw) == original.to_dict()


@given(st.lists(st.text(min_size=1, max_size=4), min_size=1, max_size=5, unique=True), st.data())
def test_decision_unit_round_trips(ids, data):
    unit = DecisionUnit(
        unit_id="unit-000",
        fragment_ids=tuple(ids),
        anchor_tool_call=data.draw(st.sampled_from(ids)),
        anchor_state_mutation=data.draw(st.none() | st.sampled_from(ids)),
        upstream_prompt=data.draw(st.none() | st.sampled_from(ids)),
    )
    assert DecisionUnit.from_dict(json.loads(json.dumps(unit.to_dict()))) == unit


@given(st.sampled_from(list(Category)))
def test_category_round_trips_through_json(category):
    assert Category(json.loads(json.dumps(category.value))) is category
