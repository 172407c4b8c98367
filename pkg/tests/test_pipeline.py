from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import REPO, frag
from tracerecon.adapters import MappingConfig, ingest, load_replit_manifest
from tracerecon.errors import NoDecisionEvent
from tracerecon.model import FragmentKind
from tracerecon.pipeline import PipelineConfig, assemble_chain, detect_boundaries, order_fragments

TS = "2026-04-28T10:00:0{}.000Z"


def run(fragments, config=PipelineConfig()):
    ordered = order_fragments(fragments)
    chain = assemble_chain(ordered, config)
    return ordered, chain, detect_boundaries(ordered, chain, config)


def all_fixtures():
    for regime in ("bedrock", "langsmith", "anthropic", "openai_agents", "otlp", "mcp"):
        yield ingest(regime, (REPO / "fixtures" / regime / "anchor.json").read_bytes()).fragments
    mapping = MappingConfig.from_bytes((REPO / "fixtures/oep/mapping.json").read_bytes())
    yield ingest("generic_jsonl", (REPO / "fixtures/oep/anchor.jsonl").read_bytes(), mapping).fragments
    yield load_replit_manifest((REPO / "fixtures/replit/manifest.json").read_bytes()).fragments


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(within_stack_tier=0)
    with pytest.raises(ValueError):
        PipelineConfig(state_mutation_regex="(")
    assert PipelineConfig().cli_flags()[:4] == ["--single-agent", "true", "--within-stack-tier", "1"]


def test_equal_instants_tie_break_by_ordinal():
    fs = [frag("b", "agent_message", 0, timestamp=TS.format(5)), frag("a", "tool_call", 1, timestamp=TS.format(5))]
    assert [f.id for f in order_fragments(reversed(fs))] == ["b", "a"]


def test_one_missing_timestamp_falls_back_to_ordinal():
    fs = [
        frag("x", "agent_message", 0, timestamp=TS.format(9)),
        frag("y", "tool_call", 1),
        frag("z", "state_mutation", 2, timestamp=TS.format(1)),
    ]
    assert [f.id for f in order_fragments(fs)] == ["x", "y", "z"]


def test_timestamps_reorder_langsmith_fixture():
    fragments = ingest("langsmith", (REPO / "fixtures/langsmith/anchor.json").read_bytes()).fragments
    ordered = order_fragments(fragments)
    assert [f.kind.value for f in ordered] == [
        "agent_message",
        "policy_snapshot",
        "config_snapshot",
        "model_generation",
        "tool_call",
    ]
    assert [f.ordinal for f in ordered] != list(range(len(ordered)))


def test_replit_chain():
    fragments = load_replit_manifest((REPO / "fixtures/replit/manifest.json").read_bytes()).fragments
    chain = assemble_chain(order_fragments(fragments))
    assert chain.target_of("replit_f002", "motivated_by") == "replit_f001"
    assert chain.target_of("replit_f003", "effect_of") == "replit_f002"
    assert chain.mutating == {"replit_f002"}


def test_orphan_tool_call_has_no_upstream():
    chain = assemble_chain([frag("t", "tool_call", 0)])
    assert chain.target_of("t", "motivated_by") is None


def test_explicit_ref_beats_nearest_tool_call():
    fs = [
        frag("t1", "tool_call", 0),
        frag("t2", "tool_call", 1),
        frag("m", "state_mutation", 2, refs=("t1",)),
    ]
    assert assemble_chain(fs).target_of("m", "effect_of") == "t1"
    fs[2] = frag("m", "state_mutation", 2)
    assert assemble_chain(fs).target_of("m", "effect_of") == "t2"


def test_mutation_regex_is_configurable():
    fs = [frag("t", "tool_call", 0, payload={"arguments": {"sql": "select 1"}})]
    assert assemble_chain(fs).mutating == frozenset()
    assert assemble_chain(fs, PipelineConfig(state_mutation_regex="select")).mutating == {"t"}


def test_single_agent_false_is_rejected():
    with pytest.raises(NotImplementedError):
        assemble_chain([], PipelineConfig(single_agent=False))


def test_every_fixture_yields_one_unit():
    for fragments in all_fixtures():
        units = run(fragments)[2]
        assert len(units) == 1
        assert set(units[0].fragment_ids) == {f.id for f in fragments}


def test_only_messages_is_no_decision_event():
    fs = [frag("a", "agent_message", 0), frag("b", "agent_message", 1)]
    with pytest.raises(NoDecisionEvent):
        run(fs)


def two_pair_anchor():
    return [
        frag("cfg", "config_snapshot", 0),
        frag("m1", "agent_message", 1),
        frag("t1", "tool_call", 2),
        frag("s1", "state_mutation", 3),
        frag("pol", "policy_snapshot", 4),
        frag("m2", "agent_message", 5),
        frag("t2", "tool_call", 6),
        frag("s2", "state_mutation", 7),
        frag("tail", "human_approval", 8),
    ]


def test_tier_merges_adjacent_units():
    units = run(two_pair_anchor())[2]
    assert [u.unit_id for u in units] == ["unit-000", "unit-001"]
    assert units[0].fragment_ids == ("cfg", "m1", "t1", "s1")
    assert units[1].fragment_ids == ("pol", "m2", "t2", "s2", "tail")
    assert (units[1].anchor_tool_call, units[1].anchor_state_mutation, units[1].upstream_prompt) == ("t2", "s2", "m2")
    merged = run(two_pair_anchor(), PipelineConfig(within_stack_tier=2))[2]
    assert len(merged) == 1
    assert merged[0].fragment_ids == tuple(f.id for f in two_pair_anchor())
    assert merged[0].anchor_tool_call == "t1"


@st.composite
def anchors(draw):
    n = draw(st.integers(1, 30))
    fs = []
    for i in range(n):
        kind = draw(st.sampled_from(list(FragmentKind)))
        refs = ()
        if i and draw(st.booleans()):
            refs = (f"f{draw(st.integers(0, i - 1))}",)
        stamp = draw(st.none() | st.integers(0, 5).map(TS.format))
        fs.append(frag(f"f{i}", kind, i, timestamp=stamp, refs=refs))
    return draw(st.permutations(fs))


@given(anchors(), st.integers(1, 4))
def test_pipeline_properties(fragments, k):
    ordered = order_fragments(fragments)
    assert sorted(f.id for f in ordered) == sorted(f.id for f in fragments)
    assert order_fragments(fragments) == ordered
    calls = [f.id for f in fragments if f.kind is FragmentKind.TOOL_CALL]
    config = PipelineConfig(within_stack_tier=k)
    chain = assemble_chain(ordered, config)
    if not calls:
        with pytest.raises(NoDecisionEvent):
            detect_boundaries(ordered, chain, config)
        return
    units = detect_boundaries(ordered, chain, config)
    assert len(units) == -(-len(calls) // k)
    seen = [fid for u in units for fid in u.fragment_ids]
    assert len(seen) == len(set(seen))
    for call in calls:
        assert sum(call in u.fragment_ids for u in units) == 1
    position = {f.id: i for i, f in enumerate(ordered)}
    for unit in units:
        assert unit.anchor_tool_call in unit.fragment_ids
        if unit.upstream_prompt:
            assert position[unit.upstream_prompt] < position[unit.anchor_tool_call]
