"""Temporal ordering, chain assembly and decision-boundary detection.

All three stages are linear in the number of fragments and pure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from tracerecon.errors import NoDecisionEvent
from tracerecon.model import DecisionUnit, Fragment, FragmentKind

DEFAULT_STATE_MUTATION_REGEX = r"(?i)\b(DROP|DELETE|TRUNCATE|UPDATE|INSERT|ALTER|CREATE|GRANT|REVOKE)\b"

_PROMPT_KINDS = (FragmentKind.AGENT_MESSAGE, FragmentKind.MODEL_GENERATION)


@dataclass(frozen=True)
class PipelineConfig:
    single_agent: bool = True
    within_stack_tier: int = 1
    state_mutation_regex: str = DEFAULT_STATE_MUTATION_REGEX

    def __post_init__(self) -> None:
        if not isinstance(self.within_stack_tier, int) or self.within_stack_tier < 1:
            raise ValueError(f"within_stack_tier must be a positive integer, got {self.within_stack_tier!r}")
        try:
            re.compile(self.state_mutation_regex)
        except re.error as exc:
            raise ValueError(f"state_mutation_regex does not compile: {exc}") from exc

    def cli_flags(self) -> list[str]:
        return [
            "--single-agent",
            "true" if self.single_agent else "false",
            "--within-stack-tier",
            str(self.within_stack_tier),
            "--state-mutation-regex",
            self.state_mutation_regex,
        ]


@dataclass(frozen=True)
class Link:
    """``source`` (a tool_call or state_mutation) points back at ``target``."""

    source: str
    target: str
    relation: str  # "motivated_by" | "effect_of"


@dataclass(frozen=True)
class Chain:
    links: tuple[Link, ...]
    mutating: frozenset[str]

    def target_of(self, source: str, relation: str) -> str | None:
        for link in self.links:
            if link.source == source and link.relation == relation:
                return link.target
        return None


def order_fragments(fragments: Iterable[Fragment]) -> list[Fragment]:
    """Sort by (timestamp, ordinal) when every fragment is timestamped, else by ordinal."""
    by_ordinal = sorted(fragments, key=lambda f: f.ordinal)
    if by_ordinal and all(f.timestamp for f in by_ordinal):
        return sorted(by_ordinal, key=lambda f: (f.timestamp, f.ordinal))
    return by_ordinal


def assemble_chain(ordered: Sequence[Fragment], config: PipelineConfig = PipelineConfig()) -> Chain:
    if not config.single_agent:
        raise NotImplementedError("multi-agent chain assembly is not supported")
    pattern = re.compile(config.state_mutation_regex)
    kinds = {f.id: f.kind for f in ordered}
    links: list[Link] = []
    mutating: set[str] = set()
    last_prompt: str | None = None
    last_tool_call: str | None = None
    for frag in ordered:
        if frag.kind in _PROMPT_KINDS:
            last_prompt = frag.id
        elif frag.kind is FragmentKind.TOOL_CALL:
            if last_prompt is not None:
                links.append(Link(frag.id, last_prompt, "motivated_by"))
            if pattern.search(json.dumps(dict(frag.payload), sort_keys=True)):
                mutating.add(frag.id)
            last_tool_call = frag.id
        elif frag.kind is FragmentKind.STATE_MUTATION:
            explicit = next((r for r in frag.refs if kinds.get(r) is FragmentKind.TOOL_CALL), None)
            target = explicit or last_tool_call
            if target is not None:
                links.append(Link(frag.id, target, "effect_of"))
    return Chain(tuple(links), frozenset(mutating))


def detect_boundaries(
    ordered: Sequence[Fragment], chain: Chain, config: PipelineConfig = PipelineConfig()
) -> list[DecisionUnit]:
    """Group fragments into decision units, one per tool call at tier 1.

    Each tool call claims its linked state mutation and upstream prompt. Every
    other fragment joins the first unit whose span (tool call through its state
    mutation) ends at or after it; fragments before the first unit attach to
    it, fragments after the last unit attach to the last. At tier k, k
    adjacent units merge.
    """
    if not config.single_agent:
        raise NotImplementedError("multi-agent boundary detection is not supported")
    position = {f.id: i for i, f in enumerate(ordered)}
    tool_calls = [f.id for f in ordered if f.kind is FragmentKind.TOOL_CALL]
    if not tool_calls:
        raise NoDecisionEvent("anchor holds no tool_call fragment")

    effect_of_call: dict[str, str] = {}
    motivated_by: dict[str, str] = {}
    for link in chain.links:
        if link.relation == "effect_of":
            effect_of_call.setdefault(link.target, link.source)
        else:
            motivated_by[link.source] = link.target

    owner: dict[str, int] = {}
    ends: list[int] = []
    for index, call in enumerate(tool_calls):
        owner[call] = index
        mutation = effect_of_call.get(call)
        prompt = motivated_by.get(call)
        for member in (mutation, prompt):
            if member is not None and member not in owner:
                owner[member] = index
        end = max(position[call], position[mutation]) if mutation else position[call]
        ends.append(max(end, ends[-1]) if ends else end)

    unit = 0
    for frag in ordered:
        if frag.id in owner:
            continue
        while unit < len(ends) - 1 and position[frag.id] > ends[unit]:
            unit += 1
        owner[frag.id] = unit

    k = config.within_stack_tier
    groups: list[list[str]] = [[] for _ in range(0, len(tool_calls), k)]
    for frag in ordered:
        groups[owner[frag.id] // k].append(frag.id)
    units = []
    for group_index, members in enumerate(groups):
        anchor = tool_calls[group_index * k]
        units.append(
            DecisionUnit(
                unit_id=f"unit-{group_index:03d}",
                fragment_ids=tuple(members),
                anchor_tool_call=anchor,
                anchor_state_mutation=effect_of_call.get(anchor),
                upstream_prompt=motivated_by.get(anchor),
            )
        )
    return units
