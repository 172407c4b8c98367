"""Map decision units onto the seven DES properties and emit feasibility.json.

The per-property rules:

* inputs: F for exactly one complete input message, P when the input is
  split over several ref-linked messages or flagged incomplete, S for none.
* policy_basis: F when a policy_snapshot is in the unit.
* operator_identity: F when any fragment in the unit carries an attribution.
* authorization_envelope: F when a config_snapshot or human_approval is bound.
* reasoning_trace: F for an inspectable model_generation with deliberation
  text, O when model_generation fragments exist but none qualifies, S for none.
* output_action: F when the tool call has a name and an argument payload,
  P when one is missing.
* post_condition_state: F for a state_mutation with before+after or an
  effect field, P for a state_mutation lacking those, S for none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Any, Mapping, Sequence

from tracerecon import __version__
from tracerecon.model import (
    Category,
    DecisionUnit,
    Fragment,
    FragmentKind,
    PropertyClass,
    canonical_json,
    load_json,
    round_half_away,
    score_of,
)
from tracerecon.pipeline import Chain, PipelineConfig

F, P, S, O = (
    Category.FULLY_FILLABLE,
    Category.PARTIALLY_FILLABLE,
    Category.STRUCTURALLY_UNFILLABLE,
    Category.OPAQUE,
)

GAP_TEMPLATES: dict[tuple[PropertyClass, Category], str] = {
    (PropertyClass.INPUTS, P): "input evidence is split across several message fragments or marked incomplete",
    (PropertyClass.INPUTS, S): "no agent_message fragment supplies the decision input",
    (PropertyClass.POLICY_BASIS, S): "no policy_snapshot fragment is bound to the decision unit",
    (PropertyClass.OPERATOR_IDENTITY, S): "no fragment in the decision unit carries an attribution principal",
    (PropertyClass.AUTHORIZATION_ENVELOPE, S): (
        "no config_snapshot or human_approval fragment binds the authorization envelope"
    ),
    (PropertyClass.REASONING_TRACE, O): (
        "model generation is present but its deliberation is not externally inspectable"
    ),
    (PropertyClass.REASONING_TRACE, S): "no model_generation fragment exists in the decision unit",
    (PropertyClass.OUTPUT_ACTION, P): "the tool_call lacks a tool name or an argument payload",
    (PropertyClass.OUTPUT_ACTION, S): "no tool_call fragment exists in the decision unit",
    (PropertyClass.POST_CONDITION_STATE, P): "the state_mutation lacks a before-state or after-state record",
    (PropertyClass.POST_CONDITION_STATE, S): "no state_mutation fragment records the effect of the action",
}

# worst first, for the multi-unit roll-up
_SEVERITY = {S: 3, O: 2, P: 1, F: 0}


def gap_description(prop: PropertyClass, category: Category) -> str:
    if category is F:
        return ""
    return GAP_TEMPLATES.get((prop, category), f"{prop.label} is {category.value}")


@dataclass(frozen=True)
class PropertyFinding:
    property: PropertyClass
    category: Category
    gap_description: str
    evidence_fragment_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (self.category is S) != (not self.evidence_fragment_ids):
            raise ValueError(f"{self.property.value}: evidence must be empty exactly when category is S")
        if (self.category is F) != (not self.gap_description):
            raise ValueError(f"{self.property.value}: gap description must be empty exactly when category is F")

    def to_dict(self) -> dict[str, Any]:
        return {
            "property": self.property.value,
            "category": self.category.value,
            "code": self.category.code,
            "gap_description": self.gap_description,
            "evidence_fragment_ids": list(self.evidence_fragment_ids),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PropertyFinding":
        return cls(
            property=PropertyClass(data["property"]),
            category=Category(data["category"]),
            gap_description=data["gap_description"],
            evidence_fragment_ids=tuple(data["evidence_fragment_ids"]),
        )


def _finding(prop: PropertyClass, category: Category, evidence: Sequence[Fragment] = ()) -> PropertyFinding:
    ids = () if category is S else tuple(f.id for f in evidence)
    return PropertyFinding(prop, category, gap_description(prop, category), ids)


def _complete_message(frag: Fragment) -> bool:
    return bool(frag.payload.get("content")) and frag.payload.get("complete", True) is not False


def _complete_effect(frag: Fragment) -> bool:
    payload = frag.payload
    return ("before" in payload and "after" in payload) or bool(payload.get("effect"))


def _input_messages(unit: DecisionUnit, members: list[Fragment], by_id: Mapping[str, Fragment]) -> list[Fragment]:
    """The agent_message that motivated the action, plus messages ref-linked to it."""
    index_of = {fid: i for i, fid in enumerate(unit.fragment_ids)}
    call_index = index_of[unit.anchor_tool_call]
    messages = [f for f in members if f.kind is FragmentKind.AGENT_MESSAGE]
    start = unit.upstream_prompt
    # the prompt may belong to an earlier unit when two calls share it
    if start not in index_of or by_id[start].kind is not FragmentKind.AGENT_MESSAGE:
        preceding = [f for f in messages if index_of[f.id] < call_index]
        if not preceding:
            return []
        start = preceding[-1].id
    neighbours: dict[str, set[str]] = {f.id: set() for f in messages}
    for frag in messages:
        for ref in frag.refs:
            if ref in neighbours:
                neighbours[frag.id].add(ref)
                neighbours[ref].add(frag.id)
    seen, stack = {start}, [start]
    while stack:
        for other in neighbours[stack.pop()] - seen:
            seen.add(other)
            stack.append(other)
    return [f for f in messages if f.id in seen]


def classify(unit: DecisionUnit, fragments: Sequence[Fragment] | Mapping[str, Fragment]) -> list[PropertyFinding]:
    by_id = fragments if isinstance(fragments, Mapping) else {f.id: f for f in fragments}
    members = [by_id[fid] for fid in unit.fragment_ids]

    def of(*kinds: FragmentKind) -> list[Fragment]:
        return [f for f in members if f.kind in kinds]

    findings = []

    inputs = _input_messages(unit, members, by_id)
    if not inputs:
        findings.append(_finding(PropertyClass.INPUTS, S))
    elif len(inputs) == 1 and _complete_message(inputs[0]):
        findings.append(_finding(PropertyClass.INPUTS, F, inputs))
    else:
        findings.append(_finding(PropertyClass.INPUTS, P, inputs))

    policies = of(FragmentKind.POLICY_SNAPSHOT)
    findings.append(_finding(PropertyClass.POLICY_BASIS, F if policies else S, policies))

    attributed = [f for f in members if f.attribution]
    findings.append(_finding(PropertyClass.OPERATOR_IDENTITY, F if attributed else S, attributed))

    envelope = of(FragmentKind.CONFIG_SNAPSHOT, FragmentKind.HUMAN_APPROVAL)
    findings.append(_finding(PropertyClass.AUTHORIZATION_ENVELOPE, F if envelope else S, envelope))

    generations = of(FragmentKind.MODEL_GENERATION)
    readable = [g for g in generations if g.inspectable and g.payload.get("deliberation")]
    if readable:
        findings.append(_finding(PropertyClass.REASONING_TRACE, F, readable))
    elif generations:
        findings.append(_finding(PropertyClass.REASONING_TRACE, O, generations))
    else:
        findings.append(_finding(PropertyClass.REASONING_TRACE, S))

    action = by_id[unit.anchor_tool_call]
    has_name = bool(action.payload.get("name"))
    has_args = action.payload.get("arguments") not in (None, "", {}, [])
    findings.append(_finding(PropertyClass.OUTPUT_ACTION, F if has_name and has_args else P, [action]))

    mutations = of(FragmentKind.STATE_MUTATION)
    complete = [m for m in mutations if _complete_effect(m)]
    if complete:
        findings.append(_finding(PropertyClass.POST_CONDITION_STATE, F, complete))
    elif mutations:
        findings.append(_finding(PropertyClass.POST_CONDITION_STATE, P, mutations))
    else:
        findings.append(_finding(PropertyClass.POST_CONDITION_STATE, S))
    return findings


def completeness_pct(findings: Sequence[PropertyFinding]) -> Decimal:
    """Mean strict score over the seven properties, as a percentage at one decimal."""
    if len(findings) != len(PropertyClass):
        raise ValueError(f"expected {len(PropertyClass)} findings, got {len(findings)}")
    total = sum(Fraction(score_of(f.category)) for f in findings)
    return round_half_away(total * 100 / len(PropertyClass), 1)


def roll_up(per_unit: Sequence[Sequence[PropertyFinding]]) -> list[PropertyFinding]:
    """Worst category per property across units (experimental; fixtures have one unit)."""
    if len(per_unit) == 1:
        return list(per_unit[0])
    merged = []
    for index, prop in enumerate(PropertyClass):
        column = [findings[index] for findings in per_unit]
        worst = max((f.category for f in column), key=_SEVERITY.__getitem__)
        evidence: list[str] = []
        for finding in column:
            if finding.category is worst:
                evidence.extend(e for e in finding.evidence_fragment_ids if e not in evidence)
        merged.append(PropertyFinding(prop, worst, gap_description(prop, worst), tuple(evidence)))
    return merged


@dataclass(frozen=True)
class FeasibilityReport:
    anchor_id: str
    regime: str
    adapter: str
    findings: tuple[PropertyFinding, ...]
    completeness_pct: Decimal
    tool_version: str = __version__
    units: tuple[Mapping[str, Any], ...] = ()
    unit_findings: Mapping[str, tuple[PropertyFinding, ...]] = field(default_factory=dict)
    config: Mapping[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        order = [f.property for f in self.findings]
        if order != list(PropertyClass):
            raise ValueError(f"report must hold the seven findings in canonical order, got {[p.value for p in order]}")
        if completeness_pct(self.findings) != self.completeness_pct:
            raise ValueError("completeness_pct disagrees with findings")

    def category_of(self, prop: PropertyClass) -> Category:
        return self.findings[list(PropertyClass).index(prop)].category

    def to_dict(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            "anchor_id": self.anchor_id,
            "regime": self.regime,
            "adapter": self.adapter,
            "tool_version": self.tool_version,
            "config": dict(self.config),
            "findings": [f.to_dict() for f in self.findings],
            "completeness_pct": float(self.completeness_pct),
            "units": [dict(u) for u in self.units],
        }
        if self.unit_findings:
            document["unit_findings"] = {
                uid: [f.to_dict() for f in fs] for uid, fs in self.unit_findings.items()
            }
            document["rollup"] = "worst-category (experimental)"
        return document

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FeasibilityReport":
        report = cls(
            anchor_id=data["anchor_id"],
            regime=data["regime"],
            adapter=data["adapter"],
            findings=tuple(PropertyFinding.from_dict(f) for f in data["findings"]),
            completeness_pct=round_half_away(Fraction(str(data["completeness_pct"])), 1),
            tool_version=data.get("tool_version", __version__),
            units=tuple(data.get("units", ())),
            unit_findings={
                uid: tuple(PropertyFinding.from_dict(f) for f in fs)
                for uid, fs in (data.get("unit_findings") or {}).items()
            },
            config=data.get("config") or {},
        )
        report.validate()
        return report

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FeasibilityReport":
        return cls.from_dict(load_json(raw, "feasibility report"))


def build_report(
    anchor_id: str,
    regime: str,
    adapter: str,
    units: Sequence[DecisionUnit],
    fragments: Sequence[Fragment],
    chain: Chain,
    config: PipelineConfig = PipelineConfig(),
) -> FeasibilityReport:
    by_id = {f.id: f for f in fragments}
    per_unit = [classify(unit, by_id) for unit in units]
    findings = roll_up(per_unit)
    unit_docs = tuple(
        {**unit.to_dict(), "mutating": unit.anchor_tool_call in chain.mutating} for unit in units
    )
    return FeasibilityReport(
        anchor_id=anchor_id,
        regime=regime,
        adapter=adapter,
        findings=tuple(findings),
        completeness_pct=completeness_pct(findings),
        units=unit_docs,
        unit_findings={u.unit_id: tuple(fs) for u, fs in zip(units, per_unit)} if len(units) > 1 else {},
        config={
            "single_agent": config.single_agent,
            "within_stack_tier": config.within_stack_tier,
            "state_mutation_regex": config.state_mutation_regex,
        },
    )


def emit_report(report: FeasibilityReport) -> bytes:
    report.validate()
    return canonical_json(report.to_dict())
