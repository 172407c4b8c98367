"""PROV-O provenance graph for one anchor, serialized as JSON-LD.

Nodes: one ``prov:Entity`` per fragment, one ``prov:Activity`` per decision
unit, one ``prov:Agent`` per distinct attribution principal. Edges:

* action entity ``wasGeneratedBy`` its unit activity;
* action entity ``wasDerivedFrom`` each evidence fragment of an F/P finding
  (inputs, policy basis, authorization envelope, reasoning trace);
* state-mutation evidence ``wasDerivedFrom`` the action it records;
* action entity, and every attributed fragment, ``wasAttributedTo`` the
  principal's agent when operator identity is F/P.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping, Sequence
from urllib.parse import quote

from tracerecon.errors import UnknownPattern
from tracerecon.feasibility import PropertyFinding
from tracerecon.model import Category, DecisionUnit, Fragment, FragmentKind, PropertyClass, canonical_json, load_json

GENERATED_BY = "wasGeneratedBy"
DERIVED_FROM = "wasDerivedFrom"
ATTRIBUTED_TO = "wasAttributedTo"
RELATIONS = (GENERATED_BY, DERIVED_FROM, ATTRIBUTED_TO)

VOCAB = "urn:tracerecon:vocab#"
CONTEXT: dict[str, Any] = {
    "prov": "http://www.w3.org/ns/prov#",
    "dtr": VOCAB,
    "entity": "urn:tracerecon:entity:",
    "activity": "urn:tracerecon:activity:",
    "agent": "urn:tracerecon:agent:",
    GENERATED_BY: {"@id": "prov:wasGeneratedBy", "@type": "@id"},
    DERIVED_FROM: {"@id": "prov:wasDerivedFrom", "@type": "@id"},
    ATTRIBUTED_TO: {"@id": "prov:wasAttributedTo", "@type": "@id"},
    "fragmentId": "dtr:fragmentId",
    "fragmentKind": "dtr:fragmentKind",
    "inspectable": "dtr:inspectable",
    "unitId": "dtr:unitId",
    "principal": "dtr:principal",
    "anchorId": "dtr:anchorId",
}

PATTERNS = ("action_to_authorizer", "action_to_policy", "action_to_operator")

_EVIDENCE_KINDS = {
    "action_to_authorizer": {FragmentKind.CONFIG_SNAPSHOT.value, FragmentKind.HUMAN_APPROVAL.value},
    "action_to_policy": {FragmentKind.POLICY_SNAPSHOT.value},
}
_DERIVED_PROPERTIES = {
    PropertyClass.INPUTS,
    PropertyClass.POLICY_BASIS,
    PropertyClass.AUTHORIZATION_ENVELOPE,
    PropertyClass.REASONING_TRACE,
}
_BOUND = {Category.FULLY_FILLABLE, Category.PARTIALLY_FILLABLE}
_SAFE = "-._~:@!$&'()*+,;="


def entity_id(fragment_id: str) -> str:
    return "entity:" + quote(fragment_id, safe=_SAFE)


def activity_id(unit_id: str) -> str:
    return "activity:" + quote(unit_id, safe=_SAFE)


def agent_id(principal: str) -> str:
    return "agent:" + quote(principal, safe=_SAFE)


@dataclass(frozen=True)
class ProvGraph:
    anchor_id: str
    entities: Mapping[str, Mapping[str, Any]]
    activities: Mapping[str, Mapping[str, Any]]
    agents: Mapping[str, Mapping[str, Any]]
    edges: tuple[tuple[str, str, str], ...]  # (source, relation, target), sorted

    @property
    def node_count(self) -> int:
        return len(self.entities) + len(self.activities) + len(self.agents)

    def validate(self) -> None:
        nodes = set(self.entities) | set(self.activities) | set(self.agents)
        for source, relation, target in self.edges:
            if relation not in RELATIONS:
                raise ValueError(f"unknown relation {relation!r}")
            if source not in nodes or target not in nodes:
                raise ValueError(f"dangling edge {source} {relation} {target}")
        generated: dict[str, int] = {}
        for source, relation, _ in self.edges:
            if relation == GENERATED_BY:
                generated[source] = generated.get(source, 0) + 1
        for action, count in generated.items():
            if count != 1:
                raise ValueError(f"{action} has {count} wasGeneratedBy edges")

    def actions(self) -> list[str]:
        return sorted({s for s, r, _ in self.edges if r == GENERATED_BY})


def build_graph(
    units: Sequence[DecisionUnit],
    fragments: Sequence[Fragment],
    findings: Mapping[str, Sequence[PropertyFinding]],
    anchor_id: str = "",
) -> ProvGraph:
    """Build the graph; ``findings`` maps unit_id to that unit's seven findings."""
    by_id = {f.id: f for f in fragments}
    entities = {
        entity_id(f.id): {"fragmentId": f.id, "fragmentKind": f.kind.value, "inspectable": f.inspectable}
        for f in fragments
    }
    agents = {agent_id(f.attribution): {"principal": f.attribution} for f in fragments if f.attribution}
    activities = {activity_id(u.unit_id): {"unitId": u.unit_id} for u in units}
    edges: set[tuple[str, str, str]] = set()
    for unit in units:
        action = entity_id(unit.anchor_tool_call)
        edges.add((action, GENERATED_BY, activity_id(unit.unit_id)))
        for finding in findings.get(unit.unit_id, ()):
            if finding.category not in _BOUND:
                continue
            evidence = [fid for fid in finding.evidence_fragment_ids if fid != unit.anchor_tool_call]
            if finding.property in _DERIVED_PROPERTIES:
                edges.update((action, DERIVED_FROM, entity_id(fid)) for fid in evidence)
            elif finding.property is PropertyClass.POST_CONDITION_STATE:
                edges.update((entity_id(fid), DERIVED_FROM, action) for fid in evidence)
            elif finding.property is PropertyClass.OPERATOR_IDENTITY:
                for fid in finding.evidence_fragment_ids:
                    principal = agent_id(by_id[fid].attribution)
                    edges.add((action, ATTRIBUTED_TO, principal))
                    edges.add((entity_id(fid), ATTRIBUTED_TO, principal))
    graph = ProvGraph(anchor_id, entities, activities, agents, tuple(sorted(edges)))
    graph.validate()
    return graph


def query(graph: ProvGraph, pattern: str) -> list[str]:
    """Answer one of the canned evidence queries; node ids sorted."""
    if pattern not in PATTERNS:
        raise UnknownPattern(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    actions = set(graph.actions())
    if pattern == "action_to_operator":
        hits = {t for s, r, t in graph.edges if r == ATTRIBUTED_TO and s in actions}
    else:
        wanted = _EVIDENCE_KINDS[pattern]
        hits = {
            t
            for s, r, t in graph.edges
            if r == DERIVED_FROM and s in actions and graph.entities.get(t, {}).get("fragmentKind") in wanted
        }
    return sorted(hits)


def to_jsonld(graph: ProvGraph) -> dict[str, Any]:
    outgoing: dict[str, dict[str, list[str]]] = {}
    for source, relation, target in graph.edges:
        outgoing.setdefault(source, {}).setdefault(relation, []).append(target)
    nodes = []
    for prov_type, table in (("prov:Entity", graph.entities), ("prov:Activity", graph.activities), ("prov:Agent", graph.agents)):
        for node_id, attrs in table.items():
            node = {"@id": node_id, "@type": prov_type, **attrs}
            for relation, targets in outgoing.get(node_id, {}).items():
                node[relation] = sorted(targets)
            nodes.append(node)
    nodes.sort(key=lambda n: n["@id"])
    return {"@context": CONTEXT, "anchorId": graph.anchor_id, "@graph": nodes}


def serialize_jsonld(graph: ProvGraph) -> bytes:
    graph.validate()
    return canonical_json(to_jsonld(graph))


def load_jsonld(raw: bytes) -> ProvGraph:
    """Read back a trace.jsonld written by :func:`serialize_jsonld`."""
    document = load_json(raw, "trace.jsonld")
    tables: dict[str, dict[str, dict]] = {"prov:Entity": {}, "prov:Activity": {}, "prov:Agent": {}}
    edges = []
    for node in document.get("@graph", []):
        attrs = {k: v for k, v in node.items() if not k.startswith("@") and k not in RELATIONS}
        tables[node["@type"]][node["@id"]] = attrs
        for relation in RELATIONS:
            edges.extend((node["@id"], relation, t) for t in node.get(relation, []))
    graph = ProvGraph(
        anchor_id=document.get("anchorId", ""),
        entities=tables["prov:Entity"],
        activities=tables["prov:Activity"],
        agents=tables["prov:Agent"],
        edges=tuple(sorted(edges)),
    )
    graph.validate()
    return graph


def sparql_text(pattern: str) -> str:
    """The SPARQL rendering of a canned query, for external triple stores."""
    if pattern not in PATTERNS:
        raise UnknownPattern(pattern)
    return resources.files("tracerecon.queries").joinpath(f"{pattern}.rq").read_text(encoding="utf-8")
