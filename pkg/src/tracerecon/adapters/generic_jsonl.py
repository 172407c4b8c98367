"""Vendor-neutral JSONL records mapped to fragment kinds through a MappingConfig.

Each line holds one record object (or an array of record objects); lines are
LF-separated UTF-8 and the file must end with a newline.

A ``record_kind_map`` value is one of:

* a fragment kind name,
* a list of fragment kind names (the record fans out into several fragments),
* ``{"field": <payload key>, "cases": {<value>: <kind or list>}}`` to pick the
  kind from a record field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from tracerecon.adapters._common import FragmentStream
from tracerecon.errors import EmptyAnchor, MalformedInput, UnknownRecordKind
from tracerecon.model import FragmentKind, load_json

KindTargets = tuple[FragmentKind, ...]


@dataclass(frozen=True)
class CaseRule:
    field: str
    cases: Mapping[str, KindTargets]


@dataclass(frozen=True)
class MappingConfig:
    record_kind_map: Mapping[str, KindTargets | CaseRule]
    attribution_field: str | None = None
    timestamp_field: str | None = None
    inspectable_rule: Mapping[str, bool] = field(default_factory=dict)
    kind_field: str = "kind"
    id_field: str = "id"
    refs_field: str = "refs"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MappingConfig":
        if not isinstance(data, Mapping) or not isinstance(data.get("record_kind_map"), Mapping):
            raise MalformedInput("mapping config needs a 'record_kind_map' object")
        kind_map = {str(k): _parse_rule(k, v) for k, v in data["record_kind_map"].items()}
        inspectable = data.get("inspectable_rule") or {}
        for kind in inspectable:
            if kind not in kind_map:
                raise MalformedInput(f"inspectable_rule names unmapped record kind {kind!r}")
        return cls(
            record_kind_map=kind_map,
            attribution_field=data.get("attribution_field"),
            timestamp_field=data.get("timestamp_field"),
            inspectable_rule={str(k): bool(v) for k, v in inspectable.items()},
            kind_field=data.get("kind_field", "kind"),
            id_field=data.get("id_field", "id"),
            refs_field=data.get("refs_field", "refs"),
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MappingConfig":
        return cls.from_dict(load_json(raw, "mapping config"))

    def to_dict(self) -> dict[str, Any]:
        def rule(value: KindTargets | CaseRule) -> Any:
            if isinstance(value, CaseRule):
                return {"field": value.field, "cases": {k: _targets_out(t) for k, t in value.cases.items()}}
            return _targets_out(value)

        return {
            "record_kind_map": {k: rule(v) for k, v in self.record_kind_map.items()},
            "attribution_field": self.attribution_field,
            "timestamp_field": self.timestamp_field,
            "inspectable_rule": dict(self.inspectable_rule),
            "kind_field": self.kind_field,
            "id_field": self.id_field,
            "refs_field": self.refs_field,
        }

    def targets(self, record: Mapping[str, Any]) -> tuple[str, KindTargets]:
        source_kind = record.get(self.kind_field)
        if not isinstance(source_kind, str):
            raise MalformedInput(f"record lacks a string {self.kind_field!r} field")
        rule = self.record_kind_map.get(source_kind)
        if rule is None:
            raise UnknownRecordKind(source_kind)
        if isinstance(rule, CaseRule):
            selector = record.get(rule.field)
            targets = rule.cases.get(str(selector))
            if targets is None:
                raise UnknownRecordKind(f"{source_kind}/{rule.field}={selector}")
            return source_kind, targets
        return source_kind, rule


def _targets(value: Any, where: str) -> KindTargets:
    names = value if isinstance(value, list) else [value]
    if not names:
        raise MalformedInput(f"{where} maps to no fragment kind")
    try:
        return tuple(FragmentKind(n) for n in names)
    except ValueError as exc:
        raise MalformedInput(f"{where} maps to invalid fragment kind: {exc}") from exc


def _targets_out(targets: KindTargets) -> Any:
    return targets[0].value if len(targets) == 1 else [t.value for t in targets]


def _parse_rule(kind: str, value: Any) -> KindTargets | CaseRule:
    if isinstance(value, Mapping):
        if "field" not in value or not isinstance(value.get("cases"), Mapping):
            raise MalformedInput(f"case rule for {kind!r} needs 'field' and 'cases'")
        cases = {str(k): _targets(v, f"{kind}/{k}") for k, v in value["cases"].items()}
        return CaseRule(field=str(value["field"]), cases=cases)
    return _targets(value, kind)


def default_mapping() -> MappingConfig:
    """Identity mapping: record kinds are already fragment kind names."""
    return MappingConfig(record_kind_map={k.value: (k,) for k in FragmentKind})


def oep_mapping() -> MappingConfig:
    """Operational Evidence Plane record kinds onto fragment kinds."""
    return MappingConfig.from_dict(
        {
            "record_kind_map": {
                "release_manifest": "config_snapshot",
                "agent_step": {
                    "field": "step_type",
                    "cases": {"input": "agent_message", "tool_call": "tool_call"},
                },
                "permission_packet": ["policy_snapshot", "config_snapshot"],
                "replay_handle": "state_mutation",
                "eval": "human_approval",
            },
            "attribution_field": "actor",
            "timestamp_field": "ts",
            "inspectable_rule": {},
        }
    )


def _records(raw: bytes) -> list[tuple[int, dict]]:
    if raw.strip() in (b"", b"[]"):
        return []
    if not raw.endswith(b"\n"):
        raise MalformedInput("JSONL input must end with a newline", len(raw))
    records = []
    offset = 0
    for line in raw[:-1].split(b"\n"):
        if line.endswith(b"\r"):
            raise MalformedInput("JSONL lines must be LF-separated", offset + len(line) - 1)
        try:
            value = json.loads(line.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise MalformedInput("JSONL line is not valid UTF-8", offset + exc.start) from exc
        except json.JSONDecodeError as exc:
            prefix = line.decode("utf-8", errors="replace")[: exc.pos]
            raise MalformedInput(f"invalid JSON record: {exc.msg}", offset + len(prefix.encode("utf-8"))) from exc
        for item in value if isinstance(value, list) else [value]:
            if not isinstance(item, dict):
                raise MalformedInput("JSONL record must be an object", offset)
            records.append((offset, item))
        offset += len(line) + 1
    return records


def parse_bytes(raw: bytes, out: FragmentStream, mapping: MappingConfig | None = None) -> None:
    mapping = mapping or default_mapping()
    first_fragment: dict[str, str] = {}
    for offset, record in _records(raw):
        source_kind, targets = mapping.targets(record)
        record_id = record.get(mapping.id_field)
        if record_id is None:
            raise MalformedInput(f"record lacks {mapping.id_field!r}", offset)
        record_id = str(record_id)
        meta = {mapping.kind_field, mapping.id_field, mapping.refs_field}
        payload = {k: v for k, v in record.items() if k not in meta}
        payload["source_kind"] = source_kind
        refs = []
        for ref in record.get(mapping.refs_field) or []:
            if str(ref) not in first_fragment:
                raise MalformedInput(f"record {record_id!r} refs unknown or later record {ref!r}", offset)
            refs.append(first_fragment[str(ref)])
        for kind in targets:
            fid = record_id if len(targets) == 1 else f"{record_id}-{kind.value}"
            out.add(
                kind,
                payload,
                timestamp=payload.get(mapping.timestamp_field) if mapping.timestamp_field else None,
                attribution=payload.get(mapping.attribution_field) if mapping.attribution_field else None,
                inspectable=mapping.inspectable_rule.get(source_kind, True),
                refs=tuple(refs),
                fragment_id=fid,
            )
            first_fragment.setdefault(record_id, fid)
    if not out.fragments():
        raise EmptyAnchor("JSONL input holds no records")
