"""Shared vocabulary: fragment kinds, DES properties, categories, and the value types.

Every type here is immutable and serializes to a plain JSON document; the
``to_dict``/``from_dict`` pairs round-trip losslessly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping

from tracerecon.errors import MalformedInput

MAX_FRAGMENTS = 50


class FragmentKind(str, Enum):
    CONFIG_SNAPSHOT = "config_snapshot"
    POLICY_SNAPSHOT = "policy_snapshot"
    AGENT_MESSAGE = "agent_message"
    TOOL_CALL = "tool_call"
    STATE_MUTATION = "state_mutation"
    HUMAN_APPROVAL = "human_approval"
    MODEL_GENERATION = "model_generation"


class PropertyClass(str, Enum):
    """The seven decision-event properties, in canonical row order."""

    INPUTS = "inputs"
    POLICY_BASIS = "policy_basis"
    OPERATOR_IDENTITY = "operator_identity"
    AUTHORIZATION_ENVELOPE = "authorization_envelope"
    REASONING_TRACE = "reasoning_trace"
    OUTPUT_ACTION = "output_action"
    POST_CONDITION_STATE = "post_condition_state"

    @property
    def label(self) -> str:
        return _PROPERTY_LABELS[self]


_PROPERTY_LABELS = {
    PropertyClass.INPUTS: "inputs",
    PropertyClass.POLICY_BASIS: "policy basis",
    PropertyClass.OPERATOR_IDENTITY: "operator identity",
    PropertyClass.AUTHORIZATION_ENVELOPE: "authorization envelope",
    PropertyClass.REASONING_TRACE: "reasoning trace",
    PropertyClass.OUTPUT_ACTION: "output action",
    PropertyClass.POST_CONDITION_STATE: "post-condition state",
}


class Category(str, Enum):
    FULLY_FILLABLE = "fully_fillable"
    PARTIALLY_FILLABLE = "partially_fillable"
    STRUCTURALLY_UNFILLABLE = "structurally_unfillable"
    OPAQUE = "opaque"

    @property
    def code(self) -> str:
        return _CATEGORY_CODES[self]

    @property
    def score(self) -> float:
        return score_of(self)

    @classmethod
    def from_code(cls, code: str) -> "Category":
        for category, letter in _CATEGORY_CODES.items():
            if letter == code:
                return category
        raise ValueError(f"unknown category code {code!r}")


_CATEGORY_CODES = {
    Category.FULLY_FILLABLE: "F",
    Category.PARTIALLY_FILLABLE: "P",
    Category.STRUCTURALLY_UNFILLABLE: "S",
    Category.OPAQUE: "O",
}

_SCORES = {
    Category.FULLY_FILLABLE: 1.0,
    Category.PARTIALLY_FILLABLE: 0.5,
    Category.STRUCTURALLY_UNFILLABLE: 0.0,
    Category.OPAQUE: 0.0,
}


def score_of(category: Category) -> float:
    """Strict governance score: F=1, P=0.5, S and O both 0."""
    return _SCORES[Category(category)]


def round_half_away(value: Fraction | float | int, places: int) -> Decimal:
    """Round exactly to ``places`` decimals, halves away from zero."""
    exact = Fraction(value)
    scale = 10**places
    magnitude = (abs(exact) * scale + Fraction(1, 2)).__floor__()
    signed = -magnitude if exact < 0 else magnitude
    return Decimal(signed).scaleb(-places)


def canonical_json(document: Any) -> bytes:
    """UTF-8, LF, sorted keys, two-space indent, trailing newline."""
    text = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def load_json(raw: bytes | str, what: str = "document") -> Any:
    """Parse JSON, converting decode failures into MalformedInput with a byte offset."""
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"{what} is not valid UTF-8", exc.start) from exc
    else:
        text = raw
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise MalformedInput(f"{what} is not valid JSON: {exc.msg}", offset) from exc


_ISO_RE = re.compile(
    r"^(\d{4}-\d{2}-\d{2})[T ](\d{2}:\d{2}:\d{2})(?:\.(\d+))?(Z|[+-]\d{2}:?\d{2})?$"
)


def normalize_timestamp(value: str) -> str:
    """Normalize an ISO-8601 instant to UTC at millisecond precision.

    Sub-millisecond digits are truncated; naive instants are taken as UTC.
    """
    match = _ISO_RE.match(value.strip())
    if match is None:
        raise MalformedInput(f"unparseable timestamp {value!r}")
    date, clock, fraction, zone = match.groups()
    micros = int(((fraction or "") + "000000")[:6])
    base = datetime.fromisoformat(f"{date}T{clock}")
    if zone and zone != "Z":
        sign = 1 if zone[0] == "+" else -1
        digits = zone[1:].replace(":", "")
        offset = timedelta(hours=int(digits[:2]), minutes=int(digits[2:]))
        base = base - sign * offset
    base = base.replace(microsecond=micros, tzinfo=timezone.utc)
    return base.strftime("%Y-%m-%dT%H:%M:%S.") + f"{micros // 1000:03d}Z"


def timestamp_from_unix_nanos(nanos: int | str) -> str:
    nanos = int(nanos)
    seconds, rem = divmod(nanos, 1_000_000_000)
    instant = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return instant.strftime("%Y-%m-%dT%H:%M:%S.") + f"{rem // 1_000_000:03d}Z"


@dataclass(frozen=True)
class Fragment:
    id: str
    kind: FragmentKind
    ordinal: int
    regime: str
    payload: Mapping[str, Any] = field(default_factory=dict)
    timestamp: str | None = None
    attribution: str | None = None
    inspectable: bool = True
    refs: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "ordinal": self.ordinal,
            "regime": self.regime,
            "payload": dict(self.payload),
            "timestamp": self.timestamp,
            "attribution": self.attribution,
            "inspectable": self.inspectable,
            "refs": list(self.refs),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Fragment":
        if not isinstance(data, Mapping):
            raise MalformedInput("fragment must be a JSON object")
        try:
            kind = FragmentKind(data["kind"])
        except KeyError as exc:
            raise MalformedInput(f"fragment lacks field {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise MalformedInput(f"unknown fragment kind {data.get('kind')!r}") from exc
        for key in ("id", "ordinal", "regime"):
            if key not in data:
                raise MalformedInput(f"fragment lacks field {key!r}")
        ordinal = data["ordinal"]
        if not isinstance(ordinal, int) or isinstance(ordinal, bool) or ordinal < 0:
            raise MalformedInput(f"fragment {data['id']!r} has invalid ordinal {ordinal!r}")
        payload = data.get("payload") or {}
        if not isinstance(payload, Mapping):
            raise MalformedInput(f"fragment {data['id']!r} payload must be an object")
        timestamp = data.get("timestamp")
        return cls(
            id=str(data["id"]),
            kind=kind,
            ordinal=ordinal,
            regime=str(data["regime"]),
            payload=dict(payload),
            timestamp=normalize_timestamp(timestamp) if timestamp else None,
            attribution=data.get("attribution") or None,
            inspectable=bool(data.get("inspectable", True)),
            refs=tuple(data.get("refs") or ()),
        )


@dataclass(frozen=True)
class FragmentsFile:
    """One anchor's normalized fragment stream."""

    anchor_id: str
    regime: str
    adapter: str
    fragments: tuple[Fragment, ...]

    def __post_init__(self) -> None:
        validate_fragments(self.fragments)

    def by_id(self) -> dict[str, Fragment]:
        return {f.id: f for f in self.fragments}

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor_id": self.anchor_id,
            "regime": self.regime,
            "adapter": self.adapter,
            "fragments": [f.to_dict() for f in self.fragments],
        }

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FragmentsFile":
        if not isinstance(data, Mapping):
            raise MalformedInput("fragments file must be a JSON object")
        for key in ("anchor_id", "regime", "fragments"):
            if key not in data:
                raise MalformedInput(f"fragments file lacks field {key!r}")
        if not isinstance(data["fragments"], list):
            raise MalformedInput("'fragments' must be a list")
        return cls(
            anchor_id=str(data["anchor_id"]),
            regime=str(data["regime"]),
            adapter=str(data.get("adapter", "none")),
            fragments=tuple(Fragment.from_dict(f) for f in data["fragments"]),
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FragmentsFile":
        return cls.from_dict(load_json(raw, "fragments file"))


def validate_fragments(fragments: Iterable[Fragment]) -> None:
    """Check the per-anchor invariants: unique ids, contiguous ordinals, backward refs, cap."""
    fragments = list(fragments)
    if len(fragments) > MAX_FRAGMENTS:
        raise MalformedInput(f"anchor holds {len(fragments)} fragments; the cap is {MAX_FRAGMENTS}")
    ordinal_of: dict[str, int] = {}
    for frag in fragments:
        if frag.id in ordinal_of:
            raise MalformedInput(f"duplicate fragment id {frag.id!r}")
        ordinal_of[frag.id] = frag.ordinal
    if sorted(ordinal_of.values()) != list(range(len(fragments))):
        raise MalformedInput("fragment ordinals must be unique and contiguous from 0")
    for frag in fragments:
        for ref in frag.refs:
            if ref not in ordinal_of:
                raise MalformedInput(f"fragment {frag.id!r} refs unknown id {ref!r}")
            if ordinal_of[ref] >= frag.ordinal:
                raise MalformedInput(f"fragment {frag.id!r} refs later fragment {ref!r}")


@dataclass(frozen=True)
class DecisionUnit:
    unit_id: str
    fragment_ids: tuple[str, ...]
    anchor_tool_call: str
    anchor_state_mutation: str | None = None
    upstream_prompt: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "unit_id": self.unit_id,
            "fragment_ids": list(self.fragment_ids),
            "anchor_tool_call": self.anchor_tool_call,
            "anchor_state_mutation": self.anchor_state_mutation,
            "upstream_prompt": self.upstream_prompt,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DecisionUnit":
        return cls(
            unit_id=data["unit_id"],
            fragment_ids=tuple(data["fragment_ids"]),
            anchor_tool_call=data["anchor_tool_call"],
            anchor_state_mutation=data.get("anchor_state_mutation"),
            upstream_prompt=data.get("upstream_prompt"),
        )
