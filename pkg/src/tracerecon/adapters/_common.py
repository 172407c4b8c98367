from __future__ import annotations

import json
from typing import Any, Mapping

from tracerecon.errors import MalformedInput
from tracerecon.model import Fragment, FragmentKind, normalize_timestamp


class FragmentStream:
    """Accumulates fragments in source order, assigning ids and contiguous ordinals.

    ``key`` registers a native identifier (span id, tool_use id, JSON-RPC id, ...)
    so later records can point back at the fragment through ``ref_for``.
    """

    def __init__(self, regime: str) -> None:
        self.regime = regime
        self._fragments: list[Fragment] = []
        self._keys: dict[Any, str] = {}

    def add(
        self,
        kind: FragmentKind,
        payload: Mapping[str, Any],
        *,
        timestamp: str | None = None,
        attribution: str | None = None,
        inspectable: bool = True,
        refs: tuple[str, ...] = (),
        key: Any = None,
        fragment_id: str | None = None,
    ) -> str:
        ordinal = len(self._fragments)
        fid = fragment_id or f"{self.regime}_f{ordinal:03d}"
        self._fragments.append(
            Fragment(
                id=fid,
                kind=kind,
                ordinal=ordinal,
                regime=self.regime,
                payload=dict(payload),
                timestamp=normalize_timestamp(timestamp) if timestamp else None,
                attribution=attribution or None,
                inspectable=inspectable,
                refs=tuple(r for r in refs if r),
            )
        )
        if key is not None:
            self._keys[key] = fid
        return fid

    def ref_for(self, key: Any) -> str | None:
        return self._keys.get(key)

    def fragments(self) -> tuple[Fragment, ...]:
        return tuple(self._fragments)


def effect_record(result: Any) -> dict[str, Any]:
    """Normalize a tool's returned result into a state-mutation payload.

    Results that already describe the effect (``before``/``after`` or ``effect``)
    keep their fields; anything else is recorded as the resulting state only.
    """
    data = result
    if isinstance(result, str):
        try:
            data = json.loads(result)
        except ValueError:
            data = result
    if isinstance(data, dict) and (("before" in data and "after" in data) or data.get("effect")):
        return dict(data)
    return {"after": data}


def expect_mapping(value: Any, what: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise MalformedInput(f"{what} must be a JSON object")
    return value


def expect_list(value: Any, what: str) -> list[Any]:
    if not isinstance(value, list):
        raise MalformedInput(f"{what} must be a JSON array")
    return value


def parse_json_text(value: Any) -> Any:
    """Decode a JSON-encoded string argument; leave other values untouched."""
    if isinstance(value, str):
        try:
            return json.loads(value)
        except ValueError:
            return value
    return value
