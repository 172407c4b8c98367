"""Per-regime adapters: native anchor bytes in, normalized fragments file out."""

from __future__ import annotations

from enum import Enum

from tracerecon.adapters import anthropic, bedrock, generic_jsonl, langsmith, mcp, openai_agents, otlp
from tracerecon.adapters._common import FragmentStream
from tracerecon.adapters.generic_jsonl import MappingConfig, default_mapping, oep_mapping
from tracerecon.adapters.replit import load_replit_manifest
from tracerecon.errors import EmptyAnchor
from tracerecon.model import FragmentsFile, load_json

__all__ = [
    "AdapterId",
    "MappingConfig",
    "default_mapping",
    "ingest",
    "load_replit_manifest",
    "oep_mapping",
]


class AdapterId(str, Enum):
    BEDROCK = "bedrock"
    LANGSMITH = "langsmith"
    ANTHROPIC = "anthropic"
    OPENAI_AGENTS = "openai_agents"
    OTLP = "otlp"
    MCP = "mcp"
    GENERIC_JSONL = "generic_jsonl"

    @classmethod
    def parse(cls, name: str) -> "AdapterId":
        return cls(name.replace("-", "_"))


_JSON_ADAPTERS = {
    AdapterId.BEDROCK: bedrock.parse,
    AdapterId.LANGSMITH: langsmith.parse,
    AdapterId.ANTHROPIC: anthropic.parse,
    AdapterId.OPENAI_AGENTS: openai_agents.parse,
    AdapterId.OTLP: otlp.parse,
    AdapterId.MCP: mcp.parse,
}


def ingest(
    adapter: AdapterId | str,
    raw: bytes,
    mapping: MappingConfig | None = None,
    *,
    anchor_id: str | None = None,
    regime: str | None = None,
) -> FragmentsFile:
    """Parse one native anchor file. Pure: identical inputs give identical output."""
    adapter = AdapterId.parse(adapter) if isinstance(adapter, str) else adapter
    regime = regime or adapter.value
    out = FragmentStream(regime)
    if adapter is AdapterId.GENERIC_JSONL:
        generic_jsonl.parse_bytes(raw, out, mapping)
    else:
        _JSON_ADAPTERS[adapter](load_json(raw, f"{adapter.value} anchor"), out)
    fragments = out.fragments()
    if not fragments:
        raise EmptyAnchor(f"{adapter.value} anchor yielded no decision-relevant fragments")
    return FragmentsFile(
        anchor_id=anchor_id or f"{regime}-anchor",
        regime=regime,
        adapter=adapter.value,
        fragments=fragments,
    )
