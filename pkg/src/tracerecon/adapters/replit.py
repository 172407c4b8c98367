"""Pre-built fragment manifest for the Replit DROP DATABASE public-record reconstruction.

The manifest is already normalized, so no adapter runs; this loader only
checks that the four pinned fragments are present and well formed. Fragment
timestamps are placeholders: manifest order is kept and ordinals are
reassigned by position.
"""

from __future__ import annotations

from tracerecon.errors import MalformedInput
from tracerecon.model import Fragment, FragmentKind, FragmentsFile, load_json

REQUIRED = {
    "replit_f000": FragmentKind.AGENT_MESSAGE,
    "replit_f001": FragmentKind.MODEL_GENERATION,
    "replit_f002": FragmentKind.TOOL_CALL,
    "replit_f003": FragmentKind.STATE_MUTATION,
}
DESTRUCTIVE_STATEMENT = "DROP DATABASE production_db"


def load_replit_manifest(raw: bytes) -> FragmentsFile:
    document = load_json(raw, "Replit fragment manifest")
    if not isinstance(document, dict) or not isinstance(document.get("fragments"), list):
        raise MalformedInput("fragment manifest must be an object with a 'fragments' list")
    entries = document["fragments"]
    ids = [e.get("id") if isinstance(e, dict) else None for e in entries]
    if sorted(i for i in ids if i) != sorted(REQUIRED) or len(ids) != len(REQUIRED):
        missing = sorted(set(REQUIRED) - set(ids))
        raise MalformedInput(f"manifest must hold exactly {sorted(REQUIRED)}; missing {missing}")

    regime = document.get("regime", "replit")
    fragments = []
    for position, entry in enumerate(entries):
        fragment = Fragment.from_dict({**entry, "ordinal": position, "regime": regime})
        if fragment.kind is not REQUIRED[fragment.id]:
            raise MalformedInput(f"{fragment.id} must have kind {REQUIRED[fragment.id].value}")
        fragments.append(fragment)

    by_id = {f.id: f for f in fragments}
    if by_id["replit_f001"].inspectable:
        raise MalformedInput("replit_f001 records opaque internal reasoning and must be non-inspectable")
    if DESTRUCTIVE_STATEMENT not in repr(dict(by_id["replit_f002"].payload)):
        raise MalformedInput(f"replit_f002 payload must carry {DESTRUCTIVE_STATEMENT!r}")

    return FragmentsFile(
        anchor_id=document.get("anchor_id", "replit-drop-database"),
        regime=regime,
        adapter="none",
        fragments=tuple(fragments),
    )
