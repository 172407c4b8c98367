from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from tracerecon.model import Category, Fragment, FragmentKind

REPO = Path(__file__).resolve().parent.parent
COMMITTED = ("MANIFEST.json", "checksums.txt", "fixtures", "out", "baseline")

# Target matrix, one string per column in property row order.
TABLE2 = {
    "bedrock": "FFFFOFF",
    "langsmith": "FFFFOFS",
    "anthropic": "FSFFOFF",
    "openai_agents": "FFFFOFF",
    "otlp": "FSFSOFS",
    "mcp": "PSSFOFP",
    "oep": "FFFFSFF",
    "replit": "PSFSOFP",
}
PCT = {
    "bedrock": "85.7",
    "langsmith": "71.4",
    "anthropic": "71.4",
    "openai_agents": "85.7",
    "otlp": "42.9",
    "mcp": "42.9",
    "oep": "85.7",
    "replit": "42.9",
}
VENDORS = ("bedrock", "langsmith", "anthropic", "openai_agents", "otlp", "mcp")


def copy_tree(dest: Path) -> Path:
    dest.mkdir(parents=True, exist_ok=True)
    for name in COMMITTED:
        src = REPO / name
        if src.is_dir():
            shutil.copytree(src, dest / name)
        else:
            shutil.copy2(src, dest / name)
    return dest


@pytest.fixture
def tree(tmp_path: Path) -> Path:
    """A private copy of the committed corpus and outputs."""
    return copy_tree(tmp_path / "repo")


def codes(text: str) -> list[Category]:
    return [Category.from_code(c) for c in text]


def frag(fid: str, kind: FragmentKind, ordinal: int, **kw) -> Fragment:
    return Fragment(id=fid, kind=FragmentKind(kind), ordinal=ordinal, regime=kw.pop("regime", "t"), **kw)
