"""Anthropic Messages history with inline tool_use / tool_result content blocks.

Accepted shapes: a JSON array of messages, or a request-like object with
``messages`` plus optional ``tools``, ``system`` and ``metadata.user_id``.
The Messages API carries no per-message timestamps.
"""

from __future__ import annotations

from typing import Any

from tracerecon.adapters._common import FragmentStream, effect_record, expect_list, expect_mapping
from tracerecon.errors import MalformedInput
from tracerecon.model import FragmentKind


def _text_of(content: Any) -> str:
    if isinstance(content, str):
        return content
    if isinstance(content, list):
        return "".join(b.get("text", "") for b in content if isinstance(b, dict) and b.get("type") == "text")
    return ""


def parse(document: Any, out: FragmentStream) -> None:
    if isinstance(document, list):
        request: dict = {}
        messages = document
    else:
        request = dict(expect_mapping(document, "Anthropic anchor"))
        messages = expect_list(request.get("messages", []), "messages")

    user_id = (request.get("metadata") or {}).get("user_id")
    if request.get("tools"):
        out.add(
            FragmentKind.CONFIG_SNAPSHOT,
            {"tools": request["tools"], "system": request.get("system"), "model": request.get("model")},
        )

    for index, message in enumerate(messages):
        message = expect_mapping(message, f"messages[{index}]")
        role = message.get("role")
        content = message.get("content")
        if role not in ("user", "assistant"):
            raise MalformedInput(f"messages[{index}] has unsupported role {role!r}")
        blocks = [{"type": "text", "text": content}] if isinstance(content, str) else expect_list(
            content, f"messages[{index}].content"
        )
        if role == "user":
            _user_blocks(blocks, out, user_id)
        else:
            _assistant_blocks(blocks, out)


def _user_blocks(blocks: list, out: FragmentStream, user_id: str | None) -> None:
    for block in blocks:
        if block.get("type") == "tool_result":
            payload = effect_record(_text_of(block.get("content")))
            payload["tool_use_id"] = block.get("tool_use_id")
            if block.get("is_error"):
                payload["is_error"] = True
            out.add(FragmentKind.STATE_MUTATION, payload, refs=(out.ref_for(block.get("tool_use_id")),))
    text = _text_of(blocks)
    if text:
        out.add(FragmentKind.AGENT_MESSAGE, {"content": text, "role": "user"}, attribution=user_id)


def _assistant_blocks(blocks: list, out: FragmentStream) -> None:
    for block in blocks:
        kind = block.get("type")
        if kind == "thinking":
            thinking = block.get("thinking") or ""
            payload = {"block": "thinking"}
            if thinking:
                payload["deliberation"] = thinking
            out.add(FragmentKind.MODEL_GENERATION, payload, inspectable=bool(thinking))
        elif kind == "redacted_thinking":
            out.add(FragmentKind.MODEL_GENERATION, {"block": "redacted_thinking"}, inspectable=False)
        elif kind == "text":
            out.add(FragmentKind.MODEL_GENERATION, {"block": "text", "text": block.get("text")}, inspectable=False)
        elif kind in ("tool_use", "server_tool_use"):
            out.add(
                FragmentKind.TOOL_CALL,
                {"name": block.get("name"), "arguments": block.get("input"), "tool_use_id": block.get("id")},
                key=block.get("id"),
            )
