"""Model Context Protocol transcripts (JSON-RPC 2.0), one fragment per message.

A transcript is a JSON array whose entries are either bare JSON-RPC messages
or ``{"direction": "client_to_server" | "server_to_client", "message": {...}}``.
Responses are paired to requests by (direction, id). No attribution is ever
synthesized: the protocol does not carry a per-step principal.
"""

from __future__ import annotations

from typing import Any

from tracerecon.adapters._common import FragmentStream, effect_record, expect_list, expect_mapping
from tracerecon.errors import MalformedInput
from tracerecon.model import FragmentKind

_OPPOSITE = {"client_to_server": "server_to_client", "server_to_client": "client_to_server", None: None}


def _content_text(content: Any) -> str:
    if isinstance(content, dict):
        content = [content]
    return "".join(c.get("text", "") for c in content or [] if isinstance(c, dict) and c.get("type") == "text")


def parse(document: Any, out: FragmentStream) -> None:
    pending: dict[tuple[str | None, Any], tuple[str, str | None]] = {}
    for index, entry in enumerate(expect_list(document, "MCP transcript")):
        entry = expect_mapping(entry, f"transcript[{index}]")
        if "message" in entry:
            direction = entry.get("direction")
            if direction not in _OPPOSITE:
                raise MalformedInput(f"transcript[{index}] has unknown direction {direction!r}")
            message = expect_mapping(entry["message"], f"transcript[{index}].message")
        else:
            direction, message = None, entry
        if message.get("jsonrpc") != "2.0":
            raise MalformedInput(f"transcript[{index}] is not a JSON-RPC 2.0 message")
        when = entry.get("timestamp")

        if "method" in message:
            if "id" not in message:
                continue  # notifications carry no decision evidence
            method = message["method"]
            produced = _request(method, message, out, when)
            pending[(direction, message["id"])] = (method, produced)
        elif "result" in message or "error" in message:
            key = (_OPPOSITE[direction], message.get("id"))
            if key not in pending:
                raise MalformedInput(f"transcript[{index}] answers unknown request id {message.get('id')!r}")
            method, request_fragment = pending.pop(key)
            _response(method, message, request_fragment, out, when)
        else:
            raise MalformedInput(f"transcript[{index}] is neither request, notification nor response")


def _request(method: str, message: dict, out: FragmentStream, when: str | None) -> str | None:
    params = message.get("params") or {}
    if method == "prompts/get":
        arguments = params.get("arguments") or {}
        return out.add(
            FragmentKind.AGENT_MESSAGE,
            {"prompt": params.get("name"), "content": " ".join(str(v) for v in arguments.values()), "jsonrpc_id": message["id"]},
            timestamp=when,
        )
    if method == "tools/call":
        return out.add(
            FragmentKind.TOOL_CALL,
            {"name": params.get("name"), "arguments": params.get("arguments"), "jsonrpc_id": message["id"]},
            timestamp=when,
        )
    return None


def _response(method: str, message: dict, request_fragment: str | None, out: FragmentStream, when: str | None) -> None:
    result = message.get("result") or {}
    rid = message.get("id")
    if method == "tools/list" and "result" in message:
        out.add(FragmentKind.CONFIG_SNAPSHOT, {"tools": result.get("tools", []), "jsonrpc_id": rid}, timestamp=when)
    elif method == "prompts/get" and "result" in message:
        text = "".join(_content_text(m.get("content")) for m in result.get("messages", []))
        out.add(
            FragmentKind.AGENT_MESSAGE,
            {"content": text, "jsonrpc_id": rid},
            timestamp=when,
            refs=(request_fragment,),
        )
    elif method == "sampling/createMessage" and "result" in message:
        out.add(
            FragmentKind.MODEL_GENERATION,
            {"model": result.get("model"), "stop_reason": result.get("stopReason"), "jsonrpc_id": rid},
            timestamp=when,
            inspectable=False,
        )
    elif method == "tools/call":
        if "error" in message:
            payload = {"error": message["error"]}
        else:
            payload = effect_record(result.get("structuredContent") or _content_text(result.get("content")))
            payload["is_error"] = bool(result.get("isError"))
        payload["jsonrpc_id"] = rid
        out.add(FragmentKind.STATE_MUTATION, payload, timestamp=when, refs=(request_fragment,))
