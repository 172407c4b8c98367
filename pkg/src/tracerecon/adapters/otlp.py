"""OTLP/JSON span export under the OpenTelemetry GenAI semantic conventions."""

from __future__ import annotations

from typing import Any, Iterator

from tracerecon.adapters._common import (
    FragmentStream,
    effect_record,
    expect_list,
    expect_mapping,
    parse_json_text,
)
from tracerecon.errors import MalformedInput
from tracerecon.model import FragmentKind, timestamp_from_unix_nanos

_GENERATION_OPS = {"chat", "text_completion", "generate_content"}
_AGENT_OPS = {"invoke_agent", "create_agent"}


def any_value(value: dict) -> Any:
    """Decode an OTLP AnyValue."""
    if "stringValue" in value:
        return value["stringValue"]
    if "intValue" in value:
        return int(value["intValue"])
    if "doubleValue" in value:
        return float(value["doubleValue"])
    if "boolValue" in value:
        return bool(value["boolValue"])
    if "arrayValue" in value:
        return [any_value(v) for v in value["arrayValue"].get("values", [])]
    if "kvlistValue" in value:
        return attributes(value["kvlistValue"].get("values", []))
    if "bytesValue" in value:
        return value["bytesValue"]
    return None


def attributes(items: list | None) -> dict[str, Any]:
    result = {}
    for item in items or []:
        if not isinstance(item, dict) or "key" not in item:
            raise MalformedInput("OTLP attribute must be an object with 'key'")
        result[item["key"]] = any_value(item.get("value") or {})
    return result


def iter_spans(document: Any) -> Iterator[dict]:
    if isinstance(document, dict):
        document = document.get("resourceSpans", [])
    for r_index, resource_spans in enumerate(expect_list(document, "resourceSpans")):
        resource_spans = expect_mapping(resource_spans, f"resourceSpans[{r_index}]")
        for scope_spans in resource_spans.get("scopeSpans", []):
            for span in scope_spans.get("spans", []):
                yield expect_mapping(span, "span")


def _when(nanos: Any) -> str | None:
    return timestamp_from_unix_nanos(nanos) if nanos else None


def _has_reasoning_part(output_messages: Any) -> str:
    text = []
    for message in parse_json_text(output_messages) or []:
        for part in message.get("parts", []) if isinstance(message, dict) else []:
            if part.get("type") == "reasoning":
                text.append(part.get("content", ""))
    return "".join(text)


def parse(document: Any, out: FragmentStream) -> None:
    for span in iter_spans(document):
        attrs = attributes(span.get("attributes"))
        op = attrs.get("gen_ai.operation.name")
        span_id = span.get("spanId")
        when = _when(span.get("startTimeUnixNano"))
        principal = attrs.get("enduser.id")

        if op in _AGENT_OPS or op in _GENERATION_OPS:
            for event in span.get("events", []):
                if event.get("name") == "gen_ai.user.message":
                    body = attributes(event.get("attributes"))
                    out.add(
                        FragmentKind.AGENT_MESSAGE,
                        {"content": body.get("content"), "span_id": span_id},
                        timestamp=_when(event.get("timeUnixNano")) or when,
                        attribution=principal,
                    )
            if attrs.get("gen_ai.tool.definitions"):
                out.add(
                    FragmentKind.CONFIG_SNAPSHOT,
                    {"tools": parse_json_text(attrs["gen_ai.tool.definitions"]), "span_id": span_id},
                    timestamp=when,
                )
        if op in _GENERATION_OPS:
            reasoning = _has_reasoning_part(attrs.get("gen_ai.output.messages"))
            payload = {
                "model": attrs.get("gen_ai.request.model"),
                "finish_reasons": attrs.get("gen_ai.response.finish_reasons"),
                "span_id": span_id,
            }
            if reasoning:
                payload["deliberation"] = reasoning
            out.add(FragmentKind.MODEL_GENERATION, payload, timestamp=when, inspectable=bool(reasoning))
        elif op == "execute_tool":
            call = out.add(
                FragmentKind.TOOL_CALL,
                {
                    "name": attrs.get("gen_ai.tool.name"),
                    "arguments": parse_json_text(attrs.get("gen_ai.tool.call.arguments")),
                    "call_id": attrs.get("gen_ai.tool.call.id"),
                    "span_id": span_id,
                },
                timestamp=when,
                attribution=principal,
            )
            # the result attribute is opt-in and usually absent
            if "gen_ai.tool.call.result" in attrs:
                payload = effect_record(attrs["gen_ai.tool.call.result"])
                payload["span_id"] = span_id
                out.add(
                    FragmentKind.STATE_MUTATION,
                    payload,
                    timestamp=_when(span.get("endTimeUnixNano")) or when,
                    refs=(call,),
                )
