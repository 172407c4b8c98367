"""OpenAI Agents SDK trace export: a workflow trace plus typed spans."""

from __future__ import annotations

from typing import Any

from tracerecon.adapters._common import (
    FragmentStream,
    effect_record,
    expect_list,
    expect_mapping,
    parse_json_text,
)
from tracerecon.model import FragmentKind


def _reasoning_summary(output: Any) -> str:
    parts = []
    for item in output or []:
        if isinstance(item, dict) and item.get("type") == "reasoning":
            parts.extend(s.get("text", "") for s in item.get("summary") or [])
    return "".join(parts)


def parse(document: Any, out: FragmentStream) -> None:
    if isinstance(document, list):
        trace: dict = {}
        spans = document
    else:
        document = expect_mapping(document, "OpenAI Agents anchor")
        trace = dict(document.get("trace") or {})
        spans = expect_list(document.get("spans", []), "spans")
    operator = (trace.get("metadata") or {}).get("user_id")

    for index, span in enumerate(spans):
        span = expect_mapping(span, f"spans[{index}]")
        data = expect_mapping(span.get("span_data"), f"spans[{index}].span_data")
        span_type = data.get("type")
        span_id = span.get("id")
        when = span.get("started_at")

        if span_type == "agent":
            if data.get("tools"):
                out.add(
                    FragmentKind.CONFIG_SNAPSHOT,
                    {"agent": data.get("name"), "tools": data["tools"], "handoffs": data.get("handoffs") or [], "span_id": span_id},
                    timestamp=when,
                )
        elif span_type == "guardrail":
            out.add(
                FragmentKind.POLICY_SNAPSHOT,
                {"policy_name": data.get("name"), "triggered": bool(data.get("triggered")), "span_id": span_id},
                timestamp=when,
            )
        elif span_type == "generation":
            for message in data.get("input") or []:
                if message.get("role") == "user" and message.get("content"):
                    out.add(
                        FragmentKind.AGENT_MESSAGE,
                        {"content": message["content"], "span_id": span_id},
                        timestamp=when,
                        attribution=operator,
                    )
            reasoning = _reasoning_summary(data.get("output"))
            payload = {"model": data.get("model"), "span_id": span_id}
            if reasoning:
                payload["deliberation"] = reasoning
            out.add(FragmentKind.MODEL_GENERATION, payload, timestamp=when, inspectable=bool(reasoning))
        elif span_type == "function":
            call = out.add(
                FragmentKind.TOOL_CALL,
                {"name": data.get("name"), "arguments": parse_json_text(data.get("input")), "span_id": span_id},
                timestamp=when,
            )
            if data.get("output") is not None:
                payload = effect_record(data["output"])
                payload["span_id"] = span_id
                out.add(
                    FragmentKind.STATE_MUTATION,
                    payload,
                    timestamp=span.get("ended_at") or when,
                    refs=(call,),
                )
        # handoff, custom, response, transcription and speech spans are not mapped
