"""AWS Bedrock Agents: InvokeAgent trace steps, one UNION subtype per step.

Accepted shapes: a JSON array of trace parts, or a session envelope::

    {"sessionId": ..., "inputText": ..., "sessionAttributes": {...},
     "agentConfiguration": {...}, "trace": [<trace part>, ...]}

A trace part is ``{"eventTime": ..., "trace": {<subtype>: {...}}}``.
"""

from __future__ import annotations

from typing import Any

from tracerecon.adapters._common import (
    FragmentStream,
    effect_record,
    expect_list,
    expect_mapping,
)
from tracerecon.errors import MalformedInput
from tracerecon.model import FragmentKind

TRACE_SUBTYPES = (
    "preProcessingTrace",
    "orchestrationTrace",
    "postProcessingTrace",
    "customOrchestrationTrace",
    "routingClassifierTrace",
    "failureTrace",
    "guardrailTrace",
)

ORCHESTRATION_MEMBERS = (
    "modelInvocationInput",
    "modelInvocationOutput",
    "rationale",
    "invocationInput",
    "observation",
)


def _single_member(union: Any, members: tuple[str, ...], what: str) -> tuple[str, dict]:
    union = expect_mapping(union, what)
    present = [m for m in members if m in union]
    if len(present) != 1:
        raise MalformedInput(f"{what} is a UNION; expected exactly one of {members}, got {present}")
    return present[0], dict(expect_mapping(union[present[0]], f"{what}.{present[0]}"))


def parse(document: Any, out: FragmentStream) -> None:
    if isinstance(document, list):
        envelope: dict = {}
        parts = document
    else:
        envelope = dict(expect_mapping(document, "Bedrock anchor"))
        parts = expect_list(envelope.get("trace", []), "trace")

    session_id = envelope.get("sessionId")
    operator = (envelope.get("sessionAttributes") or {}).get("user_id")

    config = envelope.get("agentConfiguration")
    if config:
        out.add(FragmentKind.CONFIG_SNAPSHOT, {"source": "agentConfiguration", **dict(config)})
    if envelope.get("inputText"):
        out.add(
            FragmentKind.AGENT_MESSAGE,
            {"content": envelope["inputText"], "session_id": session_id},
            attribution=operator,
        )

    for index, part in enumerate(parts):
        part = expect_mapping(part, f"trace[{index}]")
        subtype, body = _single_member(part.get("trace"), TRACE_SUBTYPES, f"trace[{index}].trace")
        when = part.get("eventTime")
        if subtype == "guardrailTrace":
            out.add(
                FragmentKind.POLICY_SNAPSHOT,
                {
                    "policy_name": body.get("guardrailIdentifier"),
                    "guardrail_version": body.get("guardrailVersion"),
                    "action": body.get("action"),
                    "trace_id": body.get("traceId"),
                },
                timestamp=when,
            )
        elif subtype == "orchestrationTrace":
            _orchestration(body, when, out, f"trace[{index}]")
        # pre/post-processing, routing and failure steps carry no decision evidence


def _orchestration(body: dict, when: str | None, out: FragmentStream, where: str) -> None:
    member, step = _single_member(body, ORCHESTRATION_MEMBERS, f"{where}.orchestrationTrace")
    trace_id = step.get("traceId")
    if member == "rationale":
        # routing / tool-selection metadata, not model deliberation
        out.add(
            FragmentKind.MODEL_GENERATION,
            {"subtype": "orchestrationTrace.rationale", "routing_note": step.get("text"), "trace_id": trace_id},
            timestamp=when,
            inspectable=False,
        )
    elif member == "invocationInput" and "actionGroupInvocationInput" in step:
        call = step["actionGroupInvocationInput"]
        name = call.get("function") or call.get("apiPath")
        arguments = {p["name"]: p.get("value") for p in call.get("parameters", [])}
        out.add(
            FragmentKind.TOOL_CALL,
            {
                "name": f"{call.get('actionGroupName')}.{name}" if name else call.get("actionGroupName"),
                "arguments": arguments,
                "trace_id": trace_id,
            },
            timestamp=when,
            key=("call", trace_id),
        )
    elif member == "observation" and step.get("type") == "ACTION_GROUP":
        output = (step.get("actionGroupInvocationOutput") or {}).get("text")
        payload = effect_record(output)
        payload["trace_id"] = trace_id
        out.add(
            FragmentKind.STATE_MUTATION,
            payload,
            timestamp=when,
            refs=(out.ref_for(("call", trace_id)),),
        )
