"""LangSmith run export: a JSON array of runs, or ``{"runs": [...]}``."""

from __future__ import annotations

from typing import Any

from tracerecon.adapters._common import FragmentStream, effect_record, expect_list, expect_mapping
from tracerecon.model import FragmentKind

_INPUT_KEYS = ("input", "question", "query", "messages")


def _root_input(inputs: dict) -> Any:
    for key in _INPUT_KEYS:
        if inputs.get(key):
            return inputs[key]
    return None


def _reasoning(outputs: Any) -> str | None:
    if not isinstance(outputs, dict):
        return None
    for generation in outputs.get("generations") or []:
        message = generation.get("message") or {}
        kwargs = message.get("additional_kwargs") or {}
        if kwargs.get("reasoning_content"):
            return kwargs["reasoning_content"]
    return None


def parse(document: Any, out: FragmentStream) -> None:
    if isinstance(document, dict):
        document = document.get("runs", [])
    runs = expect_list(document, "LangSmith runs")
    for index, run in enumerate(runs):
        run = expect_mapping(run, f"runs[{index}]")
        run_type = run.get("run_type")
        run_id = run.get("id")
        when = run.get("start_time")
        metadata = (run.get("extra") or {}).get("metadata") or {}
        inputs = run.get("inputs") or {}

        if run_type == "chain" and run.get("parent_run_id") is None:
            content = _root_input(inputs)
            if content:
                out.add(
                    FragmentKind.AGENT_MESSAGE,
                    {"content": content, "run_id": run_id},
                    timestamp=when,
                    attribution=metadata.get("user_id"),
                )
            if metadata.get("policy"):
                out.add(
                    FragmentKind.POLICY_SNAPSHOT,
                    {"policy_name": metadata["policy"], "run_id": run_id},
                    timestamp=when,
                )
        elif run_type == "llm":
            invocation = (run.get("extra") or {}).get("invocation_params") or {}
            if invocation.get("tools"):
                out.add(
                    FragmentKind.CONFIG_SNAPSHOT,
                    {"tools": invocation["tools"], "run_id": run_id},
                    timestamp=when,
                )
            reasoning = _reasoning(run.get("outputs"))
            payload = {"model": invocation.get("model") or run.get("name"), "run_id": run_id}
            if reasoning:
                payload["deliberation"] = reasoning
            out.add(
                FragmentKind.MODEL_GENERATION,
                payload,
                timestamp=when,
                inspectable=bool(reasoning),
            )
        elif run_type == "tool":
            call = out.add(
                FragmentKind.TOOL_CALL,
                {"name": run.get("name"), "arguments": inputs, "run_id": run_id},
                timestamp=when,
            )
            # outputs are null when the client hides them
            outputs = run.get("outputs")
            if outputs is not None:
                result = outputs.get("output", outputs) if isinstance(outputs, dict) else outputs
                payload = effect_record(result)
                payload["run_id"] = run_id
                out.add(
                    FragmentKind.STATE_MUTATION,
                    payload,
                    timestamp=run.get("end_time") or when,
                    refs=(call,),
                )
