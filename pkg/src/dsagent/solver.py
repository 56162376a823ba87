"""Prompt assembly and single-shot code generation.

The solver gets one model call per question: retrieved prior episodes are
rendered in exactly the order the memory module produced, followed by the
current problem and the list of available data files. The first fenced
code block of the reply is the candidate program (the executed output is
the answer); no repair loop, no feedback turns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import Task
from .gateway import ChatGateway, ChatRequest
from .memory import RetrievedExample

FAILED_ATTEMPT_LABEL = "FAILED ATTEMPT (the code below did NOT solve the problem)"
SOLVED_LABEL = "solved correctly"


class SolverError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class PromptBundle:
    system_instruction: str
    example_blocks: tuple[str, ...]
    problem_block: str
    file_context: str

    def user_text(self) -> str:
        parts = []
        if self.example_blocks:
            parts.append(
                "Here are prior problems you have already attempted, for reference:"
            )
            parts.extend(self.example_blocks)
        parts.append(self.problem_block)
        if self.file_context:
            parts.append(self.file_context)
        return "\n\n".join(parts)


@dataclass(frozen=True, slots=True)
class CandidateSolution:
    code: str
    raw_response: str
    extraction_note: str  # fenced_block | whole_response


def _render_example(example: RetrievedExample) -> str:
    episode = example.episode
    label = SOLVED_LABEL if episode.tag == "Correct" else FAILED_ATTEMPT_LABEL
    return (
        f"--- Prior problem ({label}) ---\n"
        f"Problem:\n{episode.problem_description}\n"
        f"Code:\n```python\n{episode.generated_code}\n```\n"
        f"Outcome: {episode.tag}"
    )


def assemble_prompt(
    task: Task,
    examples: list[RetrievedExample],
    prior_turns: list[tuple[str, str]] | None = None,
    system_instruction: str | None = None,
    template_path: Path | str | None = None,
) -> PromptBundle:
    """Build the solver prompt.

    ``examples`` are rendered in the given order, untouched; the caller
    (the memory module) owns their ordering. ``prior_turns`` carries
    (description, reference solution) pairs for preceding turns of a
    multi-turn set, as session context.
    """
    if system_instruction is None:
        if template_path is not None:
            system_instruction = Path(template_path).read_text(encoding="utf-8")
        else:
            from importlib import resources

            system_instruction = (
                resources.files("dsagent") / "templates" / "solver_prompt.txt"
            ).read_text(encoding="utf-8")

    example_blocks = tuple(_render_example(e) for e in examples)

    problem_parts = []
    for description, reference in prior_turns or []:
        problem_parts.append(
            "Earlier turn of this session (already executed):\n"
            f"{description}\n"
            f"Reference solution already run in your session:\n"
            f"```python\n{reference}\n```"
        )
    problem_parts.append(f"Problem to solve now:\n{task.description}")
    problem_block = "\n\n".join(problem_parts)

    if task.data_files:
        file_context = "Available data files:\n" + "\n".join(
            f"- {path}" for path in task.data_files
        )
    else:
        file_context = ""
    return PromptBundle(
        system_instruction=system_instruction,
        example_blocks=example_blocks,
        problem_block=problem_block,
        file_context=file_context,
    )


def bundle_to_request(
    bundle: PromptBundle,
    model_id: str = "default",
    temperature: float = 0.0,
    max_output_tokens: int = 4096,
) -> ChatRequest:
    return ChatRequest(
        system_instruction=bundle.system_instruction,
        messages=(("user", bundle.user_text()),),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        model_id=model_id,
    )


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code(response: str) -> CandidateSolution:
    """First fenced block wins; with no fence the whole reply is the code."""
    match = _FENCE_RE.search(response)
    if match is not None:
        return CandidateSolution(
            code=match.group(1).rstrip("\n"),
            raw_response=response,
            extraction_note="fenced_block",
        )
    return CandidateSolution(
        code=response.strip(), raw_response=response, extraction_note="whole_response"
    )


def generate_solution(request: ChatRequest, gateway: ChatGateway) -> CandidateSolution:
    """One model call, then code extraction. Errors on an empty reply."""
    response = gateway.complete(request)
    if not response.strip():
        raise SolverError("model returned an empty response")
    return extract_code(response)
