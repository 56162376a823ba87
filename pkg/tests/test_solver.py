import pytest

from dsagent.corpus import GroundTruth, Task
from dsagent.gateway import MockChatGateway, MockEmbedder
from dsagent.memory import MemoryEpisode, RetrievedExample
from dsagent.solver import (
    FAILED_ATTEMPT_LABEL,
    SolverError,
    assemble_prompt,
    bundle_to_request,
    extract_code,
    generate_solution,
)


def make_task(description="compute the answer", data_files=(), expected="42"):
    return Task(
        task_id="t0",
        description=description,
        data_files=tuple(data_files),
        answer_spec=GroundTruth(kind="value_literal", expected=expected),
    )


def make_example(description, code, tag="Correct", similarity=0.5, index=0):
    return RetrievedExample(
        episode=MemoryEpisode(
            sequence_index=index,
            problem_description=description,
            generated_code=code,
            tag=tag,
            embedding=MockEmbedder().embed(description),
        ),
        similarity=similarity,
    )


def test_zero_examples_is_valid():
    bundle = assemble_prompt(make_task(), [])
    assert bundle.example_blocks == ()
    assert "compute the answer" in bundle.problem_block
    bundle_to_request(bundle)  # builds a valid request


def test_examples_render_in_given_order():
    examples = [
        make_example("low sim problem", "print(1)", similarity=0.7, index=0),
        make_example("high sim problem", "print(2)", similarity=0.9, index=1),
    ]
    bundle = assemble_prompt(make_task(), examples)
    assert "low sim problem" in bundle.example_blocks[0]
    assert "high sim problem" in bundle.example_blocks[1]
    text = bundle.user_text()
    assert text.index("low sim problem") < text.index("high sim problem")


def test_incorrect_example_labeled_as_failed_attempt():
    bundle = assemble_prompt(make_task(), [make_example("p", "print(0)", tag="Incorrect")])
    assert FAILED_ATTEMPT_LABEL in bundle.example_blocks[0]


def test_data_files_listed():
    bundle = assemble_prompt(make_task(data_files=("data/a.csv", "data/b.csv")), [])
    assert "- data/a.csv" in bundle.file_context
    assert "- data/b.csv" in bundle.file_context


def test_prior_turns_rendered_with_reference():
    bundle = assemble_prompt(
        make_task("turn two"), [],
        prior_turns=[("turn one description", "x = 5")],
    )
    assert "turn one description" in bundle.problem_block
    assert "x = 5" in bundle.problem_block
    assert bundle.problem_block.index("turn one description") < bundle.problem_block.index("turn two")


def test_ground_truth_never_leaks():
    task = make_task(expected="SECRET_ANSWER_VALUE")
    examples = [make_example("p", "print('hi')")]
    bundle = assemble_prompt(task, examples)
    for text in (bundle.system_instruction, bundle.problem_block,
                 bundle.file_context, *bundle.example_blocks):
        assert "SECRET_ANSWER_VALUE" not in text


def test_assembly_is_pure():
    task = make_task()
    examples = [make_example("p", "print(1)")]
    assert assemble_prompt(task, examples) == assemble_prompt(task, examples)


def test_extract_first_fenced_block():
    solution = extract_code("```\nprint(1)\n```")
    assert solution.code == "print(1)"
    assert solution.extraction_note == "fenced_block"


def test_extract_prefers_first_of_two_blocks():
    response = "Here is my plan.\n```python\nprint('first')\n```\nAnd also:\n```\nprint('second')\n```"
    solution = extract_code(response)
    assert solution.code == "print('first')"


def test_extract_whole_response_fallback():
    solution = extract_code("print('no fence here')")
    assert solution.code == "print('no fence here')"
    assert solution.extraction_note == "whole_response"


def test_generate_solution_empty_response_errors():
    gateway = MockChatGateway(default="   ")
    request = bundle_to_request(assemble_prompt(make_task(), []))
    with pytest.raises(SolverError, match="empty"):
        generate_solution(request, gateway)


def test_generate_solution_round_trip():
    gateway = MockChatGateway(default="```python\nprint('ok')\n```")
    request = bundle_to_request(assemble_prompt(make_task(), []))
    solution = generate_solution(request, gateway)
    assert solution.code == "print('ok')"
    assert solution.raw_response.startswith("```")
