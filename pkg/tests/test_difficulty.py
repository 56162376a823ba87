import json

import pytest

from dsagent.corpus import load_corpus
from dsagent.difficulty import (
    DifficultyError,
    DifficultyGuidelines,
    UnparseableJudgment,
    assess_pass_rate,
    assess_problem_based,
    assess_reference_code,
    load_manual,
)
from dsagent.gateway import MockChatGateway
from dsagent.sandbox import StubSandbox

from .conftest import single_turn_set
from .test_corpus import fig_pair_sets

GUIDELINES = DifficultyGuidelines.default()


def load_fig_pair(corpus_builder):
    return load_corpus(corpus_builder(fig_pair_sets()))


def fig_pair_mentor():
    def respond(request):
        text = request.messages[0][1]
        if "largest single number" in text:
            return "Difficulty: 5 - requires counting occurrences within the data"
        return "Difficulty: 2 - only filtering rows on conditions"

    return MockChatGateway(respond=respond)


def test_fig_pair_filtering_scores_below_counting(corpus_builder):
    corpus = load_fig_pair(corpus_builder)
    mentor = fig_pair_mentor()
    filtering = assess_problem_based(corpus.get_set("big-countries"), GUIDELINES, mentor)
    counting = assess_problem_based(corpus.get_set("largest-single-number"), GUIDELINES, mentor)
    assert filtering.score < counting.score


def test_parse_score_and_rationale(corpus_builder):
    corpus = load_fig_pair(corpus_builder)
    mentor = MockChatGateway(default="Difficulty: 7 — requires joins")
    result = assess_problem_based(corpus.problem_sets[0], GUIDELINES, mentor)
    assert result.score == 7
    assert result.rationale == "requires joins"
    assert result.metric == "problem_based"


def test_unparseable_twice_errors_with_raw_response(corpus_builder):
    corpus = load_fig_pair(corpus_builder)
    mentor = MockChatGateway(default="twelve")
    with pytest.raises(UnparseableJudgment) as excinfo:
        assess_problem_based(corpus.problem_sets[0], GUIDELINES, mentor)
    assert excinfo.value.raw_response == "twelve"
    assert mentor.call_count == 2  # one reprompt, then hard error


def test_one_reprompt_can_recover(corpus_builder):
    corpus = load_fig_pair(corpus_builder)
    replies = iter(["no idea", "Difficulty: 4 - second try"])
    mentor = MockChatGateway(respond=lambda r: next(replies))
    result = assess_problem_based(corpus.problem_sets[0], GUIDELINES, mentor)
    assert result.score == 4


def test_score_clamped_to_scale(corpus_builder):
    corpus = load_fig_pair(corpus_builder)
    mentor = MockChatGateway(default="Difficulty: 99")
    result = assess_problem_based(corpus.problem_sets[0], GUIDELINES, mentor)
    assert result.score == GUIDELINES.scale_max


def test_prompt_never_contains_truth_or_reference(corpus_builder):
    sets = fig_pair_sets()
    sets[0]["tasks"][0]["reference_code"] = "secret_reference = 1"
    corpus = load_corpus(corpus_builder(sets))
    mentor = fig_pair_mentor()
    for problem_set in corpus.problem_sets:
        assess_problem_based(problem_set, GUIDELINES, mentor)
    for request in mentor.seen_requests:
        text = request.system_instruction + request.messages[0][1]
        assert "secret_reference" not in text
        assert "Canada" not in text  # ground truth label


REF_SIMPLE = "def f(x):\n  y = x + 1\n  return y"


def stub_with_counts():
    return StubSandbox(
        analyze_counts={
            REF_SIMPLE: {"functions": 1, "variables": 1, "conditions": 0, "loops": 0},
            "": {"functions": 0, "variables": 0, "conditions": 0, "loops": 0},
            "loop_cond": {"functions": 0, "variables": 2, "conditions": 1, "loops": 1},
        }
    )


def test_reference_code_score_is_count_sum(corpus_builder):
    corpus = load_corpus(
        corpus_builder(
            [single_turn_set("r0", "p", {"kind": "value_literal", "expected": "x"},
                             reference_code=REF_SIMPLE)]
        )
    )
    result = assess_reference_code(corpus.problem_sets[0], stub_with_counts())
    assert result.score == 2  # 1 function + 1 variable (parameters excluded)


def test_reference_code_additive_across_turns(corpus_builder):
    multi = {
        "set_id": "m",
        "tasks": [
            {"task_id": "m-t0", "description": "a",
             "answer": {"kind": "value_literal", "expected": "x"},
             "reference_code": REF_SIMPLE},
            {"task_id": "m-t1", "description": "b",
             "answer": {"kind": "value_literal", "expected": "y"},
             "reference_code": "loop_cond"},
        ],
    }
    corpus = load_corpus(corpus_builder([multi]))
    result = assess_reference_code(corpus.problem_sets[0], stub_with_counts())
    assert result.score == 2 + 4


def test_reference_code_requires_reference(corpus_builder):
    corpus = load_corpus(
        corpus_builder([single_turn_set("r1", "p", {"kind": "value_literal", "expected": "x"})])
    )
    with pytest.raises(DifficultyError, match="reference code"):
        assess_reference_code(corpus.problem_sets[0], stub_with_counts())


def passrate_corpus(corpus_builder):
    return load_corpus(
        corpus_builder(
            [
                single_turn_set("w0", "problem zero",
                                {"kind": "value_literal", "expected": "right"}),
                {
                    "set_id": "w1",
                    "tasks": [
                        {"task_id": "w1-t0", "description": "turn zero",
                         "answer": {"kind": "value_literal", "expected": "right"}},
                        {"task_id": "w1-t1", "description": "turn one",
                         "answer": {"kind": "value_literal", "expected": "right"}},
                    ],
                },
            ]
        )
    )


def scripted_weak(answers_by_marker):
    def respond(request):
        text = request.messages[0][1]
        for marker, answer in answers_by_marker.items():
            if marker in text:
                return f"```python\nprint('{answer}')\n```"
        return "```python\nprint('nothing')\n```"

    return MockChatGateway(respond=respond)


def test_pass_rate_all_correct_scores_zero(corpus_builder):
    corpus = passrate_corpus(corpus_builder)
    weak = scripted_weak({"problem zero": "right", "turn zero": "right", "turn one": "right"})
    results = assess_pass_rate(corpus, weak, StubSandbox(), repeats=1)
    assert [r.score for r in results] == [0.0, 0.0]
    assert all(r.metric == "pass_rate" for r in results)


def test_pass_rate_all_wrong_scores_one(corpus_builder):
    corpus = passrate_corpus(corpus_builder)
    weak = scripted_weak({})
    results = assess_pass_rate(corpus, weak, StubSandbox(), repeats=1)
    assert [r.score for r in results] == [1.0, 1.0]


def test_pass_rate_half_correct(corpus_builder):
    corpus = passrate_corpus(corpus_builder)
    weak = scripted_weak({"turn zero": "right"})  # one of w1's two questions
    results = assess_pass_rate(corpus, weak, StubSandbox(), repeats=1)
    assert results[1].score == 0.5


def test_pass_rate_antitone_in_successes(corpus_builder):
    corpus = passrate_corpus(corpus_builder)
    scores = []
    for markers in ({}, {"turn zero": "right"}, {"turn zero": "right", "turn one": "right"}):
        results = assess_pass_rate(corpus, scripted_weak(markers), StubSandbox(), repeats=1)
        scores.append(results[1].score)
    assert scores == sorted(scores, reverse=True)


def test_pass_rate_uses_no_retrieval(corpus_builder):
    corpus = passrate_corpus(corpus_builder)
    weak = scripted_weak({})
    assess_pass_rate(corpus, weak, StubSandbox(), repeats=1)
    for request in weak.seen_requests:
        assert "prior problems" not in request.messages[0][1].lower()


def manual_labels(tmp_path, labels):
    path = tmp_path / "labels.json"
    path.write_text(json.dumps(labels))
    return path


def test_manual_mapping(corpus_builder, tmp_path):
    corpus = load_fig_pair(corpus_builder)
    path = manual_labels(tmp_path, {
        "big-countries": {"level": "easy", "human_pass_rate": 0.8},
        "largest-single-number": {"level": "medium", "human_pass_rate": 0.5},
    })
    results = load_manual(path, corpus)
    assert results[0].score == 1 and results[0].secondary_key == pytest.approx(0.2)
    assert results[1].score == 2


def test_manual_tie_break_by_human_pass_rate(corpus_builder, tmp_path):
    corpus = load_fig_pair(corpus_builder)
    path = manual_labels(tmp_path, {
        "big-countries": {"level": "medium", "human_pass_rate": 0.6},
        "largest-single-number": {"level": "medium", "human_pass_rate": 0.3},
    })
    a, b = load_manual(path, corpus)
    assert b.secondary_key > a.secondary_key  # lower human pass rate ranks harder


def test_manual_missing_set_errors(corpus_builder, tmp_path):
    corpus = load_fig_pair(corpus_builder)
    path = manual_labels(tmp_path, {"big-countries": {"level": "easy", "human_pass_rate": 0.8}})
    with pytest.raises(DifficultyError, match="largest-single-number"):
        load_manual(path, corpus)


def test_manual_out_of_range_pass_rate(corpus_builder, tmp_path):
    corpus = load_fig_pair(corpus_builder)
    path = manual_labels(tmp_path, {
        "big-countries": {"level": "easy", "human_pass_rate": 1.5},
        "largest-single-number": {"level": "hard", "human_pass_rate": 0.2},
    })
    with pytest.raises(DifficultyError, match="human_pass_rate"):
        load_manual(path, corpus)
