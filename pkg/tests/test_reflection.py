import pytest

from genwar.backends import ScriptedBackend, ScriptRule
from genwar.memory import MemoryStream, RetrievalWeights
from genwar.reflection import (
    ReflectionConfig,
    ReflectionError,
    generate_reflection,
    maybe_reflect,
    parse_questions,
    should_reflect,
)
from genwar.scripted import gwa_rules, scripted_backend


def filled_stream(total_importance_each=5, n=5):
    s = MemoryStream("red strategic agent")
    for i in range(n):
        s.append("observation", f"blue agent 7 is accelerating towards the control point at hexagon 10{i:02d}", i,
                 total_importance_each)
    return s


def test_trigger_is_strictly_above_threshold():
    cfg = ReflectionConfig(threshold=20)
    assert not should_reflect(filled_stream(5, 4), cfg, 4)  # exactly 20
    assert should_reflect(filled_stream(5, 5), cfg, 5)


def test_custom_trigger_is_honoured():
    s = filled_stream(1, 1)
    assert should_reflect(s, ReflectionConfig(), 0, trigger=lambda stream, cfg, now: True)


def test_parse_questions_strips_numbering_and_limits():
    reply = "1. First?\n\n2) Second?\n- Third?"
    assert parse_questions(reply, 2) == ["First?", "Second?"]
    assert parse_questions(reply, 5) == ["First?", "Second?", "Third?"]


def test_round_stores_insights_with_sources_and_resets_counter():
    s = filled_stream()
    backend = scripted_backend(capture=True)
    made = maybe_reflect(s, ReflectionConfig(threshold=20, questions_per_round=2), backend, 9)
    assert len(made) == 2
    for r in made:
        assert r.kind == "reflection"
        assert r.sources and all(0 <= i < 5 for i in r.sources)
        assert "poses a significant threat" in r.description
        assert r.importance == 7
    assert s.importance_since_reflection == 0
    assert s.last_reflection_tick == 9
    purposes = [r.purpose for r in backend.requests]
    assert purposes.count("reflection_questions") == 1
    assert purposes.count("reflection_insight") == 2


def test_reflection_is_not_triggered_below_threshold():
    s = filled_stream(1, 3)
    assert maybe_reflect(s, ReflectionConfig(), scripted_backend(), 3) == []
    assert len(s) == 3


def test_failed_round_leaves_stream_untouched():
    s = filled_stream()
    before = [(m.id, m.last_accessed) for m in s.memories]
    # questions and relevance answered, insight request unanswered
    rules = [r for r in gwa_rules() if r.match != "What high-level insight"]
    with pytest.raises(ReflectionError):
        generate_reflection(s, ReflectionConfig(), ScriptedBackend(rules), 40, RetrievalWeights(k=3))
    assert [(m.id, m.last_accessed) for m in s.memories] == before
    assert s.importance_since_reflection == 25


def test_reflections_can_cite_earlier_reflections():
    s = filled_stream()
    first = generate_reflection(s, ReflectionConfig(questions_per_round=1), scripted_backend(), 6)
    for i in range(3):
        s.append("observation", f"blue agent 8 is approaching the control point {i}", 7, 9)
    second = generate_reflection(s, ReflectionConfig(questions_per_round=1), scripted_backend(), 8,
                                 RetrievalWeights(0, 1, 0, k=20))
    assert first[0].id in second[0].sources


def test_empty_stream_resets_without_storing():
    s = MemoryStream("red")
    s.importance_since_reflection = 30
    assert generate_reflection(s, ReflectionConfig(), scripted_backend(), 0) == []
    assert s.importance_since_reflection == 30


def test_config_validation():
    with pytest.raises(ValueError):
        ReflectionConfig(threshold=0)
    with pytest.raises(ValueError):
        ReflectionConfig(questions_per_round=0)


def test_insight_prompt_lists_supporting_statements():
    s = filled_stream()
    backend = ScriptedBackend(gwa_rules(), capture=True)
    generate_reflection(s, ReflectionConfig(questions_per_round=1), backend, 5)
    prompt = next(r.last_user for r in backend.requests if r.purpose == "reflection_insight")
    assert "Statements from the memory of red strategic agent" in prompt
    assert "1. blue agent 7 is accelerating" in prompt
