import string

from hypothesis import given, strategies as st

from trajdet.filtering import (
    DEFAULT_STOPWORDS,
    FILTER_CATEGORIES,
    KEPT,
    IgnoreSpec,
    classify_token,
    valid_positions,
)
from trajdet.trajectory import StepRecord, TokenRecord


def tok(text, cls="semantic", pos=1, ent=1.0):
    return TokenRecord(pos, text, cls, ent)


def test_control_token_filtered():
    assert classify_token(tok("<|endoftext|>"), IgnoreSpec()) == "control"
    assert classify_token(tok("[PAD]"), IgnoreSpec()) == "control"


def test_boilerplate_filtered():
    assert classify_token(tok("Answer:"), IgnoreSpec()) == "boilerplate"


def test_empty_spec_keeps_everything():
    spec = IgnoreSpec.empty()
    for text in ["Peru", "<|endoftext|>", "the", ".", "##ing", "Answer:"]:
        assert classify_token(tok(text), spec) == KEPT


def test_token_class_tag_wins():
    spec = IgnoreSpec(use_token_class=True)
    assert classify_token(tok("Paris", cls="control"), spec) == "control"
    assert classify_token(tok("<|endoftext|>", cls="semantic"), spec) == "control"


def test_text_rules_without_tags():
    spec = IgnoreSpec(use_token_class=False)
    step = StepRecord(step=0, tokens=(
        TokenRecord(1, "the", "semantic", 1.0),
        TokenRecord(2, "Paris", "semantic", 1.0),
    ))
    assert valid_positions(step, spec) == {2}


def test_punctuation_and_whitespace():
    spec = IgnoreSpec(use_token_class=False)
    assert classify_token(tok("..."), spec) == "lexical_noise"
    assert classify_token(tok("  "), spec) == "lexical_noise"
    assert classify_token(tok("?!"), spec) == "lexical_noise"


def test_subword_prefix():
    spec = IgnoreSpec(use_token_class=False)
    assert classify_token(tok("##ing"), spec) == "subword_fragment"
    assert classify_token(tok("ing"), spec) == KEPT


def test_valid_positions_mixed():
    step = StepRecord(step=3, tokens=(
        TokenRecord(1, "<|endoftext|>", "control", 0.1),
        TokenRecord(2, "Peru", "semantic", 2.0),
        TokenRecord(3, "[PAD]", "control", 0.2),
        TokenRecord(4, "Lima", "semantic", 1.5),
    ))
    assert valid_positions(step, IgnoreSpec()) == {2, 4}


def test_all_filtered_gives_empty_set():
    step = StepRecord(step=0, tokens=(
        TokenRecord(1, "<|endoftext|>", "control", 0.1),
        TokenRecord(2, "[PAD]", "control", 0.1),
    ))
    assert valid_positions(step, IgnoreSpec()) == set()


token_texts = st.text(
    alphabet=string.ascii_letters + string.digits + ".,!?#<>|[]_- ",
    max_size=12,
)


@given(token_texts)
def test_category_partition(text):
    result = classify_token(tok(text), IgnoreSpec(use_token_class=False))
    assert result in (KEPT,) + FILTER_CATEGORIES


@given(st.lists(token_texts, min_size=1, max_size=20), st.sampled_from(sorted(DEFAULT_STOPWORDS)))
def test_monotonicity_enlarging_stopwords(texts, extra_word):
    step = StepRecord(step=0, tokens=tuple(
        TokenRecord(i + 1, t, "semantic", 1.0) for i, t in enumerate(texts)
    ))
    small = IgnoreSpec(use_token_class=False, stopwords=frozenset())
    large = IgnoreSpec(use_token_class=False, stopwords=frozenset({extra_word}))
    assert valid_positions(step, large) <= valid_positions(step, small)


@given(st.lists(token_texts, min_size=1, max_size=20))
def test_idempotence(texts):
    spec = IgnoreSpec(use_token_class=False)
    step = StepRecord(step=0, tokens=tuple(
        TokenRecord(i + 1, t, "semantic", 1.0) for i, t in enumerate(texts)
    ))
    keep = valid_positions(step, spec)
    filtered_step = StepRecord(step=0, tokens=tuple(
        t for t in step.tokens if t.position in keep
    ))
    assert valid_positions(filtered_step, spec) == keep


def test_spec_from_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('{"stopwords": ["FOO"], "use_token_class": false, "subword_prefixes": []}')
    spec = IgnoreSpec.from_file(path)
    assert classify_token(tok("foo"), spec) == "stopword"
    assert classify_token(tok("the"), spec) == KEPT
