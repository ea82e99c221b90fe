"""Heuristic tagger: whitelist semantics and determinism."""

from clip_sampler.config import MASKABLE_POS
from clip_sampler.pos import tag_caption, tag_word


def test_function_words_are_not_maskable():
    for word in ("a", "the", "in", "and", "is", "it"):
        assert tag_word(word, 1) not in MASKABLE_POS


def test_content_words_are_maskable():
    for word, pos in [("dog", "NOUN"), ("running", "VERB"), ("quickly", "ADV"),
                      ("colorful", "ADJ"), ("three", "NUM"), ("Paris", "PROPN")]:
        assert tag_word(word, 1) == pos
        assert pos in MASKABLE_POS


def test_punctuation_and_digits():
    assert tag_word(".", 3) == "PUNCT"
    assert tag_word("42", 2) == "NUM"
    assert tag_word("3.5", 2) == "NUM"


def test_sentence_initial_capital_is_not_propn():
    assert tag_word("Dog", 0) == "NOUN"
    assert tag_word("Dog", 2) == "PROPN"


def test_tag_caption_indices_contiguous():
    tagged = tag_caption("two dogs play in the snow")
    assert [i for i, _, _ in tagged] == list(range(6))
    assert tag_caption("two dogs play in the snow") == tagged  # deterministic
