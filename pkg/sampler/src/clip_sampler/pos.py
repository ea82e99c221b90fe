"""Deterministic rule-based part-of-speech tagging.

A lightweight stand-in for a proper POS model: closed-class function words
come from a fixed lexicon, numerals and punctuation from patterns, and the
open classes from suffix heuristics with NOUN as the default.  Only the
maskable/non-maskable distinction matters downstream, and the emitted tag
strings travel in the output file, so a consumer never depends on this
module's choices.  Swap in a real tagger by passing ``tagger=`` to the
pipeline.
"""

from __future__ import annotations

import re

_DET = {"a", "an", "the", "this", "that", "these", "those", "some", "any",
        "no", "every", "each", "either", "neither", "both", "all", "its",
        "his", "her", "their", "our", "my", "your"}
_ADP = {"in", "on", "at", "of", "to", "from", "with", "without", "by",
        "for", "about", "against", "between", "into", "through", "during",
        "before", "after", "above", "below", "under", "over", "near",
        "across", "behind", "beside", "around", "along", "off", "up",
        "down", "onto", "upon", "inside", "outside"}
_CONJ = {"and", "or", "but", "nor", "so", "yet", "while", "because",
         "although", "though", "if", "unless", "since", "as", "whereas"}
_PRON = {"i", "you", "he", "she", "it", "we", "they", "me", "him", "us",
         "them", "who", "whom", "which", "what", "there", "here"}
_AUX = {"is", "are", "was", "were", "be", "been", "being", "am", "has",
        "have", "had", "do", "does", "did", "will", "would", "can",
        "could", "may", "might", "shall", "should", "must", "not"}
_PART = {"'s", "n't", "'re", "'ve", "'ll", "'d"}

_NUMBER_WORDS = {"zero", "one", "two", "three", "four", "five", "six",
                 "seven", "eight", "nine", "ten", "eleven", "twelve",
                 "dozen", "twenty", "thirty", "forty", "fifty", "hundred",
                 "thousand", "million"}

_PUNCT_RE = re.compile(r"^\W+$", re.UNICODE)
_DIGIT_RE = re.compile(r"^\d+([.,:/-]\d+)*$")

_ADJ_SUFFIXES = ("ful", "ous", "ive", "able", "ible", "ish", "less", "ic", "ary")


def tag_word(surface: str, position: int) -> str:
    lower = surface.lower()
    if _PUNCT_RE.match(surface):
        return "PUNCT"
    if _DIGIT_RE.match(surface) or lower in _NUMBER_WORDS:
        return "NUM"
    if lower in _DET:
        return "DET"
    if lower in _ADP:
        return "ADP"
    if lower in _CONJ:
        return "CCONJ"
    if lower in _PRON:
        return "PRON"
    if lower in _AUX:
        return "AUX"
    if lower in _PART:
        return "PART"
    if position > 0 and surface[:1].isupper():
        return "PROPN"
    if lower.endswith("ly") and len(lower) > 3:
        return "ADV"
    if lower.endswith(_ADJ_SUFFIXES):
        return "ADJ"
    if (lower.endswith("ing") or lower.endswith("ed")) and len(lower) > 4:
        return "VERB"
    return "NOUN"


def tag_caption(text: str) -> list[tuple[int, str, str]]:
    """Whitespace-tokenize and tag; returns (index, surface, pos) triples."""
    words = text.split()
    return [(i, w, tag_word(w, i)) for i, w in enumerate(words)]
