"""Toy tokenizer: a fixed word-level vocabulary with tag tables.

The vocabulary covers all five filtered token categories plus content words
so that captured trajectories exercise the downstream filter.
"""

from __future__ import annotations

MASK_TOKEN = "[MASK]"

CONTROL_TOKENS = (MASK_TOKEN, "<|endoftext|>", "[PAD]", "<s>", "</s>")
PUNCTUATION = (".", ",", "?", "!", ";", ":")
STOPWORDS = ("the", "a", "an", "of", "and", "to", "in", "is", "it", "was",
             "on", "for", "with", "as", "at", "by")
SUBWORD_FRAGMENTS = ("##ing", "##ed", "##s", "##ly", "##er")
BOILERPLATE = ("Answer:", "Question:")

CONTENT_WORDS = (
    "paris", "london", "berlin", "tokyo", "cairo", "lima", "oslo", "rome",
    "france", "england", "germany", "japan", "egypt", "peru", "norway",
    "italy", "capital", "country", "city", "river", "mountain", "ocean",
    "king", "queen", "year", "number", "color", "planet",
) + tuple(f"tok{i}" for i in range(100))


def default_vocab() -> list[str]:
    return list(CONTROL_TOKENS + PUNCTUATION + STOPWORDS + SUBWORD_FRAGMENTS
                + BOILERPLATE + CONTENT_WORDS)


def tag_token(text: str) -> str:
    """Assign exactly one of the six token classes from the tag tables."""
    if text in CONTROL_TOKENS:
        return "control"
    if text in BOILERPLATE:
        return "boilerplate"
    if text and all(not ch.isalnum() for ch in text):
        return "lexical_noise"
    if text.lower() in STOPWORDS:
        return "stopword"
    if text.startswith("##"):
        return "subword_fragment"
    return "semantic"


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization against the toy vocabulary; unknown words map
    to the nearest content token by hash so every prompt encodes."""
    words = text.split()
    vocab = default_vocab()
    known = set(vocab)
    out = []
    for w in words:
        lw = w.lower() if w.lower() in known else w
        if lw in known:
            out.append(lw)
        else:
            out.append(CONTENT_WORDS[hash(w) % len(CONTENT_WORDS)])
    return out or [CONTENT_WORDS[0]]
