"""Rule-based token filtering: drop structural/non-informative tokens before
evidence extraction.

Five categories are filtered: control/boundary markers, lexical noise
(punctuation/whitespace), task boilerplate, stopwords, and subword
continuation fragments. Everything else is kept as semantic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .trajectory import StepRecord, TokenRecord

# Classic ~150-word English stopword list.
DEFAULT_STOPWORDS = frozenset(
    """a about above after again against all am an and any are aren't as at be
    because been before being below between both but by can't cannot could
    couldn't did didn't do does doesn't doing don't down during each few for
    from further had hadn't has hasn't have haven't having he he'd he'll he's
    her here here's hers herself him himself his how how's i i'd i'll i'm i've
    if in into is isn't it it's its itself let's me more most mustn't my myself
    no nor not of off on once only or other ought our ours ourselves out over
    own same shan't she she'd she'll she's should shouldn't so some such than
    that that's the their theirs them themselves then there there's these they
    they'd they'll they're they've this those through to too under until up
    very was wasn't we we'd we'll we're we've were weren't what what's when
    when's where where's which while who who's whom why why's with won't would
    wouldn't you you'd you'll you're you've your yours yourself
    yourselves""".split()
)

# Specials commonly emitted by diffusion LM tokenizers.
DEFAULT_CONTROL_TOKENS = frozenset(
    {
        "<|endoftext|>",
        "<|startoftext|>",
        "<|endofmask|>",
        "<|mdm_mask|>",
        "<|mask|>",
        "[MASK]",
        "[PAD]",
        "[CLS]",
        "[SEP]",
        "[UNK]",
        "<pad>",
        "<s>",
        "</s>",
        "<unk>",
        "<mask>",
        "<eos>",
        "<bos>",
        "<|im_start|>",
        "<|im_end|>",
        "<|eot_id|>",
    }
)

DEFAULT_BOILERPLATE = frozenset(
    {
        "Answer:",
        "Answer",
        "Question:",
        "Question",
        "A:",
        "Q:",
        "The answer is",
        "Response:",
    }
)

DEFAULT_SUBWORD_PREFIXES = ("##", "@@")

KEPT = "kept"
FILTER_CATEGORIES = ("control", "lexical_noise", "boilerplate", "stopword", "subword_fragment")


def _is_lexical_noise(text: str) -> bool:
    stripped = text.strip()
    if text == "":
        return False
    return all(not ch.isalnum() for ch in text) or stripped == ""


@dataclass(frozen=True)
class IgnoreSpec:
    control_tokens: frozenset[str] = DEFAULT_CONTROL_TOKENS
    boilerplate_phrases: frozenset[str] = DEFAULT_BOILERPLATE
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    subword_prefixes: tuple[str, ...] = DEFAULT_SUBWORD_PREFIXES
    use_token_class: bool = True
    drop_lexical_noise: bool = True

    @staticmethod
    def empty() -> "IgnoreSpec":
        """A spec that filters nothing."""
        return IgnoreSpec(
            control_tokens=frozenset(),
            boilerplate_phrases=frozenset(),
            stopwords=frozenset(),
            subword_prefixes=(),
            use_token_class=False,
            drop_lexical_noise=False,
        )

    @staticmethod
    def from_file(path) -> "IgnoreSpec":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return IgnoreSpec(
            control_tokens=frozenset(obj.get("control_tokens", DEFAULT_CONTROL_TOKENS)),
            boilerplate_phrases=frozenset(obj.get("boilerplate_phrases", DEFAULT_BOILERPLATE)),
            stopwords=frozenset(w.lower() for w in obj.get("stopwords", DEFAULT_STOPWORDS)),
            subword_prefixes=tuple(obj.get("subword_prefixes", DEFAULT_SUBWORD_PREFIXES)),
            use_token_class=bool(obj.get("use_token_class", True)),
            drop_lexical_noise=bool(obj.get("drop_lexical_noise", True)),
        )


def classify_token(token: TokenRecord, spec: IgnoreSpec) -> str:
    """Return ``"kept"`` or the filter category the token falls under.

    When ``use_token_class`` is set and the record carries a non-semantic tag,
    the tag wins; otherwise text rules apply in fixed precedence
    control -> boilerplate -> lexical_noise -> stopword -> subword_fragment.
    """
    if spec.use_token_class and token.token_class != "semantic":
        return token.token_class
    text = token.token_text
    if text in spec.control_tokens:
        return "control"
    if text.strip() in spec.boilerplate_phrases:
        return "boilerplate"
    if spec.drop_lexical_noise and _is_lexical_noise(text):
        return "lexical_noise"
    if text.strip().lower() in spec.stopwords:
        return "stopword"
    if any(p and text.startswith(p) for p in spec.subword_prefixes):
        return "subword_fragment"
    return KEPT


def valid_positions(step: StepRecord, spec: IgnoreSpec) -> set[int]:
    """Positions whose tokens survive filtering (may be empty)."""
    return {t.position for t in step.tokens if classify_token(t, spec) == KEPT}


def filter_counts(steps, spec: IgnoreSpec) -> dict[str, int]:
    """Per-category token counts over an iterable of StepRecords."""
    counts = {cat: 0 for cat in FILTER_CATEGORIES}
    counts[KEPT] = 0
    for step in steps:
        for tok in step.tokens:
            counts[classify_token(tok, spec)] += 1
    return counts
