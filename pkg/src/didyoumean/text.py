"""The one tokenizer used everywhere.

Utterances are tokenized identically for training, scoring, and display so
that a gloss shown to a user is never re-tokenized differently from the
form that was scored.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9']+|[?.!,]")

_ATTACHED_PUNCT = {"?", ".", "!", ","}


def tokenize(text: str) -> list[str]:
    """Lowercase word/punctuation tokens; punctuation marks are separate tokens."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: list[str]) -> str:
    """Whitespace join with punctuation attached to the preceding word."""
    out: list[str] = []
    for tok in tokens:
        if tok in _ATTACHED_PUNCT and out:
            out[-1] = out[-1] + tok
        else:
            out.append(tok)
    return " ".join(out)
