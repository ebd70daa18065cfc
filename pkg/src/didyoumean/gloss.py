"""Gloss generation, cycle-consistent selection, and re-parsing.

A gloss is a natural-language paraphrase of a predicted program. The gloss
model proposes beam candidates conditioned on (dialogue context, program);
each candidate is then scored by the forced log-probability the parse model
assigns to the original program when the candidate stands in for the
utterance, and the best cycle-scoring gloss wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import EmptyBeam, EmptyCorpus, MissingGlossModel
from .model import ModelInput, ScoredDecode, gloss_input, parse_input
from .text import detokenize, tokenize

DEFAULT_BEAM = 5

__all__ = [
    "DEFAULT_BEAM",
    "CycleOutcome",
    "CycleReport",
    "GlossCandidate",
    "GlossChoice",
    "best_gloss",
    "cycle_consistency_eval",
    "reparse",
    "write_gloss_audit",
]


@dataclass(frozen=True)
class GlossCandidate:
    """One beam hypothesis with its cycle score."""

    tokens: tuple[str, ...]
    beam_logprob: float
    cycle_score: float

    @property
    def text(self) -> str:
        return detokenize(list(self.tokens))


@dataclass(frozen=True)
class GlossChoice:
    """The selected gloss plus every candidate retained for audit."""

    candidates: tuple[GlossCandidate, ...]
    index: int

    @property
    def selected(self) -> GlossCandidate:
        return self.candidates[self.index]

    @property
    def text(self) -> str:
        return self.selected.text

    @property
    def cycle_score(self) -> float:
        return self.selected.cycle_score

    def to_dict(self) -> dict:
        return {
            "candidates": [
                {
                    "text": c.text,
                    "beam_logp": c.beam_logprob,
                    "cycle_score": c.cycle_score,
                }
                for c in self.candidates
            ],
            "selected_index": self.index,
        }


def _program_tokens(predicted) -> tuple[str, ...]:
    tokens = getattr(predicted, "content_tokens", predicted)
    return tuple(tokens)


def _parse_input_from_tokens(context, utterance_tokens) -> ModelInput:
    # Builds the parse-direction input directly from gloss tokens so the
    # scoring form can never diverge from a detokenize/tokenize round trip.
    user, agent = context
    return ModelInput(
        (
            ("c", tuple(tokenize(user or ""))),
            ("a", tuple(tokenize(agent or ""))),
            ("u", tuple(utterance_tokens)),
        )
    )


def _check_gloss_model(gloss_model):
    if gloss_model is None:
        raise MissingGlossModel("no gloss model supplied")
    if getattr(gloss_model, "direction", "gloss") != "gloss":
        raise MissingGlossModel("model was not trained in the gloss direction")


def best_gloss(
    gloss_model, parse_model, context, predicted, n: int = DEFAULT_BEAM
) -> GlossChoice:
    """Beam-generate n glosses and pick the most cycle-consistent one.

    Ties in cycle score break toward the lower beam index, preferring the
    more probable paraphrase at equal faithfulness. Raises EmptyBeam when
    no beam hypothesis terminated.
    """
    _check_gloss_model(gloss_model)
    if n < 1:
        raise ValueError(f"beam size must be >= 1, got {n}")
    tokens = _program_tokens(predicted)
    user, agent = context
    hypotheses = gloss_model.beam_search(gloss_input(user, agent, tokens), beam=n)
    finished = [h for h in hypotheses if h.terminated]
    if not finished:
        raise EmptyBeam("gloss beam produced no terminated hypothesis")
    candidates = []
    for hyp in finished:
        cycle, _ = parse_model.forced_score(
            _parse_input_from_tokens(context, hyp.tokens), tokens
        )
        candidates.append(GlossCandidate(hyp.tokens, hyp.logprob, cycle))
    best = 0
    for i, candidate in enumerate(candidates):
        if candidate.cycle_score > candidates[best].cycle_score:
            best = i
    return GlossChoice(tuple(candidates), best)


def reparse(parse_model, context, gloss: str) -> ScoredDecode:
    """Greedy decode with the gloss standing in for the user utterance.

    Gloss words the parse model never saw simply contribute no features,
    which is the count-model equivalent of mapping them to an unknown
    symbol.
    """
    user, agent = context
    return parse_model.decode_greedy(parse_input(user, agent, gloss))


@dataclass(frozen=True)
class CycleOutcome:
    example_id: str
    gloss: str
    reparsed: tuple[str, ...]
    correct: bool


@dataclass(frozen=True)
class CycleReport:
    accuracy: float
    outcomes: tuple[CycleOutcome, ...]


def cycle_consistency_eval(
    gloss_model, parse_model, examples, n: int = DEFAULT_BEAM
) -> CycleReport:
    """Gloss each gold program, re-parse the gloss, and score exact match."""
    examples = list(examples)
    if not examples:
        raise EmptyCorpus("cycle consistency needs at least one example")
    outcomes = []
    for ex in examples:
        context = (ex.context_user, ex.context_agent)
        choice = best_gloss(gloss_model, parse_model, context, ex.gold, n)
        decode = reparse(parse_model, context, choice.text)
        gold = tuple(ex.gold.content_tokens)
        correct = decode.terminated and decode.tokens == gold
        outcomes.append(CycleOutcome(ex.id, choice.text, decode.tokens, correct))
    accuracy = sum(o.correct for o in outcomes) / len(outcomes)
    return CycleReport(accuracy, tuple(outcomes))


def write_gloss_audit(path, entries: Iterable[tuple[str, GlossChoice]]) -> None:
    """JSONL audit trail: one line per example with every candidate."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for example_id, choice in entries:
            record = {"id": example_id, **choice.to_dict()}
            handle.write(json.dumps(record) + "\n")
