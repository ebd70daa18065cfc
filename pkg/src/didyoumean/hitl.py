"""Simulated annotator-in-the-loop decoding.

Greedy decoding proceeds step by step; whenever the model's confidence in
its own next token falls below a threshold, a simulated oracle checks the
decoded prefix against the gold prefix. A mismatch aborts the example; a
match has the oracle supply the gold token and decoding continues. Sweeping
the threshold trades annotator queries for accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import EmptyCorpus
from .model import END, SequenceModel, StepDistribution

DEFAULT_THRESHOLDS = tuple(i / 10 for i in range(11)) + (1.01,)

_TOP_N = 5

__all__ = [
    "DEFAULT_THRESHOLDS",
    "HitlOutcome",
    "HitlReport",
    "StepFlag",
    "simulate_example",
    "summarize",
    "sweep_thresholds",
]


@dataclass(frozen=True)
class StepFlag:
    """Per-step simulation record; top5_hit is None unless queried."""

    queried: bool
    top5_hit: bool | None


@dataclass(frozen=True)
class HitlOutcome:
    """One simulated example: final tokens plus per-step query flags."""

    example_id: str
    tokens: tuple[str, ...]
    flags: tuple[StepFlag, ...]
    aborted: bool
    correct: bool


@dataclass(frozen=True)
class HitlReport:
    """Corpus-level rates for one threshold.

    query_rate divides by decoding steps actually taken, END emissions and
    abort steps included. top5_rate divides by queried steps and is reported
    as 0.0 with no_queries set when nothing was queried.
    """

    threshold: float
    accuracy: float
    query_rate: float
    top5_rate: float
    no_queries: bool

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "accuracy": self.accuracy,
            "query_rate": self.query_rate,
            "top5_rate": self.top5_rate,
            "no_queries": self.no_queries,
        }


def _check_threshold(threshold: float) -> float:
    if not 0.0 <= threshold <= 1.01:
        raise ValueError(f"threshold must lie in [0, 1.01], got {threshold}")
    return float(threshold)


def _simulate(
    example_id: str,
    stepper: Callable[[tuple[str, ...]], StepDistribution],
    gold: tuple[str, ...],
    threshold: float,
    max_len: int,
) -> HitlOutcome:
    tokens: list[str] = []
    flags: list[StepFlag] = []
    aborted = False
    while len(flags) < max_len:
        step = stepper(tuple(tokens))
        top_token, top_p = step.entries[0]
        if not top_p < threshold:
            flags.append(StepFlag(False, None))
            if top_token == END:
                break
            tokens.append(top_token)
            continue
        # Query: the oracle would supply gold[t], or END once gold is spent.
        t = len(tokens)
        if t < len(gold):
            oracle = gold[t]
        elif t == len(gold):
            oracle = END
        else:
            oracle = None
        in_top5 = {tok for tok, _ in step.entries[:_TOP_N]}
        flags.append(StepFlag(True, oracle is not None and oracle in in_top5))
        if tuple(tokens) != gold[:t]:
            aborted = True
            break
        if oracle == END:
            break
        tokens.append(oracle)
    correct = not aborted and tuple(tokens) == gold
    return HitlOutcome(example_id, tuple(tokens), tuple(flags), aborted, correct)


def simulate_example(
    model: SequenceModel, example, threshold: float, max_len: int | None = None
) -> HitlOutcome:
    """Run one example through oracle-assisted greedy decoding.

    A query fires on strict confidence < threshold, so threshold 0 is plain
    greedy decoding and 1.01 queries every step.
    """
    threshold = _check_threshold(threshold)
    model_input = model.input_for(example)
    limit = model.max_len if max_len is None else max_len
    return _simulate(
        example.id,
        lambda prefix: model.step(model_input, prefix),
        tuple(model.output_for(example)),
        threshold,
        limit,
    )


def summarize(threshold: float, outcomes: Iterable[HitlOutcome]) -> HitlReport:
    """Aggregate per-example outcomes into the three sweep metrics."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyCorpus("cannot summarize zero outcomes")
    total_steps = sum(len(o.flags) for o in outcomes)
    queried = sum(1 for o in outcomes for f in o.flags if f.queried)
    hits = sum(1 for o in outcomes for f in o.flags if f.queried and f.top5_hit)
    accuracy = sum(o.correct for o in outcomes) / len(outcomes)
    query_rate = queried / total_steps
    no_queries = queried == 0
    top5_rate = 0.0 if no_queries else hits / queried
    return HitlReport(threshold, accuracy, query_rate, top5_rate, no_queries)


def sweep_thresholds(
    model: SequenceModel,
    examples,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    max_len: int | None = None,
) -> list[HitlReport]:
    """One report per threshold, ascending.

    Step distributions are memoized per example across thresholds; paths
    share long greedy prefixes, so the sweep costs little more than a few
    plain decodes of the corpus.
    """
    grid = [_check_threshold(t) for t in thresholds]
    if grid != sorted(grid):
        raise ValueError("thresholds must be sorted ascending")
    examples = list(examples)
    if not examples:
        raise EmptyCorpus("cannot sweep an empty corpus")
    limit = model.max_len if max_len is None else max_len

    def memo_stepper(example):
        model_input = model.input_for(example)
        cache: dict[tuple[str, ...], StepDistribution] = {}

        def stepper(prefix: tuple[str, ...]) -> StepDistribution:
            hit = cache.get(prefix)
            if hit is None:
                hit = cache[prefix] = model.step(model_input, prefix)
            return hit

        return stepper

    prepared = [
        (ex.id, memo_stepper(ex), tuple(model.output_for(ex))) for ex in examples
    ]
    return [
        summarize(
            t, (_simulate(ex_id, stepper, gold, t, limit) for ex_id, stepper, gold in prepared)
        )
        for t in grid
    ]
