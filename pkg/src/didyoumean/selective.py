"""Selective prediction: policies, the coverage/risk report, and the tuner.

A policy decides per example whether to execute the predicted program or
abstain. accept_all executes everything; threshold gates on sequence
confidence; didyoumean additionally shows low-confidence predictions to a
user model as a gloss and executes only on acceptance, either the original
prediction (chosen) or the parse of the gloss itself (reparsed).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .confidence import sequence_confidence
from .errors import (
    DuplicateExample,
    EmptyCorpus,
    EmptyValidation,
    MissingGlossModel,
)
from .gloss import DEFAULT_BEAM, best_gloss, reparse
from .model import decode_corpus

GRID = tuple(i / 100 for i in range(100))

__all__ = [
    "GRID",
    "DecisionRecord",
    "Policy",
    "SelectiveReport",
    "ThresholdPoint",
    "TuneResult",
    "UserModel",
    "evaluate",
    "read_decision_records",
    "run_policy",
    "tune_threshold",
    "write_decision_records",
]


def _unit_interval(seed: int, example_id: str) -> float:
    """Deterministic uniform draw in [0, 1) from (seed, id).

    Stable across processes, unlike hash(), so offline runs and live
    service sessions agree on every flip.
    """
    digest = hashlib.sha256(f"{seed}:{example_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass(frozen=True)
class UserModel:
    """Simulated annotator judging whether to accept a gloss.

    oracle accepts iff the policy's candidate program is correct; noisy
    flips the oracle's answer with probability epsilon, independently per
    example id under the seed; scripted replays a fixed id -> accept map.
    """

    kind: str = "oracle"
    epsilon: float = 0.0
    seed: int = 0
    script: Mapping[str, bool] | None = None

    def __post_init__(self):
        if self.kind not in ("oracle", "noisy", "scripted"):
            raise ValueError(f"unknown user model kind {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.kind == "scripted" and self.script is None:
            raise ValueError("scripted user model needs a script")

    def judge(self, example_id: str, candidate_correct: bool) -> bool:
        if self.kind == "oracle":
            return bool(candidate_correct)
        if self.kind == "noisy":
            flip = _unit_interval(self.seed, example_id) < self.epsilon
            return bool(candidate_correct) ^ flip
        return bool(self.script[example_id])


@dataclass(frozen=True)
class Policy:
    """One of accept_all, threshold(tau), or didyoumean(tau, mode, user)."""

    kind: str
    tau: float = 0.0
    mode: str = "chosen"
    user: UserModel | None = None

    def __post_init__(self):
        if self.kind not in ("accept_all", "threshold", "didyoumean"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.mode not in ("chosen", "reparsed"):
            raise ValueError(f"unknown didyoumean mode {self.mode!r}")
        if not 0.0 <= self.tau <= 1.01:
            raise ValueError(f"tau must lie in [0, 1.01], got {self.tau}")
        if self.kind == "didyoumean" and self.user is None:
            raise ValueError("didyoumean policy needs a user model")

    @classmethod
    def accept_all(cls) -> "Policy":
        return cls(kind="accept_all")

    @classmethod
    def threshold(cls, tau: float) -> "Policy":
        return cls(kind="threshold", tau=tau)

    @classmethod
    def didyoumean(
        cls, tau: float, mode: str = "chosen", user: UserModel | None = None
    ) -> "Policy":
        return cls(kind="didyoumean", tau=tau, mode=mode, user=user or UserModel())


@dataclass(frozen=True)
class DecisionRecord:
    """One policy decision; the JSONL unit of the export format."""

    id: str
    confidence: float
    policy: str
    decision: str
    executed_tokens: tuple[str, ...] | None
    candidate_correct: bool
    gloss: str | None = None
    judgment: bool | None = None

    def __post_init__(self):
        if self.decision not in ("execute", "abstain"):
            raise ValueError(f"unknown decision {self.decision!r}")
        if (self.decision == "execute") != (self.executed_tokens is not None):
            raise ValueError("executed_tokens present iff decision is execute")

    def to_dict(self) -> dict:
        payload: dict = {
            "id": self.id,
            "confidence": self.confidence,
            "policy": self.policy,
            "decision": self.decision,
        }
        if self.executed_tokens is not None:
            payload["executed_tokens"] = list(self.executed_tokens)
        payload["candidate_correct"] = self.candidate_correct
        if self.gloss is not None:
            payload["gloss"] = self.gloss
        if self.judgment is not None:
            payload["judgment"] = self.judgment
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionRecord":
        executed = payload.get("executed_tokens")
        return cls(
            id=payload["id"],
            confidence=payload["confidence"],
            policy=payload["policy"],
            decision=payload["decision"],
            executed_tokens=None if executed is None else tuple(executed),
            candidate_correct=payload["candidate_correct"],
            gloss=payload.get("gloss"),
            judgment=payload.get("judgment"),
        )


def write_decision_records(path, records: Iterable[DecisionRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict()) + "\n")


def read_decision_records(path) -> list[DecisionRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(DecisionRecord.from_dict(json.loads(line)))
    return records


@dataclass(frozen=True)
class SelectiveReport:
    """Coverage/risk table row plus the F scores derived from it."""

    total: int
    executed: int
    coverage: float
    risk: float
    precision: float
    recall: float
    f1: float
    f0_5: float
    false_positives: int
    no_executions: bool

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "executed": self.executed,
            "coverage": self.coverage,
            "risk": self.risk,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "f0_5": self.f0_5,
            "false_positives": self.false_positives,
            "no_executions": self.no_executions,
        }


def _fbeta(precision: float, recall: float, beta: float) -> float:
    denom = beta * beta * precision + recall
    if denom == 0.0:
        return 0.0
    return (1 + beta * beta) * precision * recall / denom


def evaluate(records: Iterable[DecisionRecord]) -> SelectiveReport:
    """Score one record per example into the coverage/risk report.

    recall divides by the candidate-correct pool: examples whose policy
    candidate would have been right had it been executed.
    """
    records = list(records)
    if not records:
        raise EmptyCorpus("cannot evaluate zero decision records")
    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            raise DuplicateExample(f"duplicate decision record for {record.id!r}")
        seen.add(record.id)
    total = len(records)
    executed = sum(1 for r in records if r.decision == "execute")
    correct_executed = sum(
        1 for r in records if r.decision == "execute" and r.candidate_correct
    )
    false_positives = executed - correct_executed
    pool = sum(1 for r in records if r.candidate_correct)
    coverage = executed / total
    if executed:
        risk = false_positives / executed
        precision = 1.0 - risk
    else:
        risk = 0.0
        precision = 0.0
    recall = correct_executed / pool if pool else 0.0
    return SelectiveReport(
        total=total,
        executed=executed,
        coverage=coverage,
        risk=risk,
        precision=precision,
        recall=recall,
        f1=_fbeta(precision, recall, 1.0),
        f0_5=_fbeta(precision, recall, 0.5),
        false_positives=false_positives,
        no_executions=executed == 0,
    )


@dataclass(frozen=True)
class ThresholdPoint:
    tau: float
    coverage: float
    risk: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "coverage": self.coverage,
            "risk": self.risk,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class TuneResult:
    threshold: float
    score: float
    curve: tuple[ThresholdPoint, ...]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "score": self.score,
            "curve": [p.to_dict() for p in self.curve],
        }


def tune_threshold(validation: Iterable[tuple[float, bool]]) -> TuneResult:
    """F1-optimal execute-iff-confidence>=tau threshold over the 0.01 grid.

    Ties break toward the lowest tau, which maximizes coverage at equal F1.
    """
    pairs = list(validation)
    if not pairs:
        raise EmptyValidation("threshold tuning needs a non-empty validation set")
    pool = sum(1 for _, correct in pairs if correct)
    curve = []
    best = None
    for tau in GRID:
        executed = correct_executed = 0
        for confidence, correct in pairs:
            if confidence >= tau:
                executed += 1
                correct_executed += bool(correct)
        coverage = executed / len(pairs)
        precision = correct_executed / executed if executed else 0.0
        risk = 1.0 - precision if executed else 0.0
        recall = correct_executed / pool if pool else 0.0
        point = ThresholdPoint(tau, coverage, risk, _fbeta(precision, recall, 1.0))
        curve.append(point)
        if best is None or point.f1 > best.f1:
            best = point
    return TuneResult(best.tau, best.f1, tuple(curve))


def run_policy(
    policy: Policy,
    examples,
    parse_model,
    gloss_model=None,
    records=None,
    beam: int = DEFAULT_BEAM,
) -> list[DecisionRecord]:
    """Apply one policy across examples, one DecisionRecord each.

    records may carry precomputed decodes (aligned with examples) so
    several policies can share one decoding pass; otherwise the corpus is
    decoded here. Un-terminated decodes are auto-abstained by every policy
    except accept_all.
    """
    examples = list(examples)
    if not examples:
        raise EmptyCorpus("cannot run a policy over zero examples")
    if policy.kind == "didyoumean" and gloss_model is None:
        raise MissingGlossModel("didyoumean policy needs a gloss model")
    if records is None:
        records = decode_corpus(parse_model, examples)
    else:
        records = list(records)
        if [r.id for r in records] != [ex.id for ex in examples]:
            raise ValueError("records are not aligned with examples")

    out = []
    for ex, rec in zip(examples, records):
        decode = rec.decode
        confidence = (
            sequence_confidence(decode) if decode.token_confidences else 0.0
        )
        predicted = tuple(decode.tokens)
        gold = tuple(ex.gold.content_tokens)
        prediction_correct = decode.terminated and predicted == gold

        if policy.kind == "accept_all":
            out.append(
                DecisionRecord(
                    ex.id, confidence, policy.kind, "execute", predicted,
                    prediction_correct,
                )
            )
            continue

        if not decode.terminated:
            out.append(
                DecisionRecord(
                    ex.id, confidence, policy.kind, "abstain", None, False
                )
            )
            continue

        if confidence >= policy.tau:
            out.append(
                DecisionRecord(
                    ex.id, confidence, policy.kind, "execute", predicted,
                    prediction_correct,
                )
            )
            continue

        if policy.kind == "threshold":
            out.append(
                DecisionRecord(
                    ex.id, confidence, policy.kind, "abstain", None,
                    prediction_correct,
                )
            )
            continue

        # didyoumean, low confidence: show the best gloss to the user.
        context = (ex.context_user, ex.context_agent)
        choice = best_gloss(gloss_model, parse_model, context, predicted, beam)
        if policy.mode == "reparsed":
            redecode = reparse(parse_model, context, choice.text)
            candidate = tuple(redecode.tokens)
            candidate_correct = redecode.terminated and candidate == gold
        else:
            candidate = predicted
            candidate_correct = prediction_correct
        accept = policy.user.judge(ex.id, candidate_correct)
        out.append(
            DecisionRecord(
                ex.id,
                confidence,
                policy.kind,
                "execute" if accept else "abstain",
                candidate if accept else None,
                candidate_correct,
                gloss=choice.text,
                judgment=accept,
            )
        )
    return out
