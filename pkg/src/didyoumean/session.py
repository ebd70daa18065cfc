"""Event-sourced confirmation and selection sessions.

A session materializes items from a corpus slice: high-confidence
predictions auto-execute immediately, low-confidence ones wait for human
input, either accept/reject judgments on a gloss (confirm modes) or a pick
from a nucleus candidate list (select mode). Every state transition emits
one event to an append-only log; replaying the log reconstructs the final
session state byte-for-byte, with no models needed.

Execution is sandboxed: each item runs against its own example-derived
world, and faults are captured as outcomes rather than raised.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .confidence import sequence_confidence
from .dsl import execute, program_from_tokens, world_for_example
from .dsl.executor import Event
from .dsl.grammar import GrammarSpec, default_grammar
from .errors import (
    DidYouMeanError,
    DuplicateExample,
    DuplicateJudgment,
    EmptyInput,
    EmptyRewrite,
    ItemClosed,
    ModelMissing,
    NotDecided,
    NothingToExport,
    SelectionIndexOutOfRange,
    UnknownItem,
)
from .gloss import DEFAULT_BEAM, best_gloss, reparse
from .model import decode_corpus, parse_input
from .selective import DecisionRecord, SelectiveReport, evaluate

MODES = ("confirm-chosen", "confirm-reparsed", "select")

AUTO_EXECUTED = "auto-executed"
AWAITING = "awaiting-judgment"
PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
EXECUTED = "executed"
ABSTAINED = "abstained"

_TERMINAL = (AUTO_EXECUTED, EXECUTED, ABSTAINED)

DEFAULT_QUORUM = 3

__all__ = [
    "DEFAULT_QUORUM",
    "MODES",
    "SelectionCandidate",
    "Session",
    "SessionItem",
    "create_session",
    "replay_session",
    "selection_shift",
]


def _jsonable(value):
    if isinstance(value, Event):
        return {
            "name": value.name,
            "date": value.date,
            "time": value.time,
            "attendees": list(value.attendees),
        }
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, frozenset):
        return sorted(value)
    return value


@dataclass(frozen=True)
class SelectionCandidate:
    """One row of a selection list: program, rounded confidence, gloss."""

    tokens: tuple[str, ...]
    confidence: float
    gloss: str

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "confidence": self.confidence,
            "gloss": self.gloss,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SelectionCandidate":
        return cls(
            tuple(payload["tokens"]), payload["confidence"], payload["gloss"]
        )


@dataclass
class SessionItem:
    """Mutable per-example state; every field is JSON-serializable."""

    item_id: str
    context_user: str
    context_agent: str
    utterance: str
    predicted_tokens: tuple[str, ...]
    terminated: bool
    confidence: float
    gold_tokens: tuple[str, ...]
    state: str
    gloss: str | None = None
    candidate_tokens: tuple[str, ...] | None = None
    candidate_correct: bool = False
    judgments: list[dict] = field(default_factory=list)
    unanimous: bool | None = None
    candidates: tuple[SelectionCandidate, ...] | None = None
    chosen_index: int | None = None
    rewrite: str | None = None
    provenance: str | None = None
    record: DecisionRecord | None = None
    execution: dict | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "context_user": self.context_user,
            "context_agent": self.context_agent,
            "utterance": self.utterance,
            "predicted_tokens": list(self.predicted_tokens),
            "terminated": self.terminated,
            "confidence": self.confidence,
            "gold_tokens": list(self.gold_tokens),
            "state": self.state,
            "gloss": self.gloss,
            "candidate_tokens": (
                None
                if self.candidate_tokens is None
                else list(self.candidate_tokens)
            ),
            "candidate_correct": self.candidate_correct,
            "judgments": [dict(j) for j in self.judgments],
            "unanimous": self.unanimous,
            "candidates": (
                None
                if self.candidates is None
                else [c.to_dict() for c in self.candidates]
            ),
            "chosen_index": self.chosen_index,
            "rewrite": self.rewrite,
            "provenance": self.provenance,
            "record": None if self.record is None else self.record.to_dict(),
            "execution": self.execution,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SessionItem":
        return cls(
            item_id=payload["item_id"],
            context_user=payload["context_user"],
            context_agent=payload["context_agent"],
            utterance=payload["utterance"],
            predicted_tokens=tuple(payload["predicted_tokens"]),
            terminated=payload["terminated"],
            confidence=payload["confidence"],
            gold_tokens=tuple(payload["gold_tokens"]),
            state=payload["state"],
            gloss=payload["gloss"],
            candidate_tokens=(
                None
                if payload["candidate_tokens"] is None
                else tuple(payload["candidate_tokens"])
            ),
            candidate_correct=payload["candidate_correct"],
            judgments=[dict(j) for j in payload["judgments"]],
            unanimous=payload["unanimous"],
            candidates=(
                None
                if payload["candidates"] is None
                else tuple(
                    SelectionCandidate.from_dict(c) for c in payload["candidates"]
                )
            ),
            chosen_index=payload["chosen_index"],
            rewrite=payload["rewrite"],
            provenance=payload["provenance"],
            record=(
                None
                if payload["record"] is None
                else DecisionRecord.from_dict(payload["record"])
            ),
            execution=payload["execution"],
        )


class Session:
    """Item queue plus append-only event log.

    Live sessions keep model handles for gloss/reparse/rewrite work;
    replayed sessions carry state only and reject further mutation of the
    kinds that would need a model.
    """

    def __init__(self, *args, **kwargs):
        raise TypeError("use create_session or replay_session")

    @classmethod
    def _bare(cls) -> "Session":
        self = object.__new__(cls)
        self.session_id = ""
        self.mode = MODES[0]
        self.tau = 0.0
        self.quorum = DEFAULT_QUORUM
        self.seed = 0
        self.items = {}
        self.events = []
        self._examples = {}
        self._parse_model = None
        self._grammar = None
        self._log_handle = None
        return self

    # -- event plumbing ------------------------------------------------

    def _emit(self, event: dict) -> None:
        self.events.append(event)
        if self._log_handle is not None:
            self._log_handle.write(json.dumps(event) + "\n")
            self._log_handle.flush()

    def attach_log(self, path) -> None:
        """Start appending events to a JSONL file (past events included)."""
        handle = Path(path).open("a", encoding="utf-8")
        for event in self.events:
            handle.write(json.dumps(event) + "\n")
        handle.flush()
        self._log_handle = handle

    # -- lookups ---------------------------------------------------------

    def _item(self, item_id: str) -> SessionItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItem(f"no item {item_id!r} in session")
        return item

    def items_in_state(self, state: str | None = None) -> list[SessionItem]:
        items = list(self.items.values())
        if state is None:
            return items
        return [item for item in items if item.state == state]

    @property
    def policy_label(self) -> str:
        return "select" if self.mode == "select" else "didyoumean"

    # -- execution -------------------------------------------------------

    def _run_program(self, item: SessionItem, tokens) -> dict:
        example = self._examples.get(item.item_id)
        if example is None or self._grammar is None:
            return {"status": "skipped", "reason": "no world available"}
        try:
            program = program_from_tokens(list(tokens), self._grammar)
            world = world_for_example(self._grammar, example)
            denotation = execute(program, world)
            return {"status": "ok", "value": _jsonable(denotation.value)}
        except DidYouMeanError as err:
            return {"status": "fault", "code": err.code, "message": str(err)}

    # -- confirm workflow --------------------------------------------------

    def submit_judgment(self, item_id: str, worker_id: str, accept: bool) -> str:
        """Record one worker's accept/reject; majority decides at quorum.

        Even-quorum ties resolve to reject. Returns the item state after
        this judgment (accepted/rejected exactly at quorum).
        """
        item = self._item(item_id)
        if item.state != AWAITING:
            raise ItemClosed(f"item {item_id!r} is {item.state}, not awaiting judgment")
        if any(j["worker_id"] == worker_id for j in item.judgments):
            raise DuplicateJudgment(
                f"worker {worker_id!r} already judged item {item_id!r}"
            )
        item.judgments.append({"worker_id": worker_id, "accept": bool(accept)})
        if len(item.judgments) == self.quorum:
            accepts = sum(1 for j in item.judgments if j["accept"])
            item.state = ACCEPTED if accepts > self.quorum - accepts else REJECTED
            item.unanimous = accepts in (0, self.quorum)
        self._emit(
            {
                "event": "judgment_submitted",
                "item_id": item_id,
                "worker_id": worker_id,
                "accept": bool(accept),
                "state": item.state,
                "unanimous": item.unanimous,
            }
        )
        return item.state

    def finalize_item(self, item_id: str) -> DecisionRecord:
        """Turn an accepted/rejected item into an executed/abstained record."""
        item = self._item(item_id)
        if item.state in (AWAITING, PENDING):
            raise NotDecided(f"item {item_id!r} has no decision yet")
        if item.state in _TERMINAL:
            raise ItemClosed(f"item {item_id!r} is already {item.state}")
        accepted = item.state == ACCEPTED
        if accepted:
            item.state = EXECUTED
            item.execution = self._run_program(item, item.candidate_tokens)
        else:
            item.state = ABSTAINED
        item.record = DecisionRecord(
            id=item.item_id,
            confidence=item.confidence,
            policy=self.policy_label,
            decision="execute" if accepted else "abstain",
            executed_tokens=item.candidate_tokens if accepted else None,
            candidate_correct=item.candidate_correct,
            gloss=item.gloss,
            judgment=accepted,
        )
        self._emit(
            {
                "event": "item_finalized",
                "item_id": item_id,
                "state": item.state,
                "record": item.record.to_dict(),
                "execution": item.execution,
            }
        )
        return item.record

    # -- selection workflow ------------------------------------------------

    def submit_selection(
        self, item_id: str, index: int | None = None, rewrite: str | None = None
    ) -> DecisionRecord:
        """Execute a chosen candidate or the parse of a manual rewrite."""
        if self.mode != "select":
            raise ValueError(f"session mode is {self.mode!r}, not select")
        item = self._item(item_id)
        if item.state != PENDING:
            raise ItemClosed(f"item {item_id!r} is {item.state}, not pending")
        if (index is None) == (rewrite is None):
            raise ValueError("provide exactly one of index or rewrite")

        if index is not None:
            if not 0 <= index < len(item.candidates):
                raise SelectionIndexOutOfRange(
                    f"index {index} outside candidate list of "
                    f"{len(item.candidates)}"
                )
            chosen = item.candidates[index]
            tokens = chosen.tokens
            item.chosen_index = index
            item.provenance = "selected"
            item.gloss = chosen.gloss
            correct = tokens == item.gold_tokens
        else:
            text = rewrite.strip()
            if not text:
                raise EmptyRewrite("rewrite text is empty")
            if self._parse_model is None:
                raise ModelMissing("replayed sessions cannot parse rewrites")
            decode = self._parse_model.decode_greedy(
                parse_input(item.context_user, item.context_agent, text)
            )
            tokens = decode.tokens
            item.rewrite = text
            item.provenance = "rewritten"
            correct = decode.terminated and tokens == item.gold_tokens

        item.candidate_tokens = tokens
        item.candidate_correct = correct
        item.state = EXECUTED
        item.execution = self._run_program(item, tokens)
        item.record = DecisionRecord(
            id=item.item_id,
            confidence=item.confidence,
            policy=self.policy_label,
            decision="execute",
            executed_tokens=tokens,
            candidate_correct=correct,
            gloss=item.gloss,
        )
        self._emit(
            {
                "event": "selection_submitted",
                "item_id": item_id,
                "provenance": item.provenance,
                "chosen_index": item.chosen_index,
                "rewrite": item.rewrite,
                "gloss": item.gloss,
                "record": item.record.to_dict(),
                "execution": item.execution,
            }
        )
        return item.record

    # -- reporting ---------------------------------------------------------

    def export_records(self) -> list[DecisionRecord]:
        """Finalized records in item creation order."""
        records = [i.record for i in self.items.values() if i.record is not None]
        if not records:
            raise NothingToExport("no finalized or auto-executed items")
        return records

    def report(self) -> SelectiveReport:
        return evaluate(self.export_records())

    def state_counts(self) -> dict:
        counts: dict[str, int] = {}
        for item in self.items.values():
            counts[item.state] = counts.get(item.state, 0) + 1
        return counts

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> bytes:
        """Canonical byte serialization of the full session state."""
        state = {
            "session_id": self.session_id,
            "mode": self.mode,
            "tau": self.tau,
            "quorum": self.quorum,
            "seed": self.seed,
            "items": [item.to_dict() for item in self.items.values()],
        }
        return json.dumps(state, sort_keys=True, separators=(",", ":")).encode(
            "utf-8"
        )


def create_session(
    examples,
    mode: str,
    tau: float,
    parse_model,
    gloss_model=None,
    *,
    records=None,
    grammar: GrammarSpec | None = None,
    quorum: int = DEFAULT_QUORUM,
    seed: int = 0,
    beam: int = DEFAULT_BEAM,
    session_id: str | None = None,
    log_path=None,
) -> Session:
    """Materialize items, auto-executing everything at or above tau.

    Low-confidence items get their gloss (confirm modes) or nucleus
    candidate list with per-candidate glosses (select mode) computed up
    front, so replay and the UI never need model access.
    """
    if mode not in MODES:
        raise ValueError(f"unknown session mode {mode!r}")
    if not 0.0 <= tau <= 1.01:
        raise ValueError(f"tau must lie in [0, 1.01], got {tau}")
    if quorum < 1:
        raise ValueError(f"quorum must be >= 1, got {quorum}")
    if parse_model is None:
        raise ModelMissing("session needs a parse model")
    if gloss_model is None:
        raise ModelMissing("session needs a gloss model for user-facing text")
    examples = list(examples)
    if not examples:
        raise EmptyInput("session needs at least one example")

    if records is None:
        records = decode_corpus(parse_model, examples)
    else:
        records = list(records)
        if [r.id for r in records] != [ex.id for ex in examples]:
            raise ValueError("records are not aligned with examples")

    session = Session._bare()
    session.session_id = session_id or uuid.uuid4().hex[:12]
    session.mode = mode
    session.tau = float(tau)
    session.quorum = quorum
    session.seed = seed
    session._parse_model = parse_model
    session._grammar = grammar or default_grammar()

    for ex, rec in zip(examples, records):
        if ex.id in session.items:
            raise DuplicateExample(f"duplicate example id {ex.id!r}")
        decode = rec.decode
        confidence = (
            sequence_confidence(decode) if decode.token_confidences else 0.0
        )
        predicted = tuple(decode.tokens)
        gold = tuple(ex.gold.content_tokens)
        context = (ex.context_user, ex.context_agent)
        item = SessionItem(
            item_id=ex.id,
            context_user=ex.context_user,
            context_agent=ex.context_agent,
            utterance=ex.utterance,
            predicted_tokens=predicted,
            terminated=decode.terminated,
            confidence=confidence,
            gold_tokens=gold,
            state=PENDING,
        )
        session._examples[ex.id] = ex

        if decode.terminated and confidence >= session.tau:
            item.state = AUTO_EXECUTED
            item.candidate_tokens = predicted
            item.candidate_correct = predicted == gold
        elif not decode.terminated:
            item.state = ABSTAINED
            item.candidate_correct = False
        elif mode == "select":
            nucleus = parse_model.nucleus_candidates(
                parse_model.input_for(ex), seed=seed
            )
            rows = []
            for candidate in nucleus:
                choice = best_gloss(
                    gloss_model, parse_model, context, candidate.tokens, beam
                )
                rows.append(
                    SelectionCandidate(
                        tokens=tuple(candidate.tokens),
                        confidence=round(candidate.min_confidence, 2),
                        gloss=choice.text,
                    )
                )
            item.candidates = tuple(rows)
            item.state = PENDING
        else:
            choice = best_gloss(gloss_model, parse_model, context, predicted, beam)
            item.gloss = choice.text
            if mode == "confirm-reparsed":
                redecode = reparse(parse_model, context, choice.text)
                item.candidate_tokens = tuple(redecode.tokens)
                item.candidate_correct = (
                    redecode.terminated and item.candidate_tokens == gold
                )
            else:
                item.candidate_tokens = predicted
                item.candidate_correct = predicted == gold
            item.state = AWAITING

        session.items[ex.id] = item

    session._emit(
        {
            "event": "session_created",
            "session_id": session.session_id,
            "mode": session.mode,
            "tau": session.tau,
            "quorum": session.quorum,
            "seed": session.seed,
            "items": [item.to_dict() for item in session.items.values()],
        }
    )

    # Auto decisions are their own transitions, logged after creation.
    for item in session.items.values():
        if item.state == AUTO_EXECUTED:
            item.execution = session._run_program(item, item.candidate_tokens)
            item.record = DecisionRecord(
                id=item.item_id,
                confidence=item.confidence,
                policy=session.policy_label,
                decision="execute",
                executed_tokens=item.candidate_tokens,
                candidate_correct=item.candidate_correct,
            )
            session._emit(
                {
                    "event": "item_auto_executed",
                    "item_id": item.item_id,
                    "record": item.record.to_dict(),
                    "execution": item.execution,
                }
            )
        elif item.state == ABSTAINED and item.record is None:
            item.record = DecisionRecord(
                id=item.item_id,
                confidence=item.confidence,
                policy=session.policy_label,
                decision="abstain",
                executed_tokens=None,
                candidate_correct=False,
            )
            session._emit(
                {
                    "event": "item_auto_abstained",
                    "item_id": item.item_id,
                    "record": item.record.to_dict(),
                }
            )

    if log_path is not None:
        session.attach_log(log_path)
    return session


def selection_shift(session: Session, n_bins: int = 10) -> list[dict]:
    """Pre/post exact-match accuracy per confidence bin.

    Pre is the greedy prediction's correctness, post is the correctness of
    what actually executed. Items still open (no record yet) are skipped.
    Bins are equal-width over [0, 1] with the last bin closed.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    bins = [
        {
            "lower": i / n_bins,
            "upper": (i + 1) / n_bins,
            "count": 0,
            "pre_correct": 0,
            "post_correct": 0,
        }
        for i in range(n_bins)
    ]
    for item in session.items.values():
        if item.record is None:
            continue
        slot = bins[min(int(item.confidence * n_bins), n_bins - 1)]
        slot["count"] += 1
        if item.terminated and item.predicted_tokens == item.gold_tokens:
            slot["pre_correct"] += 1
        if item.record.decision == "execute" and item.record.candidate_correct:
            slot["post_correct"] += 1
    for slot in bins:
        n = slot["count"]
        slot["pre_accuracy"] = slot["pre_correct"] / n if n else 0.0
        slot["post_accuracy"] = slot["post_correct"] / n if n else 0.0
    return bins


def replay_session(events: Iterable[dict] | str | Path) -> Session:
    """Rebuild a session purely from its event log.

    Accepts an event list or a JSONL log path. The result has no model or
    world handles; it is a faithful read-model of the logged state.
    """
    if isinstance(events, (str, Path)):
        with Path(events).open("r", encoding="utf-8") as handle:
            events = [json.loads(line) for line in handle if line.strip()]
    else:
        events = list(events)
    if not events or events[0].get("event") != "session_created":
        raise ValueError("event log must start with session_created")

    session = Session._bare()
    created = events[0]
    session.session_id = created["session_id"]
    session.mode = created["mode"]
    session.tau = created["tau"]
    session.quorum = created["quorum"]
    session.seed = created["seed"]
    for payload in created["items"]:
        item = SessionItem.from_dict(payload)
        session.items[item.item_id] = item
    session.events.append(created)

    for event in events[1:]:
        kind = event["event"]
        item = session.items[event["item_id"]]
        if kind == "item_auto_executed":
            item.record = DecisionRecord.from_dict(event["record"])
            item.execution = event["execution"]
            item.state = AUTO_EXECUTED
        elif kind == "item_auto_abstained":
            item.record = DecisionRecord.from_dict(event["record"])
            item.state = ABSTAINED
        elif kind == "judgment_submitted":
            item.judgments.append(
                {"worker_id": event["worker_id"], "accept": event["accept"]}
            )
            item.state = event["state"]
            item.unanimous = event["unanimous"]
        elif kind == "item_finalized":
            item.state = event["state"]
            item.record = DecisionRecord.from_dict(event["record"])
            item.execution = event["execution"]
        elif kind == "selection_submitted":
            item.provenance = event["provenance"]
            item.chosen_index = event["chosen_index"]
            item.rewrite = event["rewrite"]
            item.gloss = event["gloss"]
            item.record = DecisionRecord.from_dict(event["record"])
            item.execution = event["execution"]
            item.candidate_tokens = item.record.executed_tokens
            item.candidate_correct = item.record.candidate_correct
            item.state = EXECUTED
        else:
            raise ValueError(f"unknown event type {kind!r}")
        session.events.append(event)
    return session
