"""Deterministic executor for calendar programs.

Execution never mutates a world in place; the post-state travels inside
the returned Denotation. Out-of-domain literals (a person nobody knows, a
date outside the recognized vocabulary) raise ExecutionFault — the
runtime failure mode that confidence thresholds are meant to keep from
happening in the first place.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

from ..errors import ExecutionFault
from .grammar import GrammarSpec
from .program import Call, Literal, Program


@dataclass(frozen=True)
class Event:
    name: str
    date: str | None = None
    time: str | None = None
    attendees: tuple[str, ...] = ()


@dataclass(frozen=True)
class WorldState:
    events: tuple[Event, ...]
    people: frozenset[str]
    dates: frozenset[str]
    times: frozenset[str]

    def most_recent_event(self) -> Event:
        if not self.events:
            raise ExecutionFault("no salient event to refer to")
        return self.events[-1]

    def find_event(self, name: str) -> Event | None:
        for event in self.events:
            if event.name == name:
                return event
        return None


@dataclass(frozen=True)
class Denotation:
    value: object
    world: WorldState


def build_world(grammar: GrammarSpec) -> WorldState:
    """Fixed synthetic world derived from the grammar's literal pools."""
    names = grammar.pools["event_name"]
    dates = grammar.pools["date"]
    times = grammar.pools["time"]
    people = grammar.pools["person"]
    starter = (
        Event(names[0], dates[0], times[0], (people[0], people[1])),
        Event(names[1], dates[1], None, (people[2],)),
        Event(names[2], dates[2], times[1], ()),
    )
    return WorldState(
        events=starter,
        people=frozenset(people),
        dates=frozenset(dates),
        times=frozenset(times),
    )


def _named_refs(node) -> list[str]:
    if isinstance(node, Literal):
        return []
    if node.fn == "eventNamed":
        return [node.args[0].value]
    out: list[str] = []
    for arg in node.args:
        out.extend(_named_refs(arg))
    return out


def world_for_example(grammar: GrammarSpec, example) -> WorldState:
    """World in which an example's programs are executed.

    Events the gold program refers to by name exist up front (the user
    asks about them because they are on the calendar). Contextful
    examples get the previous turn's event appended last, so the
    salience operator resolves to it.
    """
    world = build_world(grammar)
    events = list(world.events)
    dates = grammar.pools["date"]
    times = grammar.pools["time"]
    have = {e.name for e in events}
    for name in _named_refs(example.gold.tree):
        if name in have:
            continue
        slot = zlib.crc32(name.encode("utf-8"))
        events.append(Event(name, dates[slot % len(dates)], times[slot % len(times)]))
        have.add(name)
    if example.context_user:
        ctx = example.context_user
        name = None
        for candidate in sorted(grammar.pools["event_name"], key=len, reverse=True):
            if candidate in ctx:
                name = candidate
                break
        if name is not None:
            date = next((d for d in dates if d in ctx), None)
            time = next((t for t in times if t in ctx), None)
            events = [e for e in events if e.name != name]
            events.append(Event(name, date, time))
    return replace(world, events=tuple(events))


def _eval_literal(lit: Literal, pool: frozenset[str], kind: str) -> str:
    if lit.value not in pool:
        raise ExecutionFault(f"unknown {kind} {lit.value!r}")
    return lit.value


@dataclass(frozen=True)
class _EventSpecValue:
    name: str
    date: str | None = None
    time: str | None = None
    attendees: tuple[str, ...] = ()


def _eval(node, world: WorldState):
    if isinstance(node, Literal):
        return node.value
    fn, args = node.fn, node.args
    if fn == "name":
        return _EventSpecValue(name=args[0].value)
    if fn == "withDate":
        spec = _eval(args[0], world)
        return replace(spec, date=_eval(args[1], world))
    if fn == "withTime":
        spec = _eval(args[0], world)
        return replace(spec, time=_eval(args[1], world))
    if fn == "withAttendee":
        spec = _eval(args[0], world)
        person = _eval(args[1], world)
        if person not in spec.attendees:
            spec = replace(spec, attendees=spec.attendees + (person,))
        return spec
    if fn == "date":
        return _eval_literal(args[0], world.dates, "date")
    if fn == "time":
        return _eval_literal(args[0], world.times, "time")
    if fn == "person":
        return _eval_literal(args[0], world.people, "person")
    if fn == "eventNamed":
        return ("named", args[0].value)
    if fn == "refer":
        if args[0].value != "event":
            raise ExecutionFault(f"cannot refer to {args[0].value!r}")
        return ("salient", world.most_recent_event().name)
    raise ExecutionFault(f"no evaluator for {fn!r}")


def _resolve_ref(ref, world: WorldState, required: bool) -> Event | None:
    _, name = ref
    event = world.find_event(name)
    if event is None and required:
        raise ExecutionFault(f"no event named {name!r}")
    return event


def _replace_event(world: WorldState, old: Event, new: Event) -> WorldState:
    events = tuple(new if e is old else e for e in world.events)
    return replace(world, events=events)


def execute(program: Program, world: WorldState) -> Denotation:
    """Execute a top-level action or query. Pure; post-state in the result."""
    top = program.tree
    fn, args = top.fn, top.args

    if fn == "createEvent":
        spec = _eval(args[0], world)
        event = Event(spec.name, spec.date, spec.time, spec.attendees)
        new_world = replace(world, events=world.events + (event,))
        return Denotation({"created": event.name, "date": event.date}, new_world)

    if fn == "deleteEvent":
        event = _resolve_ref(_eval(args[0], world), world, required=True)
        events = tuple(e for e in world.events if e is not event)
        return Denotation({"deleted": event.name}, replace(world, events=events))

    if fn == "moveEvent":
        event = _resolve_ref(_eval(args[0], world), world, required=True)
        new_date = _eval(args[1], world)
        new_world = _replace_event(world, event, replace(event, date=new_date))
        return Denotation({"moved": event.name, "date": new_date}, new_world)

    if fn == "rescheduleEvent":
        event = _resolve_ref(_eval(args[0], world), world, required=True)
        new_time = _eval(args[1], world)
        new_world = _replace_event(world, event, replace(event, time=new_time))
        return Denotation({"moved": event.name, "time": new_time}, new_world)

    if fn == "addAttendee":
        event = _resolve_ref(_eval(args[0], world), world, required=True)
        person = _eval(args[1], world)
        if person in event.attendees:
            return Denotation({"added": None, "event": event.name}, world)
        new_world = _replace_event(
            world, event, replace(event, attendees=event.attendees + (person,))
        )
        return Denotation({"added": person, "event": event.name}, new_world)

    if fn == "removeAttendee":
        event = _resolve_ref(_eval(args[0], world), world, required=True)
        person = _eval(args[1], world)
        if person not in event.attendees:
            return Denotation({"removed": None, "event": event.name}, world)
        attendees = tuple(a for a in event.attendees if a != person)
        new_world = _replace_event(world, event, replace(event, attendees=attendees))
        return Denotation({"removed": person, "event": event.name}, new_world)

    if fn == "findEvent":
        event = _resolve_ref(_eval(args[0], world), world, required=False)
        return Denotation(event, world)

    if fn == "listEventsOn":
        target = _eval(args[0], world)
        found = tuple(e for e in world.events if e.date == target)
        return Denotation(found, world)

    if fn == "listAttendees":
        event = _resolve_ref(_eval(args[0], world), world, required=False)
        return Denotation(event.attendees if event else None, world)

    if fn == "checkAvailability":
        person = _eval(args[0], world)
        target = _eval(args[1], world)
        busy = any(e.date == target and person in e.attendees for e in world.events)
        return Denotation({"person": person, "date": target, "free": not busy}, world)

    raise ExecutionFault(f"{fn!r} is not executable at top level")
