"""Grammar for the synthetic calendar DSL.

A grammar declares function symbols (with fixed arities and argument
sorts), literal pools, and generation rules. Rules pair a program skeleton
with utterance templates; the corpus generator fills both from the same
slot assignment, so every utterance has a gold program by construction.

Argument sorts come in two kinds: a sort produced by another function
(e.g. ``EventSpec``), or the literal marker ``lit`` meaning the position
takes a quoted literal. Pool membership of literals is deliberately NOT
checked at compile time; an out-of-pool literal is only caught when the
program is executed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import GrammarEmpty

LITERAL_SORT = "lit"


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    args: tuple[str, ...]  # each entry: a result sort or LITERAL_SORT
    result: str

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class RuleSpec:
    """One generation rule: a program skeleton plus utterance templates.

    ``skeleton`` is a canonical surface form with ``{X}`` placeholders;
    ``slots`` maps each placeholder to a literal pool name. ``templates``
    are utterance variants over the same placeholders.
    """

    name: str
    skeleton: str
    slots: dict[str, str]
    templates: tuple[str, ...]
    needs_context: bool = False


@dataclass(frozen=True)
class GrammarSpec:
    functions: dict[str, FunctionSpec]
    pools: dict[str, tuple[str, ...]]
    rules: tuple[RuleSpec, ...]
    agent_templates: tuple[str, ...]  # A0 variants, filled from the context rule's slots
    synonyms: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.rules:
            raise GrammarEmpty("grammar declares no rules")
        for rule in self.rules:
            if not rule.templates:
                raise GrammarEmpty(f"rule {rule.name!r} has no utterance templates")

    def function(self, name: str) -> FunctionSpec | None:
        return self.functions.get(name)

    def top_sorts(self) -> frozenset[str]:
        """Sorts a complete program may have: results no function consumes."""
        consumed = {s for f in self.functions.values() for s in f.args}
        roots = {f.result for f in self.functions.values()} - consumed
        return frozenset(roots or (f.result for f in self.functions.values()))

    # Compilation lives in program.py; re-exported here because every
    # call site already holds a grammar.
    def compile(self, surface: str):
        from .program import compile_surface

        return compile_surface(surface, self)

    def decompile(self, program) -> str:
        from .program import decompile

        return decompile(program)

    def program_from_tokens(self, tokens):
        from .program import program_from_tokens

        return program_from_tokens(tokens, self)

    def to_dict(self) -> dict:
        return {
            "functions": [
                {"name": f.name, "args": list(f.args), "result": f.result}
                for f in self.functions.values()
            ],
            "pools": {k: list(v) for k, v in self.pools.items()},
            "rules": [
                {
                    "name": r.name,
                    "skeleton": r.skeleton,
                    "slots": dict(r.slots),
                    "templates": list(r.templates),
                    "needs_context": r.needs_context,
                }
                for r in self.rules
            ],
            "agent_templates": list(self.agent_templates),
            "synonyms": dict(self.synonyms),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GrammarSpec":
        functions = {
            f["name"]: FunctionSpec(f["name"], tuple(f["args"]), f["result"])
            for f in data["functions"]
        }
        rules = tuple(
            RuleSpec(
                name=r["name"],
                skeleton=r["skeleton"],
                slots=dict(r["slots"]),
                templates=tuple(r["templates"]),
                needs_context=bool(r.get("needs_context", False)),
            )
            for r in data["rules"]
        )
        return cls(
            functions=functions,
            pools={k: tuple(v) for k, v in data["pools"].items()},
            rules=rules,
            agent_templates=tuple(data.get("agent_templates", ())),
            synonyms=dict(data.get("synonyms", {})),
        )


def load_grammar(path: str | Path) -> GrammarSpec:
    """Read a grammar from a .json or .toml config file."""
    path = Path(path)
    if path.suffix == ".toml":
        import tomli

        data = tomli.loads(path.read_text())
    else:
        data = json.loads(path.read_text())
    return GrammarSpec.from_dict(data)


def save_grammar(grammar: GrammarSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grammar.to_dict(), indent=2) + "\n")


# --- built-in calendar grammar ------------------------------------------

_FUNCTIONS = [
    # event construction
    FunctionSpec("name", (LITERAL_SORT,), "EventSpec"),
    FunctionSpec("withDate", ("EventSpec", "Date"), "EventSpec"),
    FunctionSpec("withTime", ("EventSpec", "Time"), "EventSpec"),
    FunctionSpec("withAttendee", ("EventSpec", "Person"), "EventSpec"),
    # value constructors
    FunctionSpec("date", (LITERAL_SORT,), "Date"),
    FunctionSpec("time", (LITERAL_SORT,), "Time"),
    FunctionSpec("person", (LITERAL_SORT,), "Person"),
    # event references (salience operator included)
    FunctionSpec("eventNamed", (LITERAL_SORT,), "EventRef"),
    FunctionSpec("refer", (LITERAL_SORT,), "EventRef"),
    # actions
    FunctionSpec("createEvent", ("EventSpec",), "Action"),
    FunctionSpec("deleteEvent", ("EventRef",), "Action"),
    FunctionSpec("moveEvent", ("EventRef", "Date"), "Action"),
    FunctionSpec("rescheduleEvent", ("EventRef", "Time"), "Action"),
    FunctionSpec("addAttendee", ("EventRef", "Person"), "Action"),
    FunctionSpec("removeAttendee", ("EventRef", "Person"), "Action"),
    # queries
    FunctionSpec("findEvent", ("EventRef",), "Query"),
    FunctionSpec("listEventsOn", ("Date",), "Query"),
    FunctionSpec("listAttendees", ("EventRef",), "Query"),
    FunctionSpec("checkAvailability", ("Person", "Date"), "Query"),
]

_POOLS = {
    "event_name": (
        "standup", "retro", "sprint review", "team sync", "design review",
        "budget meeting", "onboarding", "demo day", "board review",
        "client call", "planning poker", "happy hour", "book club",
        "code review", "product demo", "all hands", "roadmap review",
        "hiring sync", "offsite", "quarterly review", "security training",
        "team dinner", "status check", "press briefing",
    ),
    "person": (
        "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi",
        "ivan", "judy", "mallory", "olivia", "peggy", "quentin", "rupert", "sybil",
    ),
    "date": (
        "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
        "sunday", "tomorrow", "march 3", "april 10", "may 1", "june 12",
        "july 4", "august 19",
    ),
    "time": (
        "9 am", "10 am", "11 am", "noon", "1 pm", "2 pm", "3 pm", "4 pm",
        "5 pm", "6 pm",
    ),
    "ref": ("event",),
}

_N = {"N": "event_name"}
_ND = {"N": "event_name", "D": "date"}
_NT = {"N": "event_name", "T": "time"}
_NP = {"N": "event_name", "P": "person"}
_NDT = {"N": "event_name", "D": "date", "T": "time"}
_NDP = {"N": "event_name", "D": "date", "P": "person"}
_PD = {"P": "person", "D": "date"}

_RULES = [
    RuleSpec(
        "create_basic",
        '(createEvent (name "{N}"))',
        _N,
        (
            "schedule {N}",
            "put {N} on my calendar",
            "book {N}",
            "create {N}",
        ),
    ),
    RuleSpec(
        "create_on_date",
        '(createEvent (withDate (name "{N}") (date "{D}")))',
        _ND,
        (
            "schedule {N} on {D}",
            "set up {N} for {D}",
            "book {N} on {D}",
            "put {N} on the calendar for {D}",
        ),
    ),
    RuleSpec(
        "create_at_time",
        '(createEvent (withTime (withDate (name "{N}") (date "{D}")) (time "{T}")))',
        _NDT,
        (
            "schedule {N} on {D} at {T}",
            "book {N} for {D} at {T}",
            "set up {N} at {T} on {D}",
        ),
    ),
    RuleSpec(
        "create_with_person",
        '(createEvent (withAttendee (withDate (name "{N}") (date "{D}")) (person "{P}")))',
        _NDP,
        (
            "schedule {N} on {D} with {P}",
            "set up {N} with {P} on {D}",
            "book {N} and invite {P} for {D}",
        ),
    ),
    RuleSpec(
        "delete_named",
        '(deleteEvent (eventNamed "{N}"))',
        _N,
        (
            "cancel {N}",
            "delete {N}",
            "take {N} off my calendar",
            "drop {N}",
        ),
    ),
    RuleSpec(
        "delete_refer",
        '(deleteEvent (refer "event"))',
        {},
        (
            "cancel that meeting",
            "delete that event",
            "drop that one",
        ),
        needs_context=True,
    ),
    RuleSpec(
        "move_named",
        '(moveEvent (eventNamed "{N}") (date "{D}"))',
        _ND,
        (
            "move {N} to {D}",
            "push {N} to {D}",
            "reschedule {N} for {D}",
        ),
    ),
    RuleSpec(
        "move_refer",
        '(moveEvent (refer "event") (date "{D}"))',
        {"D": "date"},
        (
            "move that meeting to {D}",
            "push that to {D}",
            "reschedule that one for {D}",
        ),
        needs_context=True,
    ),
    RuleSpec(
        "retime_named",
        '(rescheduleEvent (eventNamed "{N}") (time "{T}"))',
        _NT,
        (
            "move {N} to {T}",
            "shift {N} to {T}",
            "reschedule {N} for {T}",
        ),
    ),
    RuleSpec(
        "add_attendee",
        '(addAttendee (eventNamed "{N}") (person "{P}"))',
        _NP,
        (
            "add {P} to {N}",
            "invite {P} to {N}",
            "put {P} on {N}",
        ),
    ),
    RuleSpec(
        "remove_attendee",
        '(removeAttendee (eventNamed "{N}") (person "{P}"))',
        _NP,
        (
            "remove {P} from {N}",
            "take {P} off {N}",
            "drop {P} from {N}",
        ),
    ),
    RuleSpec(
        "find_named",
        '(findEvent (eventNamed "{N}"))',
        _N,
        (
            "when is {N} ?",
            "find {N}",
            "look up {N}",
        ),
    ),
    RuleSpec(
        "find_refer",
        '(findEvent (refer "event"))',
        {},
        (
            "when is that again ?",
            "what time is that meeting ?",
        ),
        needs_context=True,
    ),
    RuleSpec(
        "list_on_date",
        '(listEventsOn (date "{D}"))',
        {"D": "date"},
        (
            "what is on my calendar {D} ?",
            "list my events for {D}",
            "what do i have {D} ?",
        ),
    ),
    RuleSpec(
        "list_attendees",
        '(listAttendees (eventNamed "{N}"))',
        _N,
        (
            "who is coming to {N} ?",
            "who is invited to {N} ?",
        ),
    ),
    RuleSpec(
        "availability",
        '(checkAvailability (person "{P}") (date "{D}"))',
        _PD,
        (
            "is {P} free on {D} ?",
            "does {P} have time on {D} ?",
            "check if {P} is available {D}",
        ),
    ),
]

_AGENT_TEMPLATES = (
    "done , i scheduled {N} on {D} .",
    "ok , {N} is booked for {D} .",
    "all set , {N} is on {D} .",
)

# one-word paraphrases used as swap noise; swapped-in forms are rarer in
# training than in validation/test, so they behave as mild domain shift
_SYNONYMS = {
    "schedule": "arrange",
    "book": "reserve",
    "cancel": "scrap",
    "delete": "erase",
    "move": "bump",
    "push": "slide",
    "add": "append",
    "remove": "strike",
    "find": "locate",
    "free": "open",
    "meeting": "meetup",
    "invite": "summon",
}


def default_grammar() -> GrammarSpec:
    """The built-in calendar grammar used by all seeded experiments."""
    return GrammarSpec(
        functions={f.name: f for f in _FUNCTIONS},
        pools=dict(_POOLS),
        rules=tuple(_RULES),
        agent_templates=_AGENT_TEMPLATES,
        synonyms=dict(_SYNONYMS),
    )
