"""Seeded corpus generation and the JSONL corpus file format.

Each example is a dialogue turn: optional previous-turn context
(user utterance + agent response), the current utterance, and its gold
program. Noise (typos, synonym swaps) is injected per split so the
trained parser is imperfect by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import GrammarEmpty
from .grammar import GrammarSpec, RuleSpec
from .program import Program, decompile

SPLITS = ("train", "validation", "test")

DEFAULT_SIZES = {"train": 5000, "validation": 500, "test": 500}

_MAX_ATTEMPTS = 500


@dataclass(frozen=True)
class DialogueExample:
    id: str
    context_user: str | None
    context_agent: str | None
    utterance: str
    gold: Program
    split: str


@dataclass(frozen=True)
class NoiseSpec:
    typo_rate: float = 0.0
    synonym_rate: float = 0.0


# validation/test carry more noise than train: the parser sees clean-ish
# training text and meets typos and rare synonyms at eval time
DEFAULT_NOISE = {
    "train": NoiseSpec(typo_rate=0.05, synonym_rate=0.03),
    "validation": NoiseSpec(typo_rate=0.20, synonym_rate=0.10),
    "test": NoiseSpec(typo_rate=0.20, synonym_rate=0.10),
}


@dataclass
class Corpus:
    examples: list[DialogueExample]
    meta: dict[str, dict] = field(default_factory=dict)

    def split(self, name: str) -> list[DialogueExample]:
        return [ex for ex in self.examples if ex.split == name]

    def by_id(self, example_id: str) -> DialogueExample:
        for ex in self.examples:
            if ex.id == example_id:
                return ex
        raise KeyError(example_id)

    def __len__(self) -> int:
        return len(self.examples)


def _apply_typo(rng: random.Random, word: str) -> str:
    """One character-level edit; always returns a different string."""
    ops = ["swap", "drop", "double"]
    rng.shuffle(ops)
    for op in ops:
        if op == "swap":
            positions = [i for i in range(len(word) - 1) if word[i] != word[i + 1]]
            if positions:
                i = rng.choice(positions)
                return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
        elif op == "drop":
            i = rng.randrange(len(word))
            out = word[:i] + word[i + 1 :]
            if out != word:
                return out
        else:
            i = rng.randrange(len(word))
            return word[:i] + word[i] + word[i:]
    return word + word[-1]


def _noise_utterance(
    rng: random.Random, utterance: str, noise: NoiseSpec, synonyms: dict[str, str]
) -> tuple[str, bool, bool]:
    words = utterance.split(" ")
    swapped = False
    if synonyms and rng.random() < noise.synonym_rate:
        hits = [i for i, w in enumerate(words) if w in synonyms]
        if hits:
            i = rng.choice(hits)
            words[i] = synonyms[words[i]]
            swapped = True
    typoed = False
    if rng.random() < noise.typo_rate:
        candidates = [i for i, w in enumerate(words) if len(w) >= 4 and w.isalpha()]
        if candidates:
            i = rng.choice(candidates)
            words[i] = _apply_typo(rng, words[i])
            typoed = True
    return " ".join(words), typoed, swapped


def _fill(rng: random.Random, rule: RuleSpec, grammar: GrammarSpec) -> dict[str, str]:
    values = {}
    for slot in sorted(rule.slots):
        pool = grammar.pools[rule.slots[slot]]
        if not pool:
            raise GrammarEmpty(f"literal pool {rule.slots[slot]!r} is empty")
        values[slot] = rng.choice(pool)
    return values


def _context_rules(grammar: GrammarSpec) -> list[RuleSpec]:
    return [
        r
        for r in grammar.rules
        if not r.needs_context
        and r.skeleton.startswith("(createEvent")
        and {"N", "D"} <= set(r.slots)
    ]


def generate_corpus(
    grammar: GrammarSpec,
    seed: int,
    sizes: dict[str, int] | None = None,
    context_rate: float = 0.35,
    noise: dict[str, NoiseSpec] | None = None,
) -> Corpus:
    """Generate a seeded corpus; pure function of its arguments.

    Splits are disjoint by utterance: an utterance string that landed in
    one split is never reused by a later split.
    """
    sizes = dict(DEFAULT_SIZES if sizes is None else sizes)
    noise = dict(DEFAULT_NOISE if noise is None else noise)
    rng = random.Random(seed)

    ctx_rules = _context_rules(grammar)
    plain_rules = [r for r in grammar.rules if not r.needs_context]
    if not plain_rules or not ctx_rules:
        raise GrammarEmpty("grammar lacks usable generation rules")

    utterance_split: dict[str, str] = {}
    examples: list[DialogueExample] = []
    meta: dict[str, dict] = {}

    for split in SPLITS:
        count = sizes.get(split, 0)
        if count <= 0:
            raise GrammarEmpty(f"split {split!r} must have a positive size")
        split_noise = noise.get(split, NoiseSpec())
        for i in range(count):
            for _ in range(_MAX_ATTEMPTS):
                has_ctx = rng.random() < context_rate
                rule = rng.choice(list(grammar.rules) if has_ctx else plain_rules)
                values = _fill(rng, rule, grammar)
                surface = rule.skeleton.format(**values)
                gold = grammar.compile(surface)
                utterance = rng.choice(rule.templates).format(**values)
                context_user = context_agent = None
                if has_ctx:
                    ctx_rule = rng.choice(ctx_rules)
                    ctx_values = _fill(rng, ctx_rule, grammar)
                    context_user = rng.choice(ctx_rule.templates).format(**ctx_values)
                    context_agent = rng.choice(grammar.agent_templates).format(
                        N=ctx_values["N"], D=ctx_values["D"]
                    )
                utterance, typoed, swapped = _noise_utterance(
                    rng, utterance, split_noise, grammar.synonyms
                )
                owner = utterance_split.get(utterance)
                if owner is not None and owner != split:
                    continue
                utterance_split[utterance] = split
                example_id = f"{split}-{i:05d}"
                examples.append(
                    DialogueExample(
                        id=example_id,
                        context_user=context_user,
                        context_agent=context_agent,
                        utterance=utterance,
                        gold=gold,
                        split=split,
                    )
                )
                meta[example_id] = {"rule": rule.name, "typo": typoed, "synonym": swapped}
                break
            else:
                raise GrammarEmpty(
                    f"could not generate a distinct utterance for split {split!r}"
                )
    return Corpus(examples, meta)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """One JSON object per line, fixed field order, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in corpus.examples:
            record = {
                "id": ex.id,
                "context_user": ex.context_user,
                "context_agent": ex.context_agent,
                "utterance": ex.utterance,
                "program_surface": decompile(ex.gold),
                "split": ex.split,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_corpus(path: str | Path, grammar: GrammarSpec) -> Corpus:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            examples.append(
                DialogueExample(
                    id=record["id"],
                    context_user=record["context_user"],
                    context_agent=record["context_agent"],
                    utterance=record["utterance"],
                    gold=grammar.compile(record["program_surface"]),
                    split=record["split"],
                )
            )
    return Corpus(examples)
