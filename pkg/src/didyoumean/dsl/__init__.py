from .grammar import (
    FunctionSpec,
    GrammarSpec,
    RuleSpec,
    default_grammar,
    load_grammar,
    save_grammar,
)
from .program import (
    Call,
    Literal,
    Program,
    compile_surface,
    decompile,
    exact_match,
    program_from_tokens,
)
from .executor import Denotation, Event, WorldState, build_world, execute, world_for_example
from .corpus import (
    Corpus,
    DialogueExample,
    NoiseSpec,
    generate_corpus,
    read_corpus,
    write_corpus,
)

__all__ = [
    "Call",
    "Corpus",
    "Denotation",
    "DialogueExample",
    "Event",
    "FunctionSpec",
    "GrammarSpec",
    "Literal",
    "NoiseSpec",
    "Program",
    "RuleSpec",
    "WorldState",
    "build_world",
    "compile_surface",
    "decompile",
    "default_grammar",
    "exact_match",
    "execute",
    "generate_corpus",
    "load_grammar",
    "program_from_tokens",
    "read_corpus",
    "save_grammar",
    "world_for_example",
    "write_corpus",
]
