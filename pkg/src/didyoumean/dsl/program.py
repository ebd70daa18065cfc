"""Programs: surface s-expressions vs. the content-token canonical form.

A Program stores only content tokens (function symbols and quoted
literals, no brackets) plus the call tree. Brackets are reconstructed
from declared arities, so ``decompile(compile(s)) == s`` for canonical
surfaces and ``compile(decompile(p)) == p`` for any well-formed program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from ..errors import (
    ArityViolation,
    EmptyProgram,
    MalformedProgram,
    MalformedSurface,
    UnknownSymbol,
)
from .grammar import LITERAL_SORT, GrammarSpec


@dataclass(frozen=True)
class Literal:
    value: str  # unquoted

    @property
    def token(self) -> str:
        return f'"{self.value}"'


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Node", ...]


Node = Union[Call, Literal]


@dataclass(frozen=True)
class Program:
    content_tokens: tuple[str, ...]
    tree: Call

    def __len__(self) -> int:
        return len(self.content_tokens)


def _lex(surface: str) -> list[str]:
    """Split a surface form into '(', ')', quoted literals, and symbols."""
    tokens: list[str] = []
    i, n = 0, len(surface)
    while i < n:
        ch = surface[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == '"':
            j = surface.find('"', i + 1)
            if j < 0:
                raise MalformedSurface("unterminated string literal")
            tokens.append(surface[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not surface[j].isspace() and surface[j] not in '()"':
                j += 1
            tokens.append(surface[i:j])
            i = j
    return tokens


def _parse_sexpr(tokens: list[str], pos: int) -> tuple[object, int]:
    if pos >= len(tokens):
        raise MalformedSurface("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _parse_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise MalformedSurface("unbalanced brackets")
        return items, pos + 1
    if tok == ")":
        raise MalformedSurface("unexpected ')'")
    return tok, pos + 1


def _build_call(sexpr: object, grammar: GrammarSpec) -> Call:
    if not isinstance(sexpr, list):
        raise MalformedSurface("expected a bracketed call")
    if not sexpr:
        raise MalformedSurface("empty call")
    head = sexpr[0]
    if isinstance(head, list):
        raise MalformedSurface("call head must be a symbol")
    if head.startswith('"'):
        raise MalformedSurface("call head must be a symbol, not a literal")
    spec = grammar.function(head)
    if spec is None:
        raise UnknownSymbol(f"unknown function symbol {head!r}")
    raw_args = sexpr[1:]
    if len(raw_args) != spec.arity:
        raise ArityViolation(
            f"{head} expects {spec.arity} argument(s), got {len(raw_args)}"
        )
    args: list[Node] = []
    for raw, sort in zip(raw_args, spec.args):
        if sort == LITERAL_SORT:
            if isinstance(raw, list) or not raw.startswith('"'):
                raise ArityViolation(f"{head} expects a literal here")
            args.append(Literal(raw[1:-1]))
        else:
            child = _build_call(raw, grammar)
            child_result = grammar.functions[child.fn].result
            if child_result != sort:
                raise ArityViolation(
                    f"{head} expects a {sort} argument, got {child_result}"
                )
            args.append(child)
    return Call(head, tuple(args))


def _content_tokens(node: Node) -> Iterable[str]:
    if isinstance(node, Literal):
        yield node.token
    else:
        yield node.fn
        for arg in node.args:
            yield from _content_tokens(arg)


def compile_surface(surface: str, grammar: GrammarSpec) -> Program:
    """Parse a surface s-expression into its content-token Program."""
    tokens = _lex(surface)
    if not tokens:
        raise MalformedSurface("empty surface")
    sexpr, pos = _parse_sexpr(tokens, 0)
    if pos != len(tokens):
        raise MalformedSurface("trailing tokens after program")
    tree = _build_call(sexpr, grammar)
    return Program(tuple(_content_tokens(tree)), tree)


def decompile(program: Program) -> str:
    """Render the canonical surface form (single spaces, no extras)."""
    if not program.content_tokens:
        raise EmptyProgram("cannot decompile an empty program")

    def render(node: Node) -> str:
        if isinstance(node, Literal):
            return node.token
        inner = " ".join([node.fn] + [render(a) for a in node.args])
        return f"({inner})"

    return render(program.tree)


def program_from_tokens(
    tokens: Sequence[str], grammar: GrammarSpec
) -> Program:
    """Rebuild the tree from content tokens using declared arities.

    This is how decoded token sequences become executable; sequences that
    do not form a grammar-valid tree raise MalformedProgram.
    """
    if not tokens:
        raise EmptyProgram("no tokens")

    def read(pos: int, expect: str) -> tuple[Node, int]:
        if pos >= len(tokens):
            raise MalformedProgram("token sequence ends mid-call")
        tok = tokens[pos]
        if tok.startswith('"'):
            if expect != LITERAL_SORT:
                raise MalformedProgram(f"literal {tok} where {expect} expected")
            if not (len(tok) >= 2 and tok.endswith('"')):
                raise MalformedProgram(f"bad literal token {tok!r}")
            return Literal(tok[1:-1]), pos + 1
        spec = grammar.function(tok)
        if spec is None:
            raise MalformedProgram(f"unknown symbol {tok!r}")
        if expect != spec.result:
            raise MalformedProgram(f"{tok} produces {spec.result}, {expect} expected")
        args: list[Node] = []
        pos += 1
        for sort in spec.args:
            arg, pos = read(pos, sort)
            args.append(arg)
        return Call(tok, tuple(args)), pos

    head = tokens[0]
    head_spec = grammar.function(head)
    if head_spec is None:
        raise MalformedProgram(f"unknown symbol {head!r}")
    if head_spec.result not in grammar.top_sorts():
        raise MalformedProgram(f"{head} yields a fragment, not a complete program")
    tree, pos = read(0, head_spec.result)
    if pos != len(tokens):
        raise MalformedProgram("trailing tokens after complete program")
    return Program(tuple(tokens), tree)


def exact_match(pred, gold) -> bool:
    """True iff the content-token sequences are identical."""
    pred_tokens = tuple(pred.content_tokens) if isinstance(pred, Program) else tuple(pred)
    gold_tokens = tuple(gold.content_tokens) if isinstance(gold, Program) else tuple(gold)
    return pred_tokens == gold_tokens
