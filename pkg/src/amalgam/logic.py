"""Prenex first-order sentences and an exact model checker.

Sentence text format (S-expressions, keywords lowercase):

    sentence := (forall (v ...) sentence) | (exists (v ...) sentence) | matrix
    matrix   := (and matrix ...) | (or matrix ...) | (not matrix)
              | (implies matrix matrix) | (eq v v) | (rel NAME v ...)

Quantifiers may only appear before the matrix (prenex form).  Equality is
built in, not a vocabulary symbol.  Evaluation is brute force by quantifier
expansion; correctness is the product and domains are tiny.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Union

from .errors import BudgetExceeded, ParseError, VocabularyMismatch
from .structures import Structure, Vocabulary

DEFAULT_EVAL_CAP = 5_000_000

SCHEME_TAGS = ("a", "b", "c", "d", "none")


@dataclass(frozen=True)
class Rel:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Not:
    inner: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


Formula = Union[Rel, Eq, Not, And, Or, Implies]


@dataclass(frozen=True)
class Sentence:
    prefix: tuple[tuple[str, str], ...]
    matrix: Formula
    scheme: str = "none"

    def __post_init__(self):
        if self.scheme not in SCHEME_TAGS:
            raise ParseError(f"unknown scheme tag {self.scheme!r}")
        seen = set()
        for quant, var in self.prefix:
            if quant not in ("forall", "exists"):
                raise ParseError(f"bad quantifier {quant!r}")
            if var in seen:
                raise ParseError(f"duplicate prefix variable {var}")
            seen.add(var)
        unbound = free_variables(self.matrix) - seen
        if unbound:
            raise ParseError(f"unbound {', '.join(sorted(unbound))}")

    def quantifier_count(self) -> int:
        return len(self.prefix)

    def relation_names(self) -> set[str]:
        return {r.name for r in iter_atoms(self.matrix) if isinstance(r, Rel)}


def iter_atoms(node: Formula) -> Iterator[Formula]:
    if isinstance(node, (Rel, Eq)):
        yield node
    elif isinstance(node, Not):
        yield from iter_atoms(node.inner)
    elif isinstance(node, (And, Or)):
        for p in node.parts:
            yield from iter_atoms(p)
    elif isinstance(node, Implies):
        yield from iter_atoms(node.left)
        yield from iter_atoms(node.right)
    else:
        raise TypeError(f"unknown formula node {node!r}")


def free_variables(node: Formula) -> set[str]:
    out: set[str] = set()
    for atom in iter_atoms(node):
        if isinstance(atom, Rel):
            out.update(atom.args)
        else:
            out.update((atom.left, atom.right))
    return out


def conj(parts: Sequence[Formula], tautology_var: str | None = None) -> Formula:
    """Conjunction; an empty list becomes the tautology (eq v v)."""
    parts = tuple(parts)
    if not parts:
        if tautology_var is None:
            raise ValueError("empty conjunction needs a tautology variable")
        return Eq(tautology_var, tautology_var)
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def distinctness(variables: Sequence[str]) -> list[Formula]:
    out: list[Formula] = []
    for i in range(len(variables)):
        for j in range(i + 1, len(variables)):
            out.append(Not(Eq(variables[i], variables[j])))
    return out


# ---------------------------------------------------------------------------
# parsing / emitting


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append((c, i))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _read(tokens: list[tuple[str, int]], i: int):
    if i >= len(tokens):
        raise ParseError("unexpected end of input", pos=tokens[-1][1] if tokens else 0)
    tok, pos = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while True:
            if i >= len(tokens):
                raise ParseError("missing )", pos=pos)
            if tokens[i][0] == ")":
                return (items, pos), i + 1
            item, i = _read(tokens, i)
            items.append(item)
    if tok == ")":
        raise ParseError("unexpected )", pos=pos)
    return (tok, pos), i


def _expect_list(node, what: str):
    value, pos = node
    if not isinstance(value, list):
        raise ParseError(f"expected {what}", pos=pos)
    return value, pos


def _expect_atom(node, what: str) -> str:
    value, pos = node
    if isinstance(value, list):
        raise ParseError(f"expected {what}", pos=pos)
    return value


def _parse_matrix(node, vocab: Vocabulary) -> Formula:
    value, pos = node
    if not isinstance(value, list) or not value:
        raise ParseError("expected a formula", pos=pos)
    head = _expect_atom(value[0], "connective")
    if head in ("forall", "exists"):
        raise ParseError("quantifier inside matrix (prenex required)", pos=pos)
    if head == "and":
        return And(tuple(_parse_matrix(p, vocab) for p in value[1:]))
    if head == "or":
        return Or(tuple(_parse_matrix(p, vocab) for p in value[1:]))
    if head == "not":
        if len(value) != 2:
            raise ParseError("not takes one argument", pos=pos)
        return Not(_parse_matrix(value[1], vocab))
    if head == "implies":
        if len(value) != 3:
            raise ParseError("implies takes two arguments", pos=pos)
        return Implies(_parse_matrix(value[1], vocab), _parse_matrix(value[2], vocab))
    if head == "eq":
        if len(value) != 3:
            raise ParseError("eq takes two variables", pos=pos)
        return Eq(_expect_atom(value[1], "variable"), _expect_atom(value[2], "variable"))
    if head == "rel":
        if len(value) < 2:
            raise ParseError("rel needs a symbol", pos=pos)
        name = _expect_atom(value[1], "relation name")
        args = tuple(_expect_atom(a, "variable") for a in value[2:])
        arity = vocab.arity_or_none(name)
        if arity is None:
            raise ParseError(f"unknown relation {name}", pos=pos)
        if arity != len(args):
            raise ParseError(f"arity mismatch for {name}", pos=pos)
        return Rel(name, args)
    raise ParseError(f"unknown connective {head!r}", pos=pos)


def parse_sentence(text: str, vocab: Vocabulary, scheme: str = "none") -> Sentence:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input", pos=0)
    node, i = _read(tokens, 0)
    if i != len(tokens):
        raise ParseError("trailing input", pos=tokens[i][1])
    prefix: list[tuple[str, str]] = []
    while True:
        value, pos = node
        if (
            isinstance(value, list)
            and value
            and not isinstance(value[0][0], list)
            and value[0][0] in ("forall", "exists")
        ):
            if len(value) != 3:
                raise ParseError("quantifier takes (vars) body", pos=pos)
            quant = value[0][0]
            var_list, _ = _expect_list(value[1], "variable list")
            if not var_list:
                raise ParseError("empty variable list", pos=pos)
            for v in var_list:
                prefix.append((quant, _expect_atom(v, "variable")))
            node = value[2]
        else:
            break
    matrix = _parse_matrix(node, vocab)
    try:
        return Sentence(tuple(prefix), matrix, scheme)
    except ParseError:
        raise


def emit_formula(node: Formula) -> str:
    if isinstance(node, Rel):
        return "(rel " + " ".join((node.name,) + node.args) + ")"
    if isinstance(node, Eq):
        return f"(eq {node.left} {node.right})"
    if isinstance(node, Not):
        return f"(not {emit_formula(node.inner)})"
    if isinstance(node, And):
        return "(and" + "".join(" " + emit_formula(p) for p in node.parts) + ")"
    if isinstance(node, Or):
        return "(or" + "".join(" " + emit_formula(p) for p in node.parts) + ")"
    if isinstance(node, Implies):
        return f"(implies {emit_formula(node.left)} {emit_formula(node.right)})"
    raise TypeError(f"unknown formula node {node!r}")


def emit_sentence(sentence: Sentence) -> str:
    """Canonical text: runs of equal quantifiers grouped into one block."""
    body = emit_formula(sentence.matrix)
    groups: list[tuple[str, list[str]]] = []
    for quant, var in sentence.prefix:
        if groups and groups[-1][0] == quant:
            groups[-1][1].append(var)
        else:
            groups.append((quant, [var]))
    for quant, variables in reversed(groups):
        body = f"({quant} ({' '.join(variables)}) {body})"
    return body


def sentence_line(sentence: Sentence) -> str:
    return f"[{sentence.scheme}] {emit_sentence(sentence)}"


def parse_sentence_line(line: str, vocab: Vocabulary) -> Sentence:
    line = line.strip()
    if not (line.startswith("[") and "]" in line):
        raise ParseError("missing scheme tag")
    tag, _, rest = line[1:].partition("]")
    return parse_sentence(rest.strip(), vocab, scheme=tag)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(
    struct: Structure,
    sentence: Sentence,
    max_assignments: int = DEFAULT_EVAL_CAP,
) -> bool:
    """Exact Tarskian truth by exhaustive quantifier expansion.

    Universal quantification over the empty domain is true.  Raises
    BudgetExceeded when |domain| ** quantifiers passes the cap.
    """
    for name in sorted(sentence.relation_names()):
        arity = struct.vocabulary.arity_or_none(name)
        if arity is None:
            raise VocabularyMismatch(f"sentence uses {name}, absent from structure")
    n = len(struct.domain)
    if sentence.prefix and n ** len(sentence.prefix) > max_assignments:
        raise BudgetExceeded(
            f"evaluation over {n}^{len(sentence.prefix)} assignments exceeds cap"
        )
    env: dict[str, str] = {}

    def quantify(i: int) -> bool:
        if i == len(sentence.prefix):
            return _value(struct, sentence.matrix, env)
        quant, var = sentence.prefix[i]
        if quant == "forall":
            for e in struct.domain:
                env[var] = e
                if not quantify(i + 1):
                    del env[var]
                    return False
            env.pop(var, None)
            return True
        for e in struct.domain:
            env[var] = e
            if quantify(i + 1):
                del env[var]
                return True
        env.pop(var, None)
        return False

    return quantify(0)


def _value(struct: Structure, node: Formula, env: dict[str, str]) -> bool:
    if isinstance(node, Rel):
        return tuple(env[v] for v in node.args) in struct.relations[node.name]
    if isinstance(node, Eq):
        return env[node.left] == env[node.right]
    if isinstance(node, Not):
        return not _value(struct, node.inner, env)
    if isinstance(node, And):
        return all(_value(struct, p, env) for p in node.parts)
    if isinstance(node, Or):
        return any(_value(struct, p, env) for p in node.parts)
    if isinstance(node, Implies):
        return (not _value(struct, node.left, env)) or _value(struct, node.right, env)
    raise TypeError(f"unknown formula node {node!r}")


# ---------------------------------------------------------------------------
# quantifier-free types


@dataclass(frozen=True)
class QfType:
    """Complete atomic diagram of a tuple, canonicalized to position indices."""

    length: int
    equality: tuple[int, ...]
    atoms: tuple[tuple[str, tuple[tuple[int, ...], ...]], ...]

    def key(self) -> bytes:
        eq = ",".join(map(str, self.equality))
        rows = []
        for name, tuples in self.atoms:
            rows.append(name + ":" + ";".join(",".join(map(str, t)) for t in tuples))
        return f"t{self.length}|{eq}|{'|'.join(rows)}".encode()


def qf_type(struct: Structure, elements: Sequence[str]) -> QfType:
    import itertools

    for e in elements:
        if e not in struct.domain:
            raise VocabularyMismatch(f"element {e} outside domain")
    blocks: dict[str, int] = {}
    equality = []
    for e in elements:
        if e not in blocks:
            blocks[e] = len(blocks)
        equality.append(blocks[e])
    atoms = []
    positions = range(len(elements))
    for name, arity in struct.vocabulary.symbols:
        rel = struct.relations[name]
        sat = tuple(
            idx
            for idx in itertools.product(positions, repeat=arity)
            if tuple(elements[i] for i in idx) in rel
        )
        atoms.append((name, sat))
    return QfType(len(elements), tuple(equality), tuple(atoms))
