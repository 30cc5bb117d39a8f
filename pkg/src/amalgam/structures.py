"""Finite relational structures: vocabularies, embeddings, canonical forms.

Everything downstream consumes these values.  Structures are immutable after
validation and all operations here are pure, so shared use needs no locking.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    BudgetExceeded,
    ParseError,
    StructureError,
    VocabularyError,
    VocabularyMismatch,
)

IDENT_RE = re.compile(r"[A-Za-z0-9_.~+-]+\Z")

# Default cap on raw interpretation counts in enumerate_structures.
DEFAULT_CANDIDATE_CAP = 1 << 22


@dataclass(frozen=True)
class Vocabulary:
    """Ordered relational signature with optional sort discipline.

    ``partition`` names two unary symbols whose extensions must split the
    domain.  ``sorts`` restricts argument positions of a symbol to one part
    of the partition (entries are partition symbol names, or None for an
    unrestricted position).
    """

    symbols: tuple[tuple[str, int], ...]
    partition: tuple[str, str] | None = None
    sorts: tuple[tuple[str, tuple[str | None, ...]], ...] = ()

    def __post_init__(self):
        seen = set()
        for name, arity in self.symbols:
            if not IDENT_RE.match(name):
                raise VocabularyError(f"bad symbol name {name!r}")
            if name in seen:
                raise VocabularyError(f"duplicate symbol {name}")
            if arity < 1:
                raise VocabularyError(f"symbol {name} has arity {arity} < 1")
            seen.add(name)
        if self.partition is not None:
            p, q = self.partition
            if p == q:
                raise VocabularyError("partition must name two distinct symbols")
            for part in (p, q):
                if self.arity_or_none(part) != 1:
                    raise VocabularyError(f"partition symbol {part} must be unary")
        for name, places in self.sorts:
            if self.arity_or_none(name) != len(places):
                raise VocabularyError(f"sort annotation for {name} has wrong length")
            for part in places:
                if part is not None and (
                    self.partition is None or part not in self.partition
                ):
                    raise VocabularyError(f"sort annotation names unknown part {part}")

    @staticmethod
    def make(
        symbols: Iterable[tuple[str, int]],
        partition: tuple[str, str] | None = None,
        sorts: Mapping[str, Sequence[str | None]] | None = None,
    ) -> "Vocabulary":
        sort_items = tuple(
            (name, tuple(places)) for name, places in (sorts or {}).items()
        )
        return Vocabulary(tuple(symbols), partition, sort_items)

    def arity(self, name: str) -> int:
        a = self.arity_or_none(name)
        if a is None:
            raise VocabularyError(f"unknown symbol {name}")
        return a

    def arity_or_none(self, name: str) -> int | None:
        for sym, arity in self.symbols:
            if sym == name:
                return arity
        return None

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def sort_of(self, name: str) -> tuple[str | None, ...] | None:
        for sym, places in self.sorts:
            if sym == name:
                return places
        return None

    def same_signature(self, other: "Vocabulary") -> bool:
        """Signature comparison ignores partition/sort annotations."""
        return self.symbols == other.symbols

    def restrict(self, max_arity: int) -> "Vocabulary":
        symbols = tuple((n, a) for n, a in self.symbols if a <= max_arity)
        keep = {n for n, _ in symbols}
        partition = self.partition
        if partition is not None and not all(p in keep for p in partition):
            partition = None
        sorts = tuple(
            (n, places)
            for n, places in self.sorts
            if n in keep and all(p is None or p in keep for p in places)
        )
        return Vocabulary(symbols, partition, sorts)

    def extends(self, other: "Vocabulary") -> bool:
        return self.symbols[: len(other.symbols)] == other.symbols


class Structure:
    """Immutable finite relational structure over a Vocabulary."""

    __slots__ = ("vocabulary", "domain", "relations", "_canon", "_hash", "_incidence")

    def __init__(
        self,
        vocabulary: Vocabulary,
        domain: tuple[str, ...],
        relations: Mapping[str, frozenset[tuple[str, ...]]],
    ):
        self.vocabulary = vocabulary
        self.domain = domain
        self.relations = {name: relations.get(name, frozenset()) for name, _ in vocabulary.symbols}
        self._canon: bytes | None = None
        self._hash: int | None = None
        self._incidence: dict | None = None

    def __len__(self) -> int:
        return len(self.domain)

    def _key(self):
        return (
            self.vocabulary.symbols,
            self.domain,
            tuple(sorted((n, tuple(sorted(ts))) for n, ts in self.relations.items())),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, Structure) and self._key() == other._key()

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def __repr__(self) -> str:
        rels = ", ".join(
            f"{n}:{len(ts)}" for n, ts in self.relations.items() if ts
        )
        return f"Structure({len(self.domain)} elems, {rels or 'no atoms'})"

    def has(self, symbol: str, tup: tuple[str, ...]) -> bool:
        return tup in self.relations[symbol]

    def incidence(self) -> dict[str, dict[str, list[tuple[str, ...]]]]:
        """symbol -> element -> tuples of that relation containing the element."""
        if self._incidence is None:
            inc: dict[str, dict[str, list[tuple[str, ...]]]] = {}
            for name, tuples in self.relations.items():
                by_elem: dict[str, list[tuple[str, ...]]] = {}
                for t in sorted(tuples):
                    for e in set(t):
                        by_elem.setdefault(e, []).append(t)
                inc[name] = by_elem
            self._incidence = inc
        return self._incidence


def validate_structure(
    vocabulary: Vocabulary,
    domain: Sequence[str],
    relations: Mapping[str, Iterable[tuple[str, ...]]],
) -> list[str]:
    """Return every violation as a message naming the offending symbol/tuple."""
    problems = []
    seen = set()
    for e in domain:
        if not IDENT_RE.match(e):
            problems.append(f"bad element identifier {e!r}")
        if e in seen:
            problems.append(f"duplicate element {e}")
        seen.add(e)
    known = set(seen)
    for name, tuples in relations.items():
        arity = vocabulary.arity_or_none(name)
        if arity is None:
            problems.append(f"unknown symbol {name}")
            continue
        for t in tuples:
            if len(t) != arity:
                problems.append(f"arity mismatch for {name}: {t}")
                continue
            for e in t:
                if e not in known:
                    problems.append(f"unknown element {e} in {name}{t}")
    if problems:
        return problems
    if vocabulary.partition is not None:
        p, q = vocabulary.partition
        ps = {t[0] for t in relations.get(p, ())}
        qs = {t[0] for t in relations.get(q, ())}
        for e in sorted(ps & qs):
            problems.append(f"partition violation: {e} in both {p} and {q}")
        for e in domain:
            if e not in ps and e not in qs:
                problems.append(f"partition violation: {e} in neither {p} nor {q}")
        for name, places in vocabulary.sorts:
            for t in relations.get(name, ()):
                for pos, part in enumerate(places):
                    if part is None:
                        continue
                    members = ps if part == p else qs
                    if t[pos] not in members:
                        problems.append(
                            f"sort violation: {name}{t} position {pos} not in {part}"
                        )
    return problems


def build_structure(
    vocabulary: Vocabulary,
    domain: Sequence[str],
    relations: Mapping[str, Iterable[tuple[str, ...]]],
) -> Structure:
    """Validate and freeze a structure; raises StructureError on any violation."""
    problems = validate_structure(vocabulary, domain, relations)
    if problems:
        raise StructureError("; ".join(problems))
    frozen = {name: frozenset(map(tuple, tuples)) for name, tuples in relations.items()}
    return Structure(vocabulary, tuple(domain), frozen)


def induced_substructure(struct: Structure, subset: Iterable[str]) -> Structure:
    subset = set(subset)
    for e in subset:
        if e not in struct.domain:
            raise StructureError(f"element {e} outside domain")
    domain = tuple(e for e in struct.domain if e in subset)
    relations = {
        name: frozenset(t for t in tuples if all(e in subset for e in t))
        for name, tuples in struct.relations.items()
    }
    return Structure(struct.vocabulary, domain, relations)


def relabel(struct: Structure, mapping: Mapping[str, str]) -> Structure:
    """Rename elements; mapping must be injective on the domain."""
    domain = tuple(mapping[e] for e in struct.domain)
    if len(set(domain)) != len(domain):
        raise StructureError("relabeling is not injective")
    relations = {
        name: frozenset(tuple(mapping[e] for e in t) for t in tuples)
        for name, tuples in struct.relations.items()
    }
    return Structure(struct.vocabulary, domain, relations)


@dataclass(frozen=True)
class Morphism:
    source: Structure
    target: Structure
    pairs: tuple[tuple[str, str], ...]

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    def __repr__(self) -> str:
        body = ", ".join(f"{a}->{b}" for a, b in self.pairs)
        return f"Morphism({body})"


def check_embedding(m: Morphism) -> list[str]:
    """Violations of the embedding condition (injective, preserves, reflects)."""
    problems = []
    f = m.as_dict()
    if set(f) != set(m.source.domain):
        problems.append("map not total on the source domain")
        return problems
    if len(set(f.values())) != len(f):
        problems.append("map not injective")
    for e in f.values():
        if e not in m.target.domain:
            problems.append(f"image {e} outside target domain")
            return problems
    if not m.source.vocabulary.same_signature(m.target.vocabulary):
        problems.append("vocabulary mismatch")
        return problems
    image = set(f.values())
    inv = {v: k for k, v in f.items()}
    for name, tuples in m.source.relations.items():
        for t in tuples:
            if tuple(f[e] for e in t) not in m.target.relations[name]:
                problems.append(f"{name}{t} not preserved")
    for name, tuples in m.target.relations.items():
        for t in tuples:
            if all(e in image for e in t):
                if tuple(inv[e] for e in t) not in m.source.relations[name]:
                    problems.append(f"{name}{t} not reflected")
    return problems


def enumerate_embeddings(
    a: Structure,
    b: Structure,
    iso_only: bool = False,
    fixed: Mapping[str, str] | None = None,
) -> list[Morphism]:
    """All embeddings of ``a`` into ``b``, in lexicographic image order.

    ``fixed`` pins a partial map that every returned embedding must extend.
    ``iso_only`` keeps only bijections (then also reflecting by construction).
    """
    if not a.vocabulary.same_signature(b.vocabulary):
        raise VocabularyMismatch(
            f"cannot embed over signatures {a.vocabulary.names()} vs {b.vocabulary.names()}"
        )
    if iso_only and len(a) != len(b):
        return []
    if len(a) > len(b):
        return []

    a_inc = a.incidence()
    b_inc = b.incidence()
    order = list(a.domain)
    results: list[Morphism] = []
    f: dict[str, str] = {}
    used: set[str] = set()
    inv: dict[str, str] = {}

    def consistent(x: str, y: str) -> bool:
        # preserve: every fully-mapped source tuple through x lands in the target
        for name, by_elem in a_inc.items():
            rel_b = b.relations[name]
            for t in by_elem.get(x, ()):
                img = []
                ok = True
                for e in t:
                    ee = y if e == x else f.get(e)
                    if ee is None:
                        ok = False
                        break
                    img.append(ee)
                if ok and tuple(img) not in rel_b:
                    return False
        # reflect: every fully-covered target tuple through y pulls back
        for name, by_elem in b_inc.items():
            rel_a = a.relations[name]
            for t in by_elem.get(y, ()):
                pre = []
                ok = True
                for e in t:
                    ee = x if e == y else inv.get(e)
                    if ee is None:
                        ok = False
                        break
                    pre.append(ee)
                if ok and tuple(pre) not in rel_a:
                    return False
        return True

    if fixed:
        for x in order:
            if x in fixed:
                y = fixed[x]
                if y in used or y not in b.domain or not consistent(x, y):
                    return []
                f[x] = y
                inv[y] = x
                used.add(y)

    free = [x for x in order if x not in f]

    def extend(i: int):
        if i == len(free):
            pairs = tuple((x, f[x]) for x in order)
            results.append(Morphism(a, b, pairs))
            return
        x = free[i]
        for y in b.domain:
            if y in used:
                continue
            if consistent(x, y):
                f[x] = y
                inv[y] = x
                used.add(y)
                extend(i + 1)
                del f[x]
                del inv[y]
                used.discard(y)

    extend(0)
    pos = {e: i for i, e in enumerate(b.domain)}
    results.sort(key=lambda m: tuple(pos[v] for _, v in m.pairs))
    return results


# ---------------------------------------------------------------------------
# canonical forms


def _refine(struct: Structure, colors: dict[str, int]) -> dict[str, int]:
    """Iterative invariant refinement by relation profiles until stable."""
    n_colors = len(set(colors.values()))
    inc = struct.incidence()
    names = struct.vocabulary.names()
    while True:
        sigs = {}
        for e in struct.domain:
            contributions = []
            for si, name in enumerate(names):
                for t in inc[name].get(e, ()):
                    contributions.append(
                        (si, tuple((colors[x], x == e) for x in t))
                    )
            contributions.sort()
            sigs[e] = (colors[e], tuple(contributions))
        ranked = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
        new_colors = {e: ranked[sigs[e]] for e in struct.domain}
        new_count = len(set(new_colors.values()))
        if new_count == n_colors:
            return new_colors
        colors = new_colors
        n_colors = new_count


def _index_key(struct: Structure, ordering: Sequence[str]):
    index = {e: i for i, e in enumerate(ordering)}
    return tuple(
        tuple(sorted(tuple(index[e] for e in t) for t in struct.relations[name]))
        for name, _ in struct.vocabulary.symbols
    )


def _serialize(struct: Structure, key) -> bytes:
    parts = [f"{name}/{arity}" for name, arity in struct.vocabulary.symbols]
    body = [f"v:{','.join(parts)}", f"n:{len(struct.domain)}"]
    for (name, _), rows in zip(struct.vocabulary.symbols, key):
        body.append(name + ":" + ";".join(",".join(map(str, r)) for r in rows))
    return "|".join(body).encode()


def _twins(struct: Structure, a: str, b: str) -> bool:
    """True when swapping a and b is an automorphism."""
    swap = {a: b, b: a}
    for tuples in struct.relations.values():
        for t in tuples:
            if a in t or b in t:
                if tuple(swap.get(e, e) for e in t) not in tuples:
                    return False
    return True


_PERMUTATION_BUDGET = 40320


def canonical_form(struct: Structure) -> bytes:
    """Canonical key: equal for two structures iff they are isomorphic.

    Refinement by relation profiles splits the domain into cells; the key is
    the minimum relation serialization over all cell-respecting orderings.
    Cells whose elements are pairwise swappable contribute one fixed order.
    When the remaining ordering count is too large, falls back to
    individualization with re-refinement.  Exact at desk scale.
    """
    if struct._canon is not None:
        return struct._canon
    if not struct.domain:
        key = _serialize(struct, _index_key(struct, ()))
        struct._canon = key
        return key

    colors = _refine(struct, {e: 0 for e in struct.domain})
    cells: dict[int, list[str]] = {}
    for e in struct.domain:
        cells.setdefault(colors[e], []).append(e)
    ordered_cells = [cells[c] for c in sorted(cells)]

    per_cell: list[list[tuple[str, ...]]] = []
    total = 1
    for cell in ordered_cells:
        if len(cell) == 1 or all(_twins(struct, cell[0], e) for e in cell[1:]):
            per_cell.append([tuple(cell)])
        else:
            per_cell.append(list(itertools.permutations(cell)))
            total *= len(per_cell[-1])
        if total > _PERMUTATION_BUDGET:
            break

    if total <= _PERMUTATION_BUDGET:
        best = None
        for combo in itertools.product(*per_cell):
            ordering = [e for block in combo for e in block]
            key = _index_key(struct, ordering)
            if best is None or key < best:
                best = key
        result = _serialize(struct, best)
        struct._canon = result
        return result

    # fallback: individualization with re-refinement
    best_key: list = [None]

    def descend(current: dict[str, int]):
        groups: dict[int, list[str]] = {}
        for e in struct.domain:
            groups.setdefault(current[e], []).append(e)
        blocks = [groups[c] for c in sorted(groups)]
        target = next((b for b in blocks if len(b) > 1), None)
        if target is None:
            ordering = [b[0] for b in blocks]
            key = _index_key(struct, ordering)
            if best_key[0] is None or key < best_key[0]:
                best_key[0] = key
            return
        fresh = len(struct.domain)
        for e in target:
            branched = dict(current)
            branched[e] = fresh
            descend(_refine(struct, branched))

    descend(colors)
    result = _serialize(struct, best_key[0])
    struct._canon = result
    return result


def enumerate_structures(
    vocabulary: Vocabulary,
    size: int,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> list[Structure]:
    """One structure per isomorphism class at the given size, canonical order.

    Brute force over all interpretations; refuses (BudgetExceeded) when the
    raw candidate count would pass ``candidate_cap``.
    """
    if size < 0:
        raise StructureError("size must be >= 0")
    domain = tuple(f"e{i + 1}" for i in range(size))
    total = 1
    all_tuples = {}
    for name, arity in vocabulary.symbols:
        tuples = sorted(itertools.product(domain, repeat=arity))
        all_tuples[name] = tuples
        total *= 2 ** len(tuples)
        if total > candidate_cap:
            raise BudgetExceeded(
                f"enumerate_structures: {total} candidates exceed cap {candidate_cap}"
            )
    seen: dict[bytes, Structure] = {}
    names = vocabulary.names()
    pools = [
        [frozenset(c) for r in range(len(all_tuples[n]) + 1)
         for c in itertools.combinations(all_tuples[n], r)]
        for n in names
    ]
    for choice in itertools.product(*pools):
        relations = dict(zip(names, choice))
        if vocabulary.partition and validate_structure(vocabulary, domain, relations):
            continue
        s = Structure(vocabulary, domain, relations)
        key = canonical_form(s)
        if key not in seen:
            seen[key] = s
    return [seen[k] for k in sorted(seen)]


# ---------------------------------------------------------------------------
# text format
#
#   # comment lines and blank lines are ignored
#   vocab E/2 P/1          declares the vocabulary for following blocks
#   structure G1
#   domain a b c
#   rel E (a,b) (b,c)
#   end
#
# The emitter writes one vocab line before the first block and again whenever
# the vocabulary changes, lists only nonempty relations in declaration order,
# and sorts tuples by domain position.  parse(emit(x)) == x, and emitting a
# parsed normalized file reproduces it byte for byte.


def _parse_vocab_line(tokens: list[str], line_no: int) -> Vocabulary:
    symbols = []
    for tok in tokens:
        if "/" not in tok:
            raise ParseError(f"bad vocab token {tok!r}", line=line_no)
        name, _, arity = tok.rpartition("/")
        if not arity.isdigit():
            raise ParseError(f"bad arity in {tok!r}", line=line_no)
        symbols.append((name, int(arity)))
    try:
        return Vocabulary(tuple(symbols))
    except VocabularyError as exc:
        raise ParseError(str(exc), line=line_no) from exc


def _parse_tuple(token: str, line_no: int) -> tuple[str, ...]:
    if not (token.startswith("(") and token.endswith(")")):
        raise ParseError(f"bad tuple {token!r}", line=line_no)
    inner = token[1:-1]
    if not inner:
        raise ParseError("empty tuple", line=line_no)
    return tuple(inner.split(","))


def parse_structures(text: str) -> list[tuple[str, Structure]]:
    vocab: Vocabulary | None = None
    out: list[tuple[str, Structure]] = []
    name = None
    domain: list[str] = []
    relations: dict[str, list[tuple[str, ...]]] = {}
    in_block = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head, rest = tokens[0], tokens[1:]
        if head == "vocab":
            if in_block:
                raise ParseError("vocab inside structure block", line=line_no)
            vocab = _parse_vocab_line(rest, line_no)
        elif head == "structure":
            if in_block:
                raise ParseError("nested structure block", line=line_no)
            if vocab is None:
                raise ParseError("structure before any vocab line", line=line_no)
            if len(rest) != 1:
                raise ParseError("structure needs exactly one name", line=line_no)
            name, domain, relations, in_block = rest[0], [], {}, True
        elif head == "domain":
            if not in_block:
                raise ParseError("domain outside structure block", line=line_no)
            domain = rest
        elif head == "rel":
            if not in_block:
                raise ParseError("rel outside structure block", line=line_no)
            if not rest:
                raise ParseError("rel needs a symbol", line=line_no)
            sym = rest[0]
            tuples = [_parse_tuple(tok, line_no) for tok in rest[1:]]
            relations.setdefault(sym, []).extend(tuples)
        elif head == "end":
            if not in_block:
                raise ParseError("end outside structure block", line=line_no)
            try:
                out.append((name, build_structure(vocab, domain, relations)))
            except StructureError as exc:
                raise ParseError(str(exc), line=line_no) from exc
            in_block = False
        else:
            raise ParseError(f"unknown directive {head!r}", line=line_no)
    if in_block:
        raise ParseError("unterminated structure block", line=len(text.splitlines()))
    return out


def emit_structures(items: Sequence[tuple[str, Structure]]) -> str:
    lines: list[str] = []
    current_vocab: Vocabulary | None = None
    for name, struct in items:
        if current_vocab is None or not struct.vocabulary.same_signature(current_vocab):
            decl = " ".join(f"{n}/{a}" for n, a in struct.vocabulary.symbols)
            lines.append(f"vocab {decl}")
            current_vocab = struct.vocabulary
        lines.append(f"structure {name}")
        lines.append("domain " + " ".join(struct.domain))
        pos = {e: i for i, e in enumerate(struct.domain)}
        for sym, _ in struct.vocabulary.symbols:
            tuples = struct.relations[sym]
            if not tuples:
                continue
            rows = sorted(tuples, key=lambda t: tuple(pos[e] for e in t))
            body = " ".join("(" + ",".join(t) + ")" for t in rows)
            lines.append(f"rel {sym} {body}")
        lines.append("end")
    return "\n".join(lines) + "\n"
