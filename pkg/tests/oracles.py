"""Independent brute-force oracles.

These deliberately avoid the library's algorithms: isomorphism by trying all
permutations, embeddings by trying all injections, sentence evaluation by
eager expansion over all assignments, and equality-pattern counting by
enumerating set partitions.  Expected values frozen into tests were computed
with these.
"""

import itertools

from amalgam.logic import And, Eq, Implies, Not, Or, Rel, Sentence
from amalgam.structures import Structure


def brute_isomorphic(a: Structure, b: Structure) -> bool:
    if len(a) != len(b) or not a.vocabulary.same_signature(b.vocabulary):
        return False
    for perm in itertools.permutations(b.domain):
        f = dict(zip(a.domain, perm))
        if _is_embedding_map(a, b, f):
            return True
    return False


def brute_embeddings(a: Structure, b: Structure) -> list[dict]:
    out = []
    for image in itertools.permutations(b.domain, len(a)):
        f = dict(zip(a.domain, image))
        if _is_embedding_map(a, b, f):
            out.append(f)
    return out


def _is_embedding_map(a: Structure, b: Structure, f: dict) -> bool:
    for name, tuples in a.relations.items():
        arity = a.vocabulary.arity(name)
        for t in itertools.product(a.domain, repeat=arity):
            if (t in tuples) != (tuple(f[e] for e in t) in b.relations[name]):
                return False
    return True


def naive_evaluate(struct: Structure, sentence: Sentence) -> bool:
    """Expand every quantifier eagerly over all assignments."""
    variables = [v for _, v in sentence.prefix]
    assignments = [dict()]
    if variables:
        assignments = [
            dict(zip(variables, combo))
            for combo in itertools.product(struct.domain, repeat=len(variables))
        ]
    value_by_assignment = {
        tuple(env[v] for v in variables): _matrix_value(struct, sentence.matrix, env)
        for env in assignments
    }

    def weigh(i: int, partial: tuple) -> bool:
        if i == len(sentence.prefix):
            return value_by_assignment[partial]
        quant, _ = sentence.prefix[i]
        branch = [weigh(i + 1, partial + (e,)) for e in struct.domain]
        return all(branch) if quant == "forall" else any(branch)

    return weigh(0, ())


def _matrix_value(struct: Structure, node, env: dict) -> bool:
    if isinstance(node, Rel):
        return tuple(env[v] for v in node.args) in struct.relations[node.name]
    if isinstance(node, Eq):
        return env[node.left] == env[node.right]
    if isinstance(node, Not):
        return not _matrix_value(struct, node.inner, env)
    if isinstance(node, And):
        return all(_matrix_value(struct, p, env) for p in node.parts)
    if isinstance(node, Or):
        return any(_matrix_value(struct, p, env) for p in node.parts)
    if isinstance(node, Implies):
        return (not _matrix_value(struct, node.left, env)) or _matrix_value(
            struct, node.right, env
        )
    raise TypeError(f"unknown node {node!r}")


def set_partitions(items: list):
    """All partitions of a list, as lists of blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1 :]
        yield [[first]] + partition


def equality_pattern_count(n: int) -> int:
    """Number of equality patterns of an n-tuple over a big enough set."""
    return sum(1 for _ in set_partitions(list(range(n))))
