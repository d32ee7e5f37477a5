"""Tree-diagram expansion of the order-k corrections.

Node kinds and their text tokens:

    R  homotopy h0 (one child)
    C  perturbation vertex Q1 (one child)
    F  half bracket 1/2 [-, -] (two unordered children)
    L  leaf Psi(0)

Diagrams are produced by expanding the recurrence symbolically, so every
sign and multiplicity is inherited from it.  Trees that differ only by the
order of fork children are merged.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import DiagramError
from .hilbert import homotopy_apply
from .perturbation import PerturbationProblem, base_element, corrections
from .superspace import SuperElement, apply_differential, bracket

__all__ = [
    "Node",
    "TreeDiagram",
    "MAX_ORDER",
    "leaf",
    "resistor",
    "contact",
    "fork",
    "validate",
    "enumerate_diagrams",
    "expansion_term_count",
    "enumerate_legal_trees",
    "evaluate_diagram",
    "diagram_sum",
    "diagram_sum_check",
    "is_energy_contributing",
    "render",
]

MAX_ORDER = 8
KINDS = ("R", "C", "F", "L")
_ARITY = {"R": 1, "C": 1, "F": 2, "L": 0}
# (parent, child) pairs that may not be adjacent
PROHIBITED = {
    ("R", "R"): "h0 applied directly to h0",
    ("R", "L"): "h0 applied directly to Psi(0)",
    ("C", "C"): "Q1 applied directly to Q1",
    ("F", "L"): "bracket fed directly by Psi(0)",
    ("C", "F"): "Q1 applied directly to a bracket",
    ("F", "C"): "bracket fed directly by Q1",
}


@dataclass(frozen=True)
class Node:
    kind: str
    children: tuple = ()

    def key(self) -> str:
        """Canonical string; fork children are sorted so it is order-blind."""
        if not self.children:
            return self.kind
        keys = [c.key() for c in self.children]
        if self.kind == "F":
            keys.sort()
        return self.kind + "(" + ",".join(keys) + ")"

    def canonical(self) -> "Node":
        kids = tuple(c.canonical() for c in self.children)
        if self.kind == "F":
            kids = tuple(sorted(kids, key=Node.key))
        return Node(self.kind, kids)

    def count(self, kind: str) -> int:
        return (self.kind == kind) + sum(c.count(kind) for c in self.children)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def leaf():
    return Node("L")


def resistor(child):
    return Node("R", (child,))


def contact(child):
    return Node("C", (child,))


def fork(a, b):
    return Node("F", (a, b))


@dataclass(frozen=True)
class TreeDiagram:
    root: Node
    coefficient: int

    @property
    def order(self) -> int:
        return self.root.count("C")

    def key(self) -> str:
        return self.root.key()


def validate(root: Node) -> None:
    """Raise :class:`DiagramError` unless ``root`` obeys the construction rules."""
    if root.kind != "R":
        raise DiagramError(f"root must be a homotopy edge, got {root.kind!r}")
    for node in root.walk():
        if node.kind not in KINDS:
            raise DiagramError(f"unknown node kind {node.kind!r}")
        if len(node.children) != _ARITY[node.kind]:
            raise DiagramError(f"{node.kind} node with {len(node.children)} children")
        for child in node.children:
            reason = PROHIBITED.get((node.kind, child.kind))
            if reason:
                raise DiagramError(f"prohibited combination {node.kind}-{child.kind}: {reason}")
    if root.count("C") < 1:
        raise DiagramError("diagram has no vertices")


def _check_order(k):
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"diagram order must be within 1..{MAX_ORDER}, got {k}")


@lru_cache(maxsize=None)
def _expansion(k):
    """Canonical key -> (tree, coefficient, raw term count) for Psi(k)."""
    if k == 0:
        return {"L": (leaf(), 1, 1)}
    terms = {}

    def add(node, coef, raw):
        node = node.canonical()
        key = node.key()
        if key in terms:
            old = terms[key]
            terms[key] = (old[0], old[1] + coef, old[2] + raw)
        else:
            terms[key] = (node, coef, raw)

    # -h0 Q1 Psi(k-1)
    for tree, coef, raw in _expansion(k - 1).values():
        add(resistor(contact(tree)), -coef, raw)
    # -h0 1/2 sum_m [Psi(m), Psi(k-m)]; "F" already carries the 1/2
    for m in range(1, k):
        for t1, c1, r1 in _expansion(m).values():
            for t2, c2, r2 in _expansion(k - m).values():
                add(resistor(fork(t1, t2)), -c1 * c2, r1 * r2)
    return {key: v for key, v in terms.items() if v[1] != 0}


def enumerate_diagrams(k: int) -> list[TreeDiagram]:
    """Distinct diagrams of order k with signed integer multiplicities."""
    _check_order(k)
    return [TreeDiagram(node, coef) for key, (node, coef, _) in sorted(_expansion(k).items())]


def expansion_term_count(k: int) -> int:
    """Number of terms in the recurrence expansion before merging."""
    _check_order(k)
    return sum(raw for _, _, raw in _expansion(k).values())


@lru_cache(maxsize=None)
def _legal_subtrees(k):
    # trees rooted at R with exactly k contacts, built straight from the rules
    out = {}
    if k < 1:
        return out
    below_contact = [leaf()] if k == 1 else list(_legal_subtrees(k - 1).values())
    for child in below_contact:
        node = resistor(contact(child)).canonical()
        out[node.key()] = node
    for m in range(1, k):
        for a in _legal_subtrees(m).values():
            for b in _legal_subtrees(k - m).values():
                node = resistor(fork(a, b)).canonical()
                out[node.key()] = node
    return out


def enumerate_legal_trees(k: int) -> list[Node]:
    """Every rule-abiding tree with k vertices, independent of the recurrence."""
    _check_order(k)
    return [node for _, node in sorted(_legal_subtrees(k).items())]


def _evaluate(node: Node, p: PerturbationProblem, psi0: SuperElement, cache) -> SuperElement:
    key = node.key()
    if key in cache:
        return cache[key]
    if node.kind == "L":
        out = psi0
    elif node.kind == "C":
        out = apply_differential(p.q1, _evaluate(node.children[0], p, psi0, cache))
    elif node.kind == "R":
        out = homotopy_apply(p.homotopy, _evaluate(node.children[0], p, psi0, cache))
    else:
        a, b = (_evaluate(c, p, psi0, cache) for c in node.children)
        out = 0.5 * bracket(a, b)
    cache[key] = out
    return out


def evaluate_diagram(d: TreeDiagram, p: PerturbationProblem, _cache=None) -> SuperElement:
    """Compose the operators of ``d`` bottom-up and scale by its coefficient."""
    validate(d.root)
    cache = {} if _cache is None else _cache
    return d.coefficient * _evaluate(d.root, p, base_element(p), cache)


def diagram_sum(k: int, p: PerturbationProblem, energy_only: bool = False) -> SuperElement:
    cache = {}
    total = SuperElement.zeros(p.dim)
    for d in enumerate_diagrams(k):
        if energy_only and not is_energy_contributing(d):
            continue
        total = total + evaluate_diagram(d, p, cache)
    return total


def diagram_sum_check(k: int, p: PerturbationProblem) -> float:
    """``||sum of diagrams - Psi(k) from the recurrence||``."""
    target = corrections(p, k).elements[-1]
    return (diagram_sum(k, p) - target).norm()


def is_energy_contributing(d: TreeDiagram) -> bool:
    """False when the root h0 feeds on a bracket; those carry no energy."""
    validate(d.root)
    return d.root.children[0].kind != "F"


_NAMES = {"R": "h0", "C": "Q1", "F": "fork", "L": "Psi0"}


def _text(node: Node) -> str:
    if node.kind == "L":
        return "L"
    if node.kind == "F":
        return "F " + " ".join(f"({_text(c)})" for c in node.children)
    return f"{node.kind} {_text(node.children[0])}"


def render(d: TreeDiagram, format: str = "text") -> str:
    """Serialize a diagram as a token string or as a DOT digraph.

    Text: tokens R C F L in prefix order, each fork branch parenthesized,
    e.g. ``R F (R C L) (R C L)``.
    """
    validate(d.root)
    if format == "text":
        return _text(d.root)
    if format != "dot":
        raise ValueError(f"unknown render format {format!r}")
    lines = ["digraph diagram {",
             f'  graph [label="coefficient {d.coefficient}"];',
             "  rankdir=LR;"]
    counter = 0

    def emit(node):
        nonlocal counter
        ident = f"n{counter}"
        counter += 1
        lines.append(f'  {ident} [label="{node.kind}", tooltip="{_NAMES[node.kind]}"];')
        for child in node.children:
            lines.append(f"  {ident} -> {emit(child)};")
        return ident

    emit(d.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
