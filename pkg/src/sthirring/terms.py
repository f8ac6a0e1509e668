"""Symbolic functional-valued vector distributions.

A term is a tree built from the generators Phi (spinor) and PhiBar
(cospinor), pointwise products, propagator convolutions G_psi / G_psibar,
symbolic gamma-matrix elements and named counterterm constants, together
with an exact rational coefficient.  Abstract spinor indices wire the tree:
an index id occurring twice is contracted (once with upper, once with lower
polarity), an id occurring once is free and determines the external rank.
Vector indices only ever pair two gamma insertions.

Smearing functions and field configurations are never materialized; the
noise content is handled downstream by the deformation machinery, which
only needs the leaf structure, the vertex layout and the grading exposed
here.  Coefficients are kept as exact fractions because the contraction
combinatorics (factorials times binomials) must merge exactly.

Canonical forms: two terms that agree as abstract functionals up to
commutativity of the pointwise product and renaming of abstract indices
canonicalize to the identical tree.  Product children are sorted by a
shape key; groups of children that remain tied *and* are coupled through
shared indices are resolved by brute-force permutation, taking the
lexicographically smallest serialization.  Tied groups in this model are
tiny (at most a few identical branches), so the search is cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product as iproduct

PHI = "phi"
PHIBAR = "phibar"
GPSI = "G_psi"
GPSIBAR = "G_psi_bar"

UP = 1
DOWN = -1

_PERM_BUDGET = 20000


class StructuralError(ValueError):
    """Malformed term: index collision, rank mismatch, bad wiring."""


# --------------------------------------------------------------------------
# node types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Leaf:
    species: str  # PHI | PHIBAR
    index: int


@dataclass(frozen=True)
class Gamma:
    """(gamma^mu)^row_col as a symbolic matrix element."""

    mu: int
    row: int
    col: int


@dataclass(frozen=True)
class Const:
    """Named counterterm matrix (C)^row_col; never numerically evaluated."""

    name: str
    order: int
    row: int
    col: int


@dataclass(frozen=True)
class Conv:
    """(G)^out_in convolved against the inner term's free index."""

    kind: str  # GPSI | GPSIBAR
    out_index: int
    in_index: int
    inner: "Node"


@dataclass(frozen=True)
class Prod:
    children: tuple


Node = Unit | Leaf | Gamma | Const | Conv | Prod


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    node: Node

    def __post_init__(self):
        object.__setattr__(self, "coeff", Fraction(self.coeff))

    def scaled(self, c) -> "Term":
        return Term(self.coeff * Fraction(c), self.node)


ZERO = Term(Fraction(0), Unit())
ONE = Term(Fraction(1), Unit())


def phi(index: int = 0) -> Term:
    return Term(Fraction(1), Leaf(PHI, index))


def phibar(index: int = 0) -> Term:
    return Term(Fraction(1), Leaf(PHIBAR, index))


def is_zero(t: Term) -> bool:
    return t.coeff == 0


# --------------------------------------------------------------------------
# traversal
# --------------------------------------------------------------------------

def _children(node: Node):
    if isinstance(node, Conv):
        return (node.inner,)
    if isinstance(node, Prod):
        return node.children
    return ()


def index_occurrences(node: Node):
    """Yields (index, polarity, kind) with kind 'spinor' or 'vector'."""
    if isinstance(node, Leaf):
        yield node.index, (UP if node.species == PHI else DOWN), "spinor"
    elif isinstance(node, Gamma):
        yield node.mu, 0, "vector"
        yield node.row, UP, "spinor"
        yield node.col, DOWN, "spinor"
    elif isinstance(node, Const):
        yield node.row, UP, "spinor"
        yield node.col, DOWN, "spinor"
    elif isinstance(node, Conv):
        up_out = node.kind == GPSI
        yield node.out_index, (UP if up_out else DOWN), "spinor"
        yield node.in_index, (DOWN if up_out else UP), "spinor"
        yield from index_occurrences(node.inner)
    elif isinstance(node, Prod):
        for c in node.children:
            yield from index_occurrences(c)


def index_census(node: Node) -> dict:
    census = {}
    for idx, pol, kind in index_occurrences(node):
        census.setdefault(idx, []).append((pol, kind))
    return census


def free_indices(node: Node) -> dict:
    """Map free index -> (polarity, kind)."""
    return {
        idx: occ[0]
        for idx, occ in index_census(node).items()
        if len(occ) == 1
    }


def validate(node: Node) -> None:
    for idx, occ in index_census(node).items():
        if len(occ) > 2:
            raise StructuralError(f"index {idx} occurs {len(occ)} times")
        kinds = {k for _, k in occ}
        if len(kinds) > 1:
            raise StructuralError(f"index {idx} mixes vector and spinor slots")
        if len(occ) == 2 and "spinor" in kinds:
            if occ[0][0] + occ[1][0] != 0:
                raise StructuralError(f"index {idx} contracted with equal polarity")


def external_rank(node: Node) -> tuple[int, int]:
    """(free upper spinor indices, free lower spinor indices)."""
    up = down = 0
    for pol, kind in free_indices(node).values():
        if kind != "spinor":
            continue
        if pol == UP:
            up += 1
        else:
            down += 1
    return up, down


def max_index(node: Node) -> int:
    return max((idx for idx, _, _ in index_occurrences(node)), default=-1)


def shift_indices(node: Node, offset: int) -> Node:
    if isinstance(node, Unit):
        return node
    if isinstance(node, Leaf):
        return Leaf(node.species, node.index + offset)
    if isinstance(node, Gamma):
        return Gamma(node.mu + offset, node.row + offset, node.col + offset)
    if isinstance(node, Const):
        return Const(node.name, node.order, node.row + offset, node.col + offset)
    if isinstance(node, Conv):
        return Conv(node.kind, node.out_index + offset, node.in_index + offset,
                    shift_indices(node.inner, offset))
    return Prod(tuple(shift_indices(c, offset) for c in node.children))


# --------------------------------------------------------------------------
# grading
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Grading:
    r: int
    r_bar: int
    l: int
    l_bar: int

    def __add__(self, other: "Grading") -> "Grading":
        return Grading(self.r + other.r, self.r_bar + other.r_bar,
                       self.l + other.l, self.l_bar + other.l_bar)

    def as_tuple(self):
        return (self.r, self.r_bar, self.l, self.l_bar)


def grading(t: Term | Node) -> Grading:
    node = t.node if isinstance(t, Term) else t
    r = r_bar = l = l_bar = 0
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Leaf):
            if n.species == PHI:
                r += 1
            else:
                r_bar += 1
        elif isinstance(n, Conv):
            if n.kind == GPSI:
                l += 1
            else:
                l_bar += 1
        stack.extend(_children(n))
    return Grading(r, r_bar, l, l_bar)


# --------------------------------------------------------------------------
# algebra operations
# --------------------------------------------------------------------------

def _flatten(children):
    out = []
    for c in children:
        if isinstance(c, Unit):
            continue
        if isinstance(c, Prod):
            out.extend(c.children)
        else:
            out.append(c)
    return tuple(out)


def product(a: Term, b: Term, rename: bool = True) -> Term:
    """Pointwise product.  Unit is the identity, the zero term absorbs.

    With rename=True (default) the indices of b are shifted into a fresh
    range; with rename=False a clash of index ids raises StructuralError.
    """
    if is_zero(a) or is_zero(b):
        return ZERO
    node_b = b.node
    if rename:
        node_b = shift_indices(node_b, max_index(a.node) + 1)
    else:
        clash = {i for i, _, _ in index_occurrences(a.node)} & \
                {i for i, _, _ in index_occurrences(b.node)}
        if clash:
            raise StructuralError(f"index collision without renaming: {sorted(clash)}")
    if isinstance(a.node, Unit):
        return Term(a.coeff * b.coeff, node_b)
    if isinstance(node_b, Unit):
        return Term(a.coeff * b.coeff, a.node)
    return Term(a.coeff * b.coeff, Prod(_flatten((a.node, node_b))))


def convolve(kind: str, t: Term) -> Term:
    """Wrap t in a propagator convolution, contracting its unique free index.

    G_psi acts on spinor rank (one free upper index), G_psibar on cospinor
    rank (one free lower index); anything else is a rank mismatch.
    """
    if kind not in (GPSI, GPSIBAR):
        raise StructuralError(f"unknown propagator kind {kind!r}")
    if is_zero(t):
        return ZERO
    want = UP if kind == GPSI else DOWN
    slots = [idx for idx, (pol, k) in free_indices(t.node).items()
             if k == "spinor" and pol == want]
    if len(slots) != 1:
        raise StructuralError(
            f"{kind} needs exactly one free {'upper' if want == UP else 'lower'} "
            f"spinor index, found {len(slots)}")
    out = max_index(t.node) + 1
    return Term(t.coeff, Conv(kind, out, slots[0], t.node))


def mirror(t: Term) -> Term:
    """Phi <-> PhiBar, G_psi <-> G_psibar; relates the two solution branches."""

    def go(node):
        if isinstance(node, Leaf):
            return Leaf(PHI if node.species == PHIBAR else PHIBAR, node.index)
        if isinstance(node, Gamma):
            return Gamma(node.mu, node.col, node.row)
        if isinstance(node, Const):
            return Const(node.name, node.order, node.col, node.row)
        if isinstance(node, Conv):
            return Conv(GPSI if node.kind == GPSIBAR else GPSIBAR,
                        node.out_index, node.in_index, go(node.inner))
        if isinstance(node, Prod):
            return Prod(tuple(go(c) for c in node.children))
        return node

    return Term(t.coeff, go(t.node))


# --------------------------------------------------------------------------
# canonical form
# --------------------------------------------------------------------------

def _serialize(node: Node, naming: dict, tokens: list) -> None:
    """Emit tokens; index names assigned on first encounter."""

    def name(idx):
        if idx not in naming:
            naming[idx] = f"i{len(naming)}"
        return naming[idx]

    if isinstance(node, Unit):
        tokens.append("1")
    elif isinstance(node, Leaf):
        tokens.append(f"L[{node.species},{name(node.index)}]")
    elif isinstance(node, Gamma):
        tokens.append(f"g[{name(node.mu)},{name(node.row)},{name(node.col)}]")
    elif isinstance(node, Const):
        tokens.append(f"K[{node.name},{node.order},{name(node.row)},{name(node.col)}]")
    elif isinstance(node, Conv):
        tokens.append(f"C[{node.kind},{name(node.out_index)},{name(node.in_index)}](")
        _serialize(node.inner, naming, tokens)
        tokens.append(")")
    elif isinstance(node, Prod):
        tokens.append("P(")
        for c in node.children:
            _serialize(c, naming, tokens)
            tokens.append(",")
        tokens.append(")")
    else:  # pragma: no cover
        raise TypeError(node)


def _child_shape(child: Node, outside_counts: dict, prenamed: dict) -> str:
    """Order key for a product child.

    Indices already named in the enclosing context keep their names; indices
    local to the child get positional names; indices linking to siblings
    (or free elsewhere) are reduced to link/free markers so that the key is
    independent of sibling identity.
    """
    local = {}
    toks = []

    def name(idx):
        if idx in prenamed:
            return "@" + prenamed[idx]
        inside = sum(1 for i, _, _ in index_occurrences(child) if i == idx)
        total = outside_counts.get(idx, 0)
        if inside == 2:
            if idx not in local:
                local[idx] = f"l{len(local)}"
            return local[idx]
        return "*LINK*" if total > inside else "*FREE*"

    def go(n):
        if isinstance(n, Unit):
            toks.append("1")
        elif isinstance(n, Leaf):
            toks.append(f"L[{n.species},{name(n.index)}]")
        elif isinstance(n, Gamma):
            toks.append(f"g[{name(n.mu)},{name(n.row)},{name(n.col)}]")
        elif isinstance(n, Const):
            toks.append(f"K[{n.name},{n.order},{name(n.row)},{name(n.col)}]")
        elif isinstance(n, Conv):
            toks.append(f"C[{n.kind},{name(n.out_index)},{name(n.in_index)}](")
            go(n.inner)
            toks.append(")")
        elif isinstance(n, Prod):
            toks.append("P(")
            for c in n.children:
                go(c)
                toks.append(",")
            toks.append(")")

    go(child)
    return "".join(toks)


def _order_prod(node: Prod, naming: dict, whole_counts: dict) -> tuple:
    """Canonical child order for a product under the current naming."""
    kids = list(node.children)
    shapes = [_child_shape(c, whole_counts, naming) for c in kids]
    order = sorted(range(len(kids)), key=lambda i: shapes[i])
    groups = []
    start = 0
    while start < len(order):
        end = start
        while end + 1 < len(order) and shapes[order[end + 1]] == shapes[order[start]]:
            end += 1
        groups.append(order[start:end + 1])
        start = end + 1
    # groups whose members carry sibling links need a permutation search
    needs_search = False
    total = 1
    options = []
    for g in groups:
        if len(g) > 1 and "*LINK*" in shapes[g[0]]:
            needs_search = True
            for n in range(2, len(g) + 1):
                total *= n
            if total > _PERM_BUDGET:
                raise StructuralError("canonicalization permutation budget exceeded")
            options.append([list(p) for p in permutations(g)])
        else:
            options.append([list(g)])
    if not needs_search:
        return tuple(kids[i] for g in groups for i in g)
    best = None
    for combo in iproduct(*options):
        cand = tuple(kids[i] for g in combo for i in g)
        toks: list = []
        trial = dict(naming)
        for c in cand:
            _serialize(c, trial, toks)
            toks.append(",")
        key = "".join(toks)
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


def _canon_node(node: Node, naming: dict, whole_counts: dict) -> Node:
    def name(idx):
        if idx not in naming:
            naming[idx] = f"i{len(naming)}"
        return naming[idx]

    if isinstance(node, (Unit, Leaf, Gamma, Const)):
        for idx, _, _ in index_occurrences(node):
            name(idx)
        return node
    if isinstance(node, Conv):
        name(node.out_index)
        name(node.in_index)
        inner = _canon_node(node.inner, naming, whole_counts)
        return Conv(node.kind, node.out_index, node.in_index, inner)
    if isinstance(node, Prod):
        flat = Prod(_flatten(node.children))
        if not flat.children:
            return Unit()
        ordered = _order_prod(flat, naming, whole_counts)
        out = tuple(_canon_node(c, naming, whole_counts) for c in ordered)
        return Prod(out)
    raise TypeError(node)  # pragma: no cover


def _rename(node: Node, mapping: dict) -> Node:
    if isinstance(node, Unit):
        return node
    if isinstance(node, Leaf):
        return Leaf(node.species, mapping[node.index])
    if isinstance(node, Gamma):
        return Gamma(mapping[node.mu], mapping[node.row], mapping[node.col])
    if isinstance(node, Const):
        return Const(node.name, node.order, mapping[node.row], mapping[node.col])
    if isinstance(node, Conv):
        return Conv(node.kind, mapping[node.out_index], mapping[node.in_index],
                    _rename(node.inner, mapping))
    return Prod(tuple(_rename(c, mapping) for c in node.children))


def canonicalize(t: Term) -> Term:
    """Canonical representative: sorted products, indices renamed 0,1,2,..."""
    if is_zero(t):
        return ZERO
    validate(t.node)
    counts = {i: len(o) for i, o in index_census(t.node).items()}
    naming: dict = {}
    ordered = _canon_node(t.node, naming, counts)
    final: dict = {}
    toks: list = []
    _serialize(ordered, final, toks)
    mapping = {old: rank for rank, old in
               enumerate(sorted(final, key=lambda o: int(final[o][1:])))}
    return Term(t.coeff, _rename(ordered, mapping))


def canonical_key(t: Term | Node) -> str:
    node = t.node if isinstance(t, Term) else t
    ct = canonicalize(Term(Fraction(1), node))
    toks: list = []
    _serialize(ct.node, {}, toks)
    return "".join(toks)


# --------------------------------------------------------------------------
# sums of terms
# --------------------------------------------------------------------------

class TermSum:
    """Formal sum of terms with exact coefficients, merged by canonical form."""

    def __init__(self, terms=()):
        self._data: dict[str, Term] = {}
        for t in terms:
            self.add(t)

    def add(self, t: Term) -> None:
        if is_zero(t):
            return
        ct = canonicalize(t)
        key = canonical_key(ct)
        cur = self._data.get(key)
        if cur is None:
            self._data[key] = ct
        else:
            c = cur.coeff + ct.coeff
            if c == 0:
                del self._data[key]
            else:
                self._data[key] = Term(c, cur.node)

    def terms(self) -> list[Term]:
        return [self._data[k] for k in sorted(self._data)]

    def __len__(self):
        return len(self._data)

    def __eq__(self, other):
        if not isinstance(other, TermSum):
            return NotImplemented
        return {k: t.coeff for k, t in self._data.items()} == \
               {k: t.coeff for k, t in other._data.items()}

    def __iter__(self):
        return iter(self.terms())

    def map(self, fn) -> "TermSum":
        return TermSum(fn(t) for t in self.terms())

    def scaled(self, c) -> "TermSum":
        return TermSum(t.scaled(c) for t in self.terms())


# --------------------------------------------------------------------------
# TeX and JSON
# --------------------------------------------------------------------------

_TEX_SPECIES = {PHI: r"\Phi^{%s}", PHIBAR: r"\bar{\Phi}_{%s}"}


def _idx_tex(i: int) -> str:
    return f"\\rho_{{{i}}}"


def to_tex(t: Term | Node) -> str:
    node = t.node if isinstance(t, Term) else t
    prefix = ""
    if isinstance(t, Term) and t.coeff != 1:
        prefix = (f"{t.coeff.numerator}" if t.coeff.denominator == 1
                  else f"\\tfrac{{{t.coeff.numerator}}}{{{t.coeff.denominator}}}") + r"\,"
    return prefix + _node_tex(node)


def _node_tex(node: Node) -> str:
    if isinstance(node, Unit):
        return r"\mathbf{1}"
    if isinstance(node, Leaf):
        return _TEX_SPECIES[node.species] % _idx_tex(node.index)
    if isinstance(node, Gamma):
        return (rf"(\gamma^{{\mu_{{{node.mu}}}}})"
                rf"^{{{_idx_tex(node.row)}}}_{{{_idx_tex(node.col)}}}")
    if isinstance(node, Const):
        sym = r"\widetilde{C}" if node.name == "Ctilde" else node.name
        return rf"{sym}^{{{_idx_tex(node.row)}}}_{{{_idx_tex(node.col)}}}"
    if isinstance(node, Conv):
        g = r"G_{\psi}" if node.kind == GPSI else r"G_{\bar\psi}"
        return (rf"({g})^{{{_idx_tex(node.out_index)}}}_{{{_idx_tex(node.in_index)}}}"
                rf"\circledast\!\left[{_node_tex(node.inner)}\right]")
    if isinstance(node, Prod):
        return r"\,".join(_node_tex(c) for c in node.children)
    raise TypeError(node)  # pragma: no cover


def node_to_json(node: Node) -> dict:
    if isinstance(node, Unit):
        return {"kind": "unit"}
    if isinstance(node, Leaf):
        return {"kind": "leaf", "species": node.species, "index": str(node.index)}
    if isinstance(node, Gamma):
        return {"kind": "gamma", "mu": str(node.mu),
                "row": str(node.row), "col": str(node.col)}
    if isinstance(node, Const):
        return {"kind": "const", "name": node.name, "order": node.order,
                "row": str(node.row), "col": str(node.col)}
    if isinstance(node, Conv):
        return {"kind": "conv", "propagator": node.kind,
                "out": str(node.out_index), "in": str(node.in_index),
                "inner": node_to_json(node.inner)}
    if isinstance(node, Prod):
        return {"kind": "prod", "children": [node_to_json(c) for c in node.children]}
    raise TypeError(node)  # pragma: no cover


def node_from_json(d: dict) -> Node:
    k = d["kind"]
    if k == "unit":
        return Unit()
    if k == "leaf":
        return Leaf(d["species"], int(d["index"]))
    if k == "gamma":
        return Gamma(int(d["mu"]), int(d["row"]), int(d["col"]))
    if k == "const":
        return Const(d["name"], d["order"], int(d["row"]), int(d["col"]))
    if k == "conv":
        return Conv(d["propagator"], int(d["out"]), int(d["in"]),
                    node_from_json(d["inner"]))
    if k == "prod":
        return Prod(tuple(node_from_json(c) for c in d["children"]))
    raise StructuralError(f"unknown node kind {k!r}")


def term_to_json(t: Term) -> dict:
    return {"coefficient": [t.coeff.numerator, t.coeff.denominator],
            "node": node_to_json(t.node)}


def term_from_json(d: dict) -> Term:
    num, den = d["coefficient"]
    return Term(Fraction(num, den), node_from_json(d["node"]))


def termsum_to_json(s: TermSum) -> list:
    return [term_to_json(t) for t in s.terms()]


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
