"""Noise-encoding deformation maps as contraction combinatorics.

The local map acts on a canonical term by summing over all injective
partial pairings of Phi leaves with PhiBar leaves.  A pairing between
leaves at distinct vertices inserts a covariance edge: Q when the Phi
factor stands to the left of the PhiBar factor, Q_tilde (which carries the
sign of its kernel) for the opposite orientation.  A pairing between two
leaves of the same pointwise vertex is a coincident-point product: if the
pair is wired through the vertex's gamma insertions the ill-defined kernel
is replaced by a named counterterm tag, otherwise the diagonal kernel is
kept as an explicit Q/Q_tilde loop with a DeltaDiag marker.

Counterterm naming follows the branch structure of the cubic vertex: a
vertex whose factors carry a majority of spinor lines tags as Ctilde, a
cospinor-majority vertex tags as C.  Each tagged pairing carries weight
1/2 because the named constant denotes the lump of the two pairings of a
cubic vertex; this normalization is what makes the first renormalized
coefficient equal exactly Ctilde and the renormalized equation close at
higher orders.

The multilocal product deforms tensor products of already-deformed
factors: cross contractions between the tensor slots insert Q/Q_tilde with
no diagonal marker, and same-slot leaves are never re-contracted.
Expectation values are evaluations at the zero field configuration, i.e.
only fully contracted diagrams survive; an odd leaf count makes every
such sum empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from math import comb, factorial

from .diagrams import (
    DeformedSum, Diagram, convolved, free_leaves, iter_children, max_pair_id,
    replace_at, shift_pair_ids, tensor, vertex_join,
)
from .perturbation import COSPINOR, SPINOR, PerturbativeSeries
from .terms import (
    GPSI, PHI, PHIBAR,
    Conv, Const, Gamma, Leaf, Prod, Term, TermSum, Unit,
    StructuralError, canonicalize, grading,
)

CTILDE = "Ctilde"
C = "C"


class ExtractionError(RuntimeError):
    """Residual not of counterterm-operator form: contraction-engine bug."""


class DomainError(ValueError):
    pass


# --------------------------------------------------------------------------
# leaf census of a term
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LeafInfo:
    pos: int            # order of appearance in the canonical tree
    species: str
    vertex: tuple       # path of the enclosing pointwise vertex
    taggable: bool      # gamma-wired vertex: coincident pairs become tags
    tag: str            # counterterm name used if a coincident pair is tagged


def _vertex_profile(children):
    """(has_gamma, tag name) from the factor polarities at one vertex."""
    has_gamma = any(isinstance(c, Gamma) for c in children)
    up = down = 0
    for c in children:
        if isinstance(c, Leaf):
            up, down = (up + 1, down) if c.species == PHI else (up, down + 1)
        elif isinstance(c, Conv):
            up, down = (up + 1, down) if c.kind == GPSI else (up, down + 1)
    return has_gamma, (CTILDE if up >= down else C)


def _collect(node, path, vertex, taggable, tag, template, leaves):
    """Build the skeleton template and the leaf census in one pass."""
    if isinstance(node, Unit):
        return
    if isinstance(node, Leaf):
        ref = len(leaves)
        leaves.append(LeafInfo(ref, node.species, vertex, taggable, tag))
        template.append(("leafref", ref))
    elif isinstance(node, Gamma):
        pass
    elif isinstance(node, Const):
        template.append(("const", node.name))
    elif isinstance(node, Conv):
        sub: list = []
        inner_vertex = path + ("c",)
        if isinstance(node.inner, Prod):
            has_gamma, name = _vertex_profile(node.inner.children)
            _collect(node.inner, inner_vertex, inner_vertex, has_gamma, name,
                     sub, leaves)
        else:
            _collect(node.inner, inner_vertex, inner_vertex, False, CTILDE,
                     sub, leaves)
        template.append(("conv", node.kind, tuple(sub)))
    elif isinstance(node, Prod):
        for i, c in enumerate(node.children):
            _collect(c, path + (i,), vertex, taggable, tag, template, leaves)
    else:  # pragma: no cover
        raise TypeError(node)


def term_census(t: Term):
    """(template, leaves) of a canonical term."""
    template: list = []
    leaves: list = []
    node = t.node
    if isinstance(node, Prod):
        has_gamma, name = _vertex_profile(node.children)
        _collect(node, (), (), has_gamma, name, template, leaves)
    else:
        _collect(node, (), (), False, CTILDE, template, leaves)
    return tuple(template), leaves


# --------------------------------------------------------------------------
# pairings
# --------------------------------------------------------------------------

def partial_matchings(phis, phibars):
    """All injective partial matchings of the two leaf lists."""
    top = min(len(phis), len(phibars))
    for k in range(top + 1):
        for ps in combinations(phis, k):
            for qs in permutations(phibars, k):
                yield tuple(zip(ps, qs))


def contraction_count(r: int, r_bar: int, k: int) -> int:
    """Number of k-pair matchings of r Phi with r_bar PhiBar leaves."""
    if k < 0 or k > min(r, r_bar):
        raise DomainError(f"k={k} outside 0..min({r},{r_bar})")
    return factorial(k) * comb(r, k) * comb(r_bar, k)


def brute_force_contractions(r: int, r_bar: int, k: int) -> int:
    """Independent oracle: enumerate the matchings and count them."""
    return sum(1 for m in partial_matchings(range(r), range(r_bar))
               if len(m) == k)


# --------------------------------------------------------------------------
# the local deformation map
# --------------------------------------------------------------------------

def _instantiate(template, roles):
    out = []
    for entry in template:
        if entry[0] == "leafref":
            role = roles[entry[1]]
            if role is not None:
                out.append(role)
        elif entry[0] == "conv":
            out.append(("conv", entry[1], _instantiate(entry[2], roles)))
        else:
            out.append(entry)
    return tuple(out)


def _diagram_for_matching(t, template, leaves, matching):
    roles: dict = {i: ("free", leaves[i].species) for i in range(len(leaves))}
    weight = Fraction(1)
    pid = 0
    for li, lj in matching:
        a, b = leaves[li], leaves[lj]
        first, second = (a, b) if a.pos < b.pos else (b, a)
        qt = "Q" if first.species == PHI else "Qt"
        if a.vertex == b.vertex:
            if a.taggable:
                roles[first.pos] = ("ctloop", a.tag)
                weight /= 2
            else:
                roles[first.pos] = ("qloop", qt)
            roles[second.pos] = None
        else:
            roles[a.pos] = ("pair", pid, a.species, qt)
            roles[b.pos] = ("pair", pid, b.species, qt)
            pid += 1
    body = _instantiate(template, roles)
    return Diagram((body,), t.coeff * weight)


def _require_canonical(t: Term) -> Term:
    if canonicalize(t).node != t.node:
        raise StructuralError("gamma_Q requires canonicalized input")
    return t


def gamma_Q(x: Term | TermSum) -> DeformedSum:
    """Local deformation: sum over all partial leaf pairings of each term."""
    terms = x.terms() if isinstance(x, TermSum) else [_require_canonical(x)]
    ds = DeformedSum(origin="gamma_Q")
    for t in terms:
        template, leaves = term_census(t)
        phis = [l.pos for l in leaves if l.species == PHI]
        bars = [l.pos for l in leaves if l.species == PHIBAR]
        for matching in partial_matchings(phis, bars):
            ds.add(_diagram_for_matching(t, template, leaves, matching))
    return ds


def gamma_Q_convolved(kind: str, x: Term | TermSum) -> DeformedSum:
    """convolve(G, .) pushed through the deformation, diagram by diagram."""
    inner = gamma_Q(x)
    ds = DeformedSum(origin=inner.origin)
    for d in inner:
        ds.add(convolved(kind, d))
    return ds


# --------------------------------------------------------------------------
# multilocal cross contractions
# --------------------------------------------------------------------------

def bullet_cross(da: Diagram, db: Diagram) -> list[Diagram]:
    """All cross-contraction completions of the tensor product da (x) db.

    Factors are already deformed, so only pairs straddling the two factors
    are formed; the left factor's species fixes Q versus Q_tilde and no
    diagonal marker appears.
    """
    base = tensor(da, db)
    n_a = len(da.slots)
    frees = free_leaves(base)
    a_phi = [p for sp, p in frees if sp == PHI and p[0] < n_a]
    a_bar = [p for sp, p in frees if sp == PHIBAR and p[0] < n_a]
    b_phi = [p for sp, p in frees if sp == PHI and p[0] >= n_a]
    b_bar = [p for sp, p in frees if sp == PHIBAR and p[0] >= n_a]
    out = []
    pid0 = _next_pid(base)
    for m1 in partial_matchings(a_phi, b_bar):
        for m2 in partial_matchings(a_bar, b_phi):
            d = base
            pid = pid0
            for pa, pb in m1:  # Phi on the left: Q
                d = replace_at(d, pa, ("pair", pid, PHI, "Q"))
                d = replace_at(d, pb, ("pair", pid, PHIBAR, "Q"))
                pid += 1
            for pa, pb in m2:  # PhiBar on the left: Q_tilde
                d = replace_at(d, pa, ("pair", pid, PHIBAR, "Qt"))
                d = replace_at(d, pb, ("pair", pid, PHI, "Qt"))
                pid += 1
            out.append(d)
    return out


def _next_pid(d: Diagram) -> int:
    return max_pair_id(d) + 1


# --------------------------------------------------------------------------
# renormalization freedom
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RenormalizationShift:
    """Additive redefinition of one extension choice.

    Two admissible deformation maps differ by grading-indexed linear maps;
    the (j, j_bar) map annihilates every module of polynomial degree
    (r, r_bar) with r <= j+1 or r_bar <= j_bar+1.  A shift is recorded as a
    fresh named constant, never evaluated.
    """

    target: str      # counterterm id being shifted (e.g. Ctilde)
    j: int
    j_bar: int
    label: str       # fresh symbol for the shifted extension

    def vanishes_on(self, r: int, r_bar: int) -> bool:
        return r <= self.j + 1 or r_bar <= self.j_bar + 1


def shifted_gamma_Q(x: Term | TermSum, shift: RenormalizationShift) -> DeformedSum:
    """Deformation by the shifted map: on terms where the shift does not
    vanish, every tagged loop named `shift.target` additionally contributes
    a diagram retagged with the shift label."""
    terms = x.terms() if isinstance(x, TermSum) else [_require_canonical(x)]
    ds = DeformedSum(origin=f"gamma_Q+{shift.label}")
    for t in terms:
        base = gamma_Q(TermSum([t]))
        ds.extend(base)
        g = grading(t)
        if shift.vanishes_on(g.r, g.r_bar):
            continue
        for d in base:
            for ch, p in iter_children(d):
                if ch == ("ctloop", shift.target):
                    ds.add(replace_at(d, p, ("ctloop", shift.label)))
    return ds


# --------------------------------------------------------------------------
# expectation values and two-point functions
# --------------------------------------------------------------------------

def expectation(series: PerturbativeSeries, k: int,
                branch: str = SPINOR) -> DeformedSum:
    """Deformed coefficient at the zero configuration; empty by leaf parity."""
    ds, _ = expectation_report(series, k, branch)
    return ds


def expectation_report(series: PerturbativeSeries, k: int,
                       branch: str = SPINOR) -> tuple[DeformedSum, int]:
    """(surviving diagrams, number of contraction patterns examined)."""
    ds = DeformedSum(origin=f"expectation[{branch}]", order=k)
    examined = 0
    for t in series.coefficient(k, branch):
        template, leaves = term_census(t)
        phis = [l.pos for l in leaves if l.species == PHI]
        bars = [l.pos for l in leaves if l.species == PHIBAR]
        for matching in partial_matchings(phis, bars):
            examined += 1
            if 2 * len(matching) == len(leaves):
                ds.add(_diagram_for_matching(t, template, leaves, matching))
    return ds, examined


def two_point(series: PerturbativeSeries, branch_a: str, branch_b: str,
              K: int) -> dict[int, DeformedSum]:
    """Order-by-order cross-deformed tensor product at zero configuration."""
    ga = {k: gamma_Q(series.coefficient(k, branch_a)) for k in range(K + 1)}
    gb = {k: gamma_Q(series.coefficient(k, branch_b)) for k in range(K + 1)}
    out = {}
    for k in range(K + 1):
        ds = DeformedSum(origin=f"two_point[{branch_a},{branch_b}]", order=k)
        for k1 in range(k + 1):
            for da in ga[k1]:
                for db in gb[k - k1]:
                    for d in bullet_cross(da, db):
                        if not free_leaves(d):
                            ds.add(d)
        out[k] = ds
    return out


# --------------------------------------------------------------------------
# counterterm extraction and the renormalized equation
# --------------------------------------------------------------------------

@dataclass
class CountertermOperator:
    """H_k: operator diagrams with one marked argument slot each."""

    order: int
    ops: DeformedSum

    def argument_species(self) -> set:
        sps = set()
        for d in self.ops:
            for ch, _ in _iter(d):
                if ch[0] == "argport":
                    sps.add(ch[1])
        return sps

    def is_even(self) -> bool:
        """Even polynomial field degree: all odd derivatives vanish at zero."""
        return all(len(free_leaves(d)) % 2 == 0 for d in self.ops)

    def as_term(self) -> Term:
        """Multiplication-operator form, available when no propagator or
        free leaf remains (e.g. H_1 = Ctilde)."""
        total = None
        for d in self.ops:
            kinds = sorted(ch[0] for ch, _ in _iter(d))
            names = [ch[1] for ch, _ in _iter(d) if ch[0] in ("ctloop", "const")]
            if any(k in ("free", "pair", "qloop", "conv") for k in kinds):
                raise ExtractionError("operator is not a pointwise multiplication")
            if len(names) != 1:
                raise ExtractionError("composite multiplication operator")
            t = Term(d.coeff, Const(names[0], self.order, 0, 1))
            total = t if total is None else _term_add(total, t)
        if total is None:
            raise ExtractionError("empty operator")
        return total


def _term_add(a: Term, b: Term) -> Term:
    from .terms import canonical_key as term_key
    if term_key(a) != term_key(b):
        raise ExtractionError("operator is a sum of distinct terms")
    return Term(a.coeff + b.coeff, a.node)


def _iter(d: Diagram):
    return iter_children(d)


def apply_operator(op_diag: Diagram, u: Diagram) -> Diagram:
    """Graft u into the operator's argument slot (operator composition)."""
    if len(u.slots) != 1:
        raise ExtractionError("operator argument must be single-slot")
    port = None
    for ch, p in _iter(op_diag):
        if ch[0] == "argport":
            port = p
    if port is None:
        raise ExtractionError("operator diagram has no argument slot")
    shifted = shift_pair_ids(u.slots[0], max_pair_id(op_diag) + 1)
    grafted = replace_at(op_diag, port, list(shifted))
    return Diagram(grafted.slots, grafted.coeff * u.coeff)


def _designate(d: Diagram) -> Diagram:
    """Replace the preferred free leaf by an argument port."""
    frees = free_leaves(d)
    if not frees:
        raise ExtractionError("residual diagram with no free leaf")
    phis = [(sp, p) for sp, p in frees if sp == PHI]
    sp, p = (phis or frees)[0]
    return replace_at(d, p, ("argport", sp))


def _strip_and_mark(residual: DeformedSum, order: int) -> CountertermOperator:
    ops = DeformedSum(origin=f"H_{order}", order=order)
    for d in residual:
        if len(d.slots) != 1 or len(d.slots[0]) != 1 or \
                d.slots[0][0][0] != "conv" or d.slots[0][0][1] != GPSI:
            raise ExtractionError("residual not wrapped in the branch propagator")
        inner = Diagram((d.slots[0][0][2],), d.coeff)
        ops.add(_designate(inner))
    h = CountertermOperator(order, ops)
    if not h.is_even():
        raise ExtractionError(f"H_{order} has odd field degree")
    return h


def _pointwise_cubic(gf_bar, gf, k: int) -> DeformedSum:
    """Order-k part of G_psi * [(PsiBar g Psi) g Psi] with pointwise products
    of the already-deformed coefficients (no cross contractions)."""
    ds = DeformedSum(order=k)
    for k1 in range(k):
        for k2 in range(k - k1):
            k3 = k - 1 - k1 - k2
            for da in gf_bar[k1]:
                for db in gf[k2]:
                    for dc in gf[k3]:
                        ds.add(vertex_join(GPSI, [da, db, dc]))
    return ds


def extract_counterterms(series: PerturbativeSeries, K: int) -> dict[int, CountertermOperator]:
    """The operators H_k making the renormalized equation hold through K."""
    if K > series.max_order:
        raise DomainError("K above series order")
    gf = {k: gamma_Q(series.coefficient(k, SPINOR)) for k in range(K + 1)}
    gf_bar = {k: gamma_Q(series.coefficient(k, COSPINOR)) for k in range(K + 1)}
    H: dict[int, CountertermOperator] = {}
    for k in range(1, K + 1):
        residual = DeformedSum(order=k)
        residual.extend(gf[k])
        residual.extend(_pointwise_cubic(gf_bar, gf, k), scale=-1)
        for j in range(1, k):
            for h in H[j].ops:
                source = gf if _port_species(h) == PHI else gf_bar
                for du in source[k - j]:
                    residual.add(convolved(GPSI, apply_operator(h, du)).scaled(-1))
        H[k] = _strip_and_mark(residual, k)
    return H


def _port_species(op_diag: Diagram) -> str:
    for ch, _ in _iter(op_diag):
        if ch[0] == "argport":
            return ch[1]
    raise ExtractionError("operator diagram has no argument slot")


def renormalized_residual(series: PerturbativeSeries,
                          H: dict[int, CountertermOperator], k: int) -> DeformedSum:
    """Order-k defect of the renormalized equation; empty when H is correct."""
    gf = {j: gamma_Q(series.coefficient(j, SPINOR)) for j in range(k + 1)}
    gf_bar = {j: gamma_Q(series.coefficient(j, COSPINOR)) for j in range(k)}
    residual = DeformedSum(order=k)
    residual.extend(gf[k])
    residual.extend(_pointwise_cubic(gf_bar, gf, k), scale=-1)
    for j in range(1, k + 1):
        for h in H[j].ops:
            source = gf if _port_species(h) == PHI else gf_bar
            for du in source[k - j]:
                residual.add(convolved(GPSI, apply_operator(h, du)).scaled(-1))
    return residual
