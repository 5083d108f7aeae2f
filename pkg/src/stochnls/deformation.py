"""Covariance deformations of the functional algebra and kernel diagrams.

``deformed_product`` and ``deform`` implement the local product in which
every Phi leg may be contracted against a Phi-bar leg of a *different*
factor.  A contraction between two legs sitting at the same base point
becomes a coinciding-point token (``Cbar`` at a root or under ``G``, ``C``
under ``Gbar``); a contraction whose legs sit at different vertices of the
convolution tree becomes a covariance edge (a pair of ``Link`` atoms).

``bullet_product`` is the multilocal analogue: only legs in different slots
are contracted and every contraction is an edge.

>>> from stochnls.functional_algebra import make_generator, convolve
>>> phi, phibar = make_generator("Phi"), make_generator("PhiBar")
>>> print(deform(phibar * phi * phi))
Φ̄Φ² + 2C̄Φ
>>> print(deform(convolve(False, phibar * phi * phi)))
G⊛(Φ̄Φ²) + 2G⊛(C̄Φ)
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Iterable, Sequence

from .functional_algebra import (
    AlgebraError,
    CoeffToken,
    Conv,
    Expr,
    FieldLeg,
    Link,
    Operand,
    canonical_slots,
    convolve,
    iter_atoms,
    make_generator,
    max_link,
    multiply,
    shift_links,
    tensor,
)

# ---------------------------------------------------------------------------
# leg bookkeeping


def leg_paths(atoms: tuple, prefix: tuple = ()) -> list:
    """``(path, bar)`` for every FieldLeg in a tree; a path indexes nested tuples."""
    out = []
    for i, a in enumerate(atoms):
        if isinstance(a, FieldLeg):
            out.append((prefix + (i,), a.bar))
        elif isinstance(a, Conv):
            out.extend(leg_paths(a.arg, prefix + (i,)))
    return out


def leg_classes(atoms: tuple, prefix: tuple = ()) -> list:
    """``(vertex_path, bar, count)`` for identical legs sharing a vertex."""
    counts: dict = {}
    for path, bar in leg_paths(atoms, prefix):
        key = (path[:-1], bar)
        counts[key] = counts.get(key, 0) + 1
    return [(v, bar, n) for (v, bar), n in counts.items()]


def _count_matchings(left: list, right: list, allowed) -> Iterable[tuple]:
    """Contraction patterns between leg classes, with their multiplicity.

    Yields ``(pairs, weight)``: ``pairs`` lists ``(left_index, right_index,
    count)`` and ``weight`` is the number of leg-level matchings realising
    the pattern.
    """
    cand = [(i, j) for i, (_, bi, _) in enumerate(left) for j, (_, bj, _) in enumerate(right)
            if bi != bj and allowed(i, j)]
    left_free = [n for _, _, n in left]
    right_free = [n for _, _, n in right]

    def rec(idx):
        if idx == len(cand):
            yield [], 1
            return
        i, j = cand[idx]
        for x in range(min(left_free[i], right_free[j]) + 1):
            # pick x free legs on each side, then pair them up
            w = comb(left_free[i], x) * comb(right_free[j], x) * factorial(x)
            left_free[i] -= x
            right_free[j] -= x
            for rest, wr in rec(idx + 1):
                yield ([(i, j, x)] + rest if x else rest), w * wr
            left_free[i] += x
            right_free[j] += x

    yield from rec(0)


def _edit(atoms: tuple, edits: dict, prefix: tuple = ()) -> tuple:
    """Drop legs and append atoms per vertex; ``edits[vertex] = [drop_phi, drop_bar, extra]``."""
    drop_phi, drop_bar, extra = edits.get(prefix, (0, 0, ()))
    out = []
    for i, a in enumerate(atoms):
        if isinstance(a, FieldLeg):
            if a.bar and drop_bar:
                drop_bar -= 1
                continue
            if not a.bar and drop_phi:
                drop_phi -= 1
                continue
        elif isinstance(a, Conv):
            a = Conv(a.bar, _edit(a.arg, edits, prefix + (i,)))
        out.append(a)
    return tuple(out) + tuple(extra)


def _add_edit(edits: dict, vertex: tuple, bar: bool, count: int, extra: tuple):
    e = edits.setdefault(vertex, [0, 0, ()])
    e[1 if bar else 0] += count
    e[2] = e[2] + extra


def _contract_pair(bar_left: bool, label: int):
    """Link atoms for a pair; returns (left_atoms, right_atoms)."""
    # end 0 sits where Phi was, end 1 where Phi-bar was
    if bar_left:
        return (Link(1, label),), (Link(0, label),)
    return (Link(0, label),), (Link(1, label),)


# ---------------------------------------------------------------------------
# local deformed product


@lru_cache(maxsize=100_000)
def _deformed_atoms(a: tuple, b: tuple) -> dict:
    b = shift_links((b,), max_link((a,)))[0]
    next_label = max_link((a, b)) + 1
    left, right = leg_classes(a), leg_classes(b)
    out: dict = {}
    for pairs, weight in _count_matchings(left, right, lambda i, j: True):
        edits_a, edits_b, extra = {}, {}, []
        label = next_label
        for i, j, x in pairs:
            va, bar_a, _ = left[i]
            vb, bar_b, _ = right[j]
            if va == () and vb == ():
                _add_edit(edits_a, va, bar_a, x, ())
                _add_edit(edits_b, vb, bar_b, x, ())
                extra.extend([CoeffToken("Cbar")] * x)
                continue
            la, lb = [], []
            for _ in range(x):
                ra, rb = _contract_pair(bar_a, label)
                la.extend(ra)
                lb.extend(rb)
                label += 1
            _add_edit(edits_a, va, bar_a, x, tuple(la))
            _add_edit(edits_b, vb, bar_b, x, tuple(lb))
        atoms = _edit(a, edits_a) + _edit(b, edits_b) + tuple(extra)
        key = canonical_slots((atoms,))
        out[key] = out.get(key, 0) + weight
    return out


def deformed_product(a: Expr, b: Expr) -> Expr:
    """Pointwise product plus every Phi/Phi-bar contraction between ``a`` and ``b``.

    Each partial matching of legs of ``a`` against opposite-bar legs of
    ``b`` (at any nesting depth) contributes with weight one.
    """
    if a.nslots != 1 or b.nslots != 1:
        raise AlgebraError("the local deformed product acts on single-slot expressions")
    acc: dict = {}
    for (la, (sa,)), ca in a.items():
        for (lb, (sb,)), cb in b.items():
            for slots, mult in _deformed_atoms(sa, sb).items():
                key = (la + lb, slots)
                acc[key] = acc.get(key, 0) + ca * cb * mult
    return Expr(acc, _canonical=True)


def gamma_dot(product: Sequence[Expr]) -> Expr:
    """Left fold of ``deformed_product`` over already-deformed factors."""
    out = make_generator("One")
    for factor in product:
        if isinstance(factor, Expr) and factor.nslots != 1:
            raise AlgebraError("gamma_dot factors must be single-slot expressions")
        out = deformed_product(out, factor)
    return out


@lru_cache(maxsize=100_000)
def _deform_atoms(atoms: tuple) -> Expr:
    passive = []
    factors = []
    for a in atoms:
        if isinstance(a, FieldLeg):
            factors.append(Expr({(0, ((a,),)): 1}, _canonical=True))
        elif isinstance(a, Conv):
            factors.append(convolve(a.bar, _deform_atoms(a.arg)))
        else:
            passive.append(a)
    if any(isinstance(a, Link) for a in passive):
        # edges already present must stay attached to their own vertex
        raise AlgebraError("cannot deform an expression that already carries covariance edges")
    head = Expr({(0, (tuple(passive),)): 1})
    return gamma_dot([head] + factors)


def deform(expr: Expr) -> Expr:
    """The deformation map applied to every monomial (linear extension).

    Convolutions are deformed from the inside out, so that deforming
    ``G (*) tau`` gives ``G (*) deform(tau)``, and the outer factors are then
    combined with ``deformed_product``.
    """
    if expr.nslots != 1:
        raise AlgebraError("deform acts on single-slot expressions")
    acc = Expr()
    for (lam, (atoms,)), c in expr.items():
        acc = acc + _deform_atoms(atoms).scale(c, lam)
    return acc


# ---------------------------------------------------------------------------
# multilocal product


def bullet_product(slots: Sequence) -> Expr:
    """Contract legs across distinct slots only; returns a multi-slot expression.

    ``slots`` is a sequence of single-slot expressions, or of
    ``(expression, label)`` pairs (labels are ignored here and only used
    by ``to_diagrams``).
    """
    exprs = [s[0] if isinstance(s, tuple) else s for s in slots]
    if not exprs:
        raise AlgebraError("bullet_product needs at least one slot")
    prod = exprs[0]
    for e in exprs[1:]:
        prod = tensor(prod, e)
    acc: dict = {}
    for (lam, sl), c in prod.items():
        for key, mult in _bullet_slots(sl).items():
            acc[(lam, key)] = acc.get((lam, key), 0) + c * mult
    return Expr(acc, prod.nslots, _canonical=True)


@lru_cache(maxsize=50_000)
def _bullet_slots(slots: tuple) -> dict:
    classes = [((i,) + v, bar, n) for i, s in enumerate(slots) for v, bar, n in leg_classes(s)]
    phis = [c for c in classes if not c[1]]
    bars = [c for c in classes if c[1]]
    next_label = max_link(slots) + 1
    out: dict = {}
    for pairs, weight in _count_matchings(phis, bars, lambda i, j: phis[i][0][0] != bars[j][0][0]):
        edits = [dict() for _ in slots]
        label = next_label
        for i, j, x in pairs:
            vp, vb = phis[i][0], bars[j][0]
            ends = [_contract_pair(False, label + t) for t in range(x)]
            label += x
            _add_edit(edits[vp[0]], vp[1:], False, x, tuple(e[0][0] for e in ends))
            _add_edit(edits[vb[0]], vb[1:], True, x, tuple(e[1][0] for e in ends))
        new = tuple(_edit(s, edits[i]) for i, s in enumerate(slots))
        key = canonical_slots(new)
        out[key] = out.get(key, 0) + weight
    return out


# ---------------------------------------------------------------------------
# counterterm shifts


@dataclass(frozen=True)
class CountertermShift:
    """Alternative coinciding-point extension ``C' = C + scale * DeltaC``.

    ``applies_at`` is the minimal ``(phi, phibar)`` degree of the undeformed
    monomial on which the shift can act; lower degrees contain no
    contraction and are left untouched.
    """

    delta_c: str = "DeltaC"
    scale: Fraction = Fraction(1)
    applies_at: tuple = (1, 1)

    def is_zero(self) -> bool:
        return self.scale == 0


def apply_counterterm_shift(expr: Expr, shift: CountertermShift) -> Expr:
    """Replace every ``C``/``Cbar`` token by its shifted counterpart and re-expand."""
    if shift.delta_c not in ("DeltaC", "DeltaCbar"):
        raise AlgebraError(f"unknown shift token {shift.delta_c!r}")
    if shift.is_zero():
        return expr

    def expand_atoms(atoms):
        # returns list of (coeff, atoms)
        choices = []
        for a in atoms:
            if isinstance(a, CoeffToken) and a.name in ("C", "Cbar"):
                alt = "DeltaC" if a.name == "C" else "DeltaCbar"
                choices.append([(Fraction(1), (a,)), (Fraction(shift.scale), (CoeffToken(alt),))])
            elif isinstance(a, Conv):
                choices.append([(c, (Conv(a.bar, inner),)) for c, inner in expand_atoms(a.arg)])
            else:
                choices.append([(Fraction(1), (a,))])
        out = []
        for combo in itertools.product(*choices):
            c = Fraction(1)
            new = ()
            for ci, ai in combo:
                c *= ci
                new += ai
            out.append((c, new))
        return out

    acc: dict = {}
    for (lam, slots), c in expr.items():
        per_slot = [expand_atoms(s) for s in slots]
        for combo in itertools.product(*per_slot):
            coeff = c
            for ci, _ in combo:
                coeff *= ci
            key = (lam, tuple(a for _, a in combo))
            acc[key] = acc.get(key, 0) + coeff
    return Expr(acc, expr.nslots)


# ---------------------------------------------------------------------------
# diagrams

EDGE_KINDS = ("G", "Gbar", "Q", "Qbar")
_TOKEN_DECORATION = {"C": "C", "Cbar": "Cbar", "Chi": "Chi", "Eta": "EtaLeg", "EtaBar": "EtaBarLeg",
                     "DeltaC": "DeltaC", "DeltaCbar": "DeltaCbar"}


@dataclass
class Diagram:
    """Kernel graph of one monomial.

    Vertices ``0..len(externals)-1`` are the external slots (in order); the
    remaining ones are integration vertices, one per convolution.  Edges are
    ``(src, dst, kind)``.  ``G``/``Gbar`` edges point from the outer vertex
    to the convolved one.  Covariance edges are stored with ``src < dst``;
    the kind is ``Q`` when ``src`` carries the unbarred argument and
    ``Qbar`` otherwise, so ``(a, b, "Qbar")`` means ``Q(b, a)``.
    """

    externals: list
    decorations: list
    edges: list
    symmetry_factor: Fraction = Fraction(1)
    lambda_power: int = 0
    roles: list = field(default=None)

    def __post_init__(self):
        self.symmetry_factor = Fraction(self.symmetry_factor)
        self.decorations = [tuple(sorted(d)) for d in self.decorations]
        self.edges = [(int(s), int(t), str(k)) for s, t, k in self.edges]
        if self.roles is None:
            self.roles = ["external"] * len(self.externals) + ["internal"] * (len(self.decorations) - len(self.externals))
        for s, t, k in self.edges:
            if k not in EDGE_KINDS:
                raise AlgebraError(f"unknown edge kind {k!r}")
            if not (0 <= s < self.n_vertices and 0 <= t < self.n_vertices):
                raise AlgebraError(f"edge {(s, t, k)} references a missing vertex")

    @property
    def n_vertices(self) -> int:
        return len(self.decorations)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def internal(self) -> list:
        return list(range(len(self.externals), self.n_vertices))

    def edges_of_kind(self, kind: str) -> list:
        return [e for e in self.edges if e[2] == kind]

    def is_forest(self) -> bool:
        parent = list(range(self.n_vertices))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for s, t, _ in self.edges:
            rs, rt = find(s), find(t)
            if rs == rt:
                return False
            parent[rs] = rt
        return True

    # -- canonical form
    def canonical_key(self) -> tuple:
        """Isomorphism-invariant key (externals are fixed, internals permuted)."""
        ext = len(self.externals)
        internal = self.internal

        def vkey(v):
            deg = sorted((k, s == v) for s, t, k in self.edges if v in (s, t))
            return (self.decorations[v], tuple(deg))

        classes = {}
        for v in internal:
            classes.setdefault(vkey(v), []).append(v)
        ordered = [classes[k] for k in sorted(classes)]
        n_perm = 1
        for g in ordered:
            for i in range(2, len(g) + 1):
                n_perm *= i
        if n_perm > 50_000:
            raise AlgebraError("diagram too symmetric to canonicalise")
        best = None
        for perms in itertools.product(*(itertools.permutations(g) for g in ordered)):
            mapping = {i: i for i in range(ext)}
            nxt = ext
            for perm in perms:
                for v in perm:
                    mapping[v] = nxt
                    nxt += 1
            edges = []
            for s, t, k in self.edges:
                s2, t2 = mapping[s], mapping[t]
                if k in ("Q", "Qbar") and s2 > t2:
                    s2, t2, k = t2, s2, ("Qbar" if k == "Q" else "Q")
                edges.append((s2, t2, k))
            decs = [None] * self.n_vertices
            for v, nv in mapping.items():
                decs[nv] = self.decorations[v]
            cand = (tuple(decs), tuple(sorted(edges)))
            if best is None or cand < best:
                best = cand
        return (ext, self.lambda_power, self.symmetry_factor) + best

    def shape_key(self) -> tuple:
        """Canonical key without the coefficient."""
        k = self.canonical_key()
        return (k[0], k[1]) + k[3:]

    def __eq__(self, other):
        if not isinstance(other, Diagram):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        return hash(self.canonical_key())

    # -- serialisation
    def to_json(self) -> dict:
        return {
            "externals": list(self.externals),
            "vertices": [{"role": r, "decorations": list(d)} for r, d in zip(self.roles, self.decorations)],
            "edges": [[s, t, k] for s, t, k in self.edges],
            "symmetry_factor": [self.symmetry_factor.numerator, self.symmetry_factor.denominator],
            "lambda": self.lambda_power,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Diagram":
        num, den = d["symmetry_factor"]
        return cls(externals=list(d["externals"]),
                   decorations=[tuple(v["decorations"]) for v in d["vertices"]],
                   roles=[v["role"] for v in d["vertices"]],
                   edges=[tuple(e) for e in d["edges"]],
                   symmetry_factor=Fraction(num, den), lambda_power=int(d.get("lambda", 0)))

    def to_dot(self, name: str = "diagram") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for v, (role, dec) in enumerate(zip(self.roles, self.decorations)):
            label = self.externals[v] if role == "external" else f"y{v - len(self.externals) + 1}"
            if dec:
                label += "\\n{" + ",".join(dec) + "}"
            shape = "box" if role == "external" else "circle"
            lines.append(f'  v{v} [label="{label}", shape={shape}];')
        for s, t, k in self.edges:
            style = "" if k in ("G", "Gbar") else ", style=dashed, dir=none"
            lines.append(f'  v{s} -> v{t} [label="{k}"{style}];')
        coeff = self.symmetry_factor
        lines.append(f'  label="factor {coeff}, lambda^{self.lambda_power}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def describe(self) -> str:
        names = list(self.externals) + [f"y{i + 1}" for i in range(self.n_vertices - len(self.externals))]
        parts = []
        for s, t, k in sorted(self.edges, key=lambda e: (EDGE_KINDS.index(e[2]), e[0], e[1])):
            parts.append(f"{k}({names[s]},{names[t]})")
        for v, dec in enumerate(self.decorations):
            if dec:
                parts.append(f"{names[v]}:{{{','.join(dec)}}}")
        return f"{self.symmetry_factor}·λ^{self.lambda_power} " + " ".join(parts)


def _monomial_diagram(slots: tuple, coeff: Fraction, lam: int, labels: Sequence[str], strict: bool) -> Diagram:
    decorations = [[] for _ in slots]
    edges = []
    link_ends: dict = {}

    def visit(atoms, vertex):
        for a in atoms:
            if isinstance(a, FieldLeg):
                if strict:
                    raise AlgebraError("diagram still has uncontracted field legs")
                decorations[vertex].append("EtaBarLeg" if a.bar else "EtaLeg")
            elif isinstance(a, CoeffToken):
                if strict and a.name in ("Eta", "EtaBar"):
                    raise AlgebraError("diagram carries Eta tokens and cannot be evaluated as a kernel")
                decorations[vertex].append(_TOKEN_DECORATION[a.name])
            elif isinstance(a, Link):
                link_ends.setdefault(a.label, [None, None])[a.end] = vertex
            elif isinstance(a, Operand):
                raise AlgebraError("operator placeholders have no diagram")
            else:
                child = len(decorations)
                decorations.append([])
                edges.append((vertex, child, "Gbar" if a.bar else "G"))
                visit(a.arg, child)

    for i, s in enumerate(slots):
        visit(s, i)
    for label in sorted(link_ends):
        phi_v, bar_v = link_ends[label]
        if phi_v <= bar_v:
            edges.append((phi_v, bar_v, "Q"))
        else:
            edges.append((bar_v, phi_v, "Qbar"))
    return Diagram(externals=list(labels), decorations=decorations, edges=edges,
                   symmetry_factor=coeff, lambda_power=lam)


def to_diagrams(expr: Expr, labels: Sequence[str] | None = None, strict: bool = False) -> list:
    """One diagram per monomial; the coefficient becomes the symmetry factor."""
    if labels is None:
        labels = [f"x{i + 1}" for i in range(expr.nslots)]
    if len(labels) != expr.nslots:
        raise AlgebraError("one label per slot is required")
    return [_monomial_diagram(slots, c, lam, labels, strict) for (lam, slots), c in expr.items()]


def diagrams_to_json(diagrams: Sequence[Diagram]) -> str:
    return json.dumps([d.to_json() for d in diagrams], indent=1, sort_keys=True)


def diagrams_from_json(text: str) -> list:
    return [Diagram.from_json(d) for d in json.loads(text)]


def diagram_multiset(diagrams: Iterable[Diagram]) -> dict:
    """Merge diagrams by shape, summing coefficients; zero entries dropped."""
    acc: dict = {}
    for d in diagrams:
        k = d.shape_key()
        acc[k] = acc.get(k, 0) + d.symmetry_factor
    return {k: v for k, v in acc.items() if v}


__all__ = [
    "CountertermShift", "Diagram", "apply_counterterm_shift", "bullet_product", "deform",
    "deformed_product", "diagram_multiset", "diagrams_from_json", "diagrams_to_json",
    "gamma_dot", "leg_paths", "multiply", "to_diagrams",
]
