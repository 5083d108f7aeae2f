"""Independent brute-force references for the symbolic engine.

Nothing here imports the canonicalisation or contraction code of the
engine.  The Wick enumerator works on a plain nested-list description of a
product and emits labelled graphs; the Picard iterator uses nested tuples.
Library output is converted to the same graph form and compared through
Weisfeiler-Lehman hashes (networkx), so the two sides share no code path
beyond the final conversion.
"""
from __future__ import annotations

from collections import Counter
from fractions import Fraction
from itertools import combinations, permutations

import networkx as nx
import numpy as np

# ---------------------------------------------------------------------------
# Wick enumeration
#
# A factor spec is one of
#   "phi", "phibar", ("tok", name), ("conv", bar, [factor specs])
# and a product is a list of factor specs.


def random_product(rng: np.random.Generator, max_legs: int = 8, max_depth: int = 2) -> list:
    """Random product of generators, tokens and nested convolutions."""
    budget = int(rng.integers(1, max_legs + 1))

    def build(budget, depth):
        items = []
        while budget > 0:
            r = rng.random()
            if depth < max_depth and budget >= 2 and r < 0.25:
                inner_budget = int(rng.integers(1, budget + 1))
                inner = build(inner_budget, depth + 1)
                items.append(("conv", bool(rng.integers(2)), inner))
                budget -= inner_budget
            elif r < 0.32:
                items.append(("tok", "Chi"))
            else:
                items.append("phibar" if rng.integers(2) else "phi")
                budget -= 1
        return items

    return build(budget, 0)


def _legs(spec: list, vertex: tuple = ()) -> list:
    """``(vertex, bar)`` for each leg; vertex is the chain of conv positions."""
    out = []
    for i, item in enumerate(spec):
        if item == "phi":
            out.append((vertex, False))
        elif item == "phibar":
            out.append((vertex, True))
        elif isinstance(item, tuple) and item[0] == "conv":
            out.extend(_legs(item[2], vertex + (i,)))
    return out


def wick_matchings(spec: list) -> list:
    """All partial Phi/Phi-bar matchings as lists of (phi_index, bar_index)."""
    legs = _legs(spec)
    phis = [i for i, (_, bar) in enumerate(legs) if not bar]
    bars = [i for i, (_, bar) in enumerate(legs) if bar]
    out = []
    for r in range(min(len(phis), len(bars)) + 1):
        for chosen in combinations(phis, r):
            for partners in permutations(bars, r):
                out.append(list(zip(chosen, partners)))
    return out


def _spec_graph(spec: list, matching: list) -> nx.Graph:
    legs = _legs(spec)
    g = nx.Graph()
    g.add_node("root", kind="vertex:root")

    def add(items, node, vertex):
        for i, item in enumerate(items):
            if isinstance(item, tuple) and item[0] == "conv":
                child = f"v{vertex + (i,)}"
                g.add_node(child, kind="vertex")
                g.add_edge(node, child, kind="Gbar" if item[1] else "G")
                add(item[2], child, vertex + (i,))
            elif isinstance(item, tuple) and item[0] == "tok":
                t = f"t{len(g)}"
                g.add_node(t, kind="tok:" + _norm_token(item[1]))
                g.add_edge(node, t, kind="dec")

    add(spec, "root", ())
    node_of = {(): "root"}
    for v, _ in legs:
        node_of.setdefault(v, f"v{v}")
    used = set()
    for n, (pi, bi) in enumerate(matching):
        used.update((pi, bi))
        vp, vb = legs[pi][0], legs[bi][0]
        if vp == vb:
            t = f"c{n}"
            g.add_node(t, kind="tok:coinc")
            g.add_edge(node_of[vp], t, kind="dec")
        else:
            q = f"q{n}"
            g.add_node(q, kind="Q")
            g.add_edge(node_of[vp], q, kind="phi-end")
            g.add_edge(node_of[vb], q, kind="bar-end")
    for i, (v, bar) in enumerate(legs):
        if i not in used:
            t = f"l{i}"
            g.add_node(t, kind="leg:" + ("bar" if bar else "plain"))
            g.add_edge(node_of[v], t, kind="dec")
    return g


def _norm_token(name: str) -> str:
    # C and Cbar denote the same real coinciding-point kernel
    return "coinc" if name in ("C", "Cbar") else name


def graph_hash(g: nx.Graph) -> str:
    return nx.weisfeiler_lehman_graph_hash(g, node_attr="kind", edge_attr="kind",
                                           iterations=max(3, g.number_of_nodes()))


def wick_reference(spec: list) -> Counter:
    """``{graph hash: multiplicity}`` of the deformed product by brute force."""
    out = Counter()
    for m in wick_matchings(spec):
        out[graph_hash(_spec_graph(spec, m))] += 1
    return out


def expr_graph(atoms) -> nx.Graph:
    """Graph of one library monomial, in the same vocabulary as ``_spec_graph``."""
    from .functional_algebra import CoeffToken, Conv, FieldLeg, Link

    g = nx.Graph()
    g.add_node("root", kind="vertex:root")
    ends: dict = {}
    counter = [0]

    def fresh(prefix):
        counter[0] += 1
        return f"{prefix}{counter[0]}"

    def add(items, node):
        for a in items:
            if isinstance(a, Conv):
                child = fresh("v")
                g.add_node(child, kind="vertex")
                g.add_edge(node, child, kind="Gbar" if a.bar else "G")
                add(a.arg, child)
            elif isinstance(a, CoeffToken):
                t = fresh("t")
                g.add_node(t, kind="tok:" + _norm_token(a.name))
                g.add_edge(node, t, kind="dec")
            elif isinstance(a, FieldLeg):
                t = fresh("l")
                g.add_node(t, kind="leg:" + ("bar" if a.bar else "plain"))
                g.add_edge(node, t, kind="dec")
            elif isinstance(a, Link):
                ends.setdefault(a.label, [None, None])[a.end] = node
            else:
                raise TypeError(f"unsupported atom {a!r}")

    add(atoms, "root")
    for label, (vp, vb) in ends.items():
        q = f"q{label}"
        g.add_node(q, kind="Q")
        g.add_edge(vp, q, kind="phi-end")
        g.add_edge(vb, q, kind="bar-end")
    return g


def library_histogram(expr) -> Counter:
    out = Counter()
    for (lam, (atoms,)), c in expr.items():
        if c.denominator != 1 or c < 0:
            raise ValueError(f"non-integer multiplicity {c}")
        out[graph_hash(expr_graph(atoms))] += int(c)
    return out


def spec_to_expr(spec: list):
    """Build the undeformed library expression described by ``spec``."""
    from .functional_algebra import convolve, make_generator, multiply, token

    out = make_generator("One")
    for item in spec:
        if item == "phi":
            f = make_generator("Phi")
        elif item == "phibar":
            f = make_generator("PhiBar")
        elif item[0] == "tok":
            f = token(item[1])
        else:
            f = convolve(item[1], spec_to_expr(item[2]))
        out = multiply(out, f)
    return out


# ---------------------------------------------------------------------------
# Picard iteration
#
# Monomials are sorted tuples of factors; a factor is "P", "B" or
# ("G" | "H", monomial).  A series is {(power, monomial): Fraction}.


def _conj_factor(f):
    if f == "P":
        return "B"
    if f == "B":
        return "P"
    kind, mono = f
    return ("H" if kind == "G" else "G", _conj_mono(mono))


def _conj_mono(mono):
    return tuple(sorted((_conj_factor(f) for f in mono), key=repr))


def _mul(a: dict, b: dict, order: int) -> dict:
    out: dict = {}
    for (pa, ma), ca in a.items():
        for (pb, mb), cb in b.items():
            if pa + pb > order:
                continue
            key = (pa + pb, tuple(sorted(ma + mb, key=repr)))
            out[key] = out.get(key, 0) + ca * cb
    return {k: v for k, v in out.items() if v}


def picard_coefficients(kappa: int, order: int) -> list:
    """Coefficients of ``Psi = Phi + lam G(conj(Psi)^kappa Psi^(kappa+1))``.

    Iterates the fixed-point map ``order + 1`` times on truncated series;
    returns a list of ``{monomial: Fraction}`` indexed by lambda power.
    """
    phi = {(0, ("P",)): Fraction(1)}
    psi = dict(phi)
    for _ in range(order + 1):
        psibar = {(p, _conj_mono(m)): c for (p, m), c in psi.items()}
        nl = {(0, ()): Fraction(1)}
        for _ in range(kappa):
            nl = _mul(nl, psibar, order - 1)
        for _ in range(kappa + 1):
            nl = _mul(nl, psi, order - 1)
        new = dict(phi)
        for (p, m), c in nl.items():
            key = (p + 1, (("G", m),))
            new[key] = new.get(key, 0) + c
        psi = new
    coeffs = [dict() for _ in range(order + 1)]
    for (p, m), c in psi.items():
        coeffs[p][m] = c
    return coeffs


def library_to_picard(expr) -> dict:
    """Convert a library expression without tokens to Picard monomials."""
    from .functional_algebra import Conv, FieldLeg

    def mono(atoms):
        out = []
        for a in atoms:
            if isinstance(a, FieldLeg):
                out.append("B" if a.bar else "P")
            elif isinstance(a, Conv):
                out.append(("H" if a.bar else "G", mono(a.arg)))
            else:
                raise TypeError(f"unexpected atom {a!r}")
        return tuple(sorted(out, key=repr))

    out: dict = {}
    for (lam, (atoms,)), c in expr.items():
        k = mono(atoms)
        out[k] = out.get(k, 0) + c
    return out


__all__ = [
    "expr_graph", "graph_hash", "library_histogram", "library_to_picard", "picard_coefficients",
    "random_product", "spec_to_expr", "wick_matchings", "wick_reference",
]
