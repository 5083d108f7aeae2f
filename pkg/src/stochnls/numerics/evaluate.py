"""Lattice evaluation of kernel diagrams against test functions.

Every vertex is summed over the grid with weight ``dt dx^d``.  Only forest
diagrams are supported: the sum is organised as message passing from the
leaves to a root, each edge acting as a linear operator on grid functions.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..deformation import Diagram
from .kernels import CausalOps
from .lattice import LatticeSpec, TestFunction

LEG_DECORATIONS = ("EtaLeg", "EtaBarLeg")


def _vertex_weight(diag: Diagram, v: int, fs, bindings, spec) -> np.ndarray:
    w = np.ones(spec.shape, complex)
    if v < len(diag.externals):
        f = fs[v]
        w = w * getattr(f, "values", f)
    for dec in diag.decorations[v]:
        if dec not in bindings:
            raise KeyError(f"decoration {dec!r} at vertex {v} is not bound to a grid")
        w = w * bindings[dec]
    return w


def evaluate_diagram(diag: Diagram, spec: LatticeSpec, fs: Sequence, bindings: Mapping | None = None,
                     ops: CausalOps | None = None, include_factor: bool = True) -> complex:
    """Sum the diagram over the lattice; the symmetry factor is included, lambda powers are not.

    ``bindings`` maps decoration names (``Cbar``, ``C``, ``DeltaCbar`` ...)
    to grid arrays; ``Chi`` defaults to the cutoff of ``spec``.
    """
    if len(fs) != len(diag.externals):
        raise ValueError(f"diagram has {len(diag.externals)} external slots, got {len(fs)} test functions")
    if include_factor and diag.symmetry_factor == 0:
        return 0j
    if not diag.is_forest():
        raise ValueError("only forest diagrams can be evaluated by message passing")
    ops = ops or CausalOps(spec)
    bindings = dict(bindings or {})
    bindings.setdefault("Chi", ops.chi)
    for leg in LEG_DECORATIONS:
        if any(leg in d for d in diag.decorations):
            bindings.setdefault(leg, None)
            if bindings[leg] is None:
                raise KeyError(f"diagram has uncontracted legs ({leg}); bind a background grid")

    adjacency = {v: [] for v in range(diag.n_vertices)}
    for idx, (s, t, k) in enumerate(diag.edges):
        adjacency[s].append((t, k, "src"))
        adjacency[t].append((s, k, "dst"))

    def message(v, parent):
        m = _vertex_weight(diag, v, fs, bindings, spec)
        for (u, kind, side) in adjacency[v]:
            if u == parent:
                continue
            mu = message(u, v)
            m = m * _transfer(ops, kind, side, mu)
        return m

    total = 1.0 + 0j
    seen = set()
    for root in range(diag.n_vertices):
        if root in seen:
            continue
        seen |= _component(adjacency, root)
        total *= np.sum(message(root, None)) * spec.cell
    factor = float(diag.symmetry_factor) if include_factor else 1.0
    return complex(total * factor)


def _component(adjacency, root) -> set:
    stack, comp = [root], {root}
    while stack:
        v = stack.pop()
        for u, _, _ in adjacency[v]:
            if u not in comp:
                comp.add(u)
                stack.append(u)
    return comp


def _transfer(ops: CausalOps, kind: str, side: str, m_other: np.ndarray) -> np.ndarray:
    """Message arriving at this vertex from the far end of an edge.

    ``side`` says whether this vertex is the edge source (``src``) or
    target (``dst``).  Edge ``(a, b, G)`` is ``G_chi(a, b)``; edge
    ``(a, b, Q)`` is ``Q(a, b)`` and ``(a, b, Qbar)`` is ``Q(b, a)``.
    """
    if kind in ("G", "Gbar"):
        bar = kind == "Gbar"
        return ops.g_up(m_other, bar) if side == "src" else ops.g_down(m_other, bar)
    if kind == "Q":
        return ops.q_to_first(m_other) if side == "src" else ops.q_to_second(m_other)
    if kind == "Qbar":
        return ops.q_to_second(m_other) if side == "src" else ops.q_to_first(m_other)
    raise ValueError(f"unknown edge kind {kind!r}")


def evaluate_sum(diagrams: Sequence[Diagram], spec: LatticeSpec, fs: Sequence, bindings: Mapping | None = None,
                 lam: float | None = None, ops: CausalOps | None = None) -> complex:
    """Sum of diagram values; with ``lam`` given, each is weighted by ``lam**lambda_power``."""
    ops = ops or CausalOps(spec)
    total = 0j
    for d in diagrams:
        w = 1.0 if lam is None else lam ** d.lambda_power
        total += w * evaluate_diagram(d, spec, fs, bindings, ops)
    return total


def standard_bindings(cbar: np.ndarray, delta: np.ndarray | None = None) -> dict:
    """Bindings for the real coinciding-point kernel (and an optional shift)."""
    out = {"Cbar": cbar, "C": np.conj(cbar)}
    if delta is not None:
        out["DeltaCbar"] = delta
        out["DeltaC"] = np.conj(delta)
    return out


__all__ = ["evaluate_diagram", "evaluate_sum", "standard_bindings"]
