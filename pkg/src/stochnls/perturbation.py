"""Perturbative solution, its deformed image and the renormalized equation.

The formal solution ``Psi = sum_k lambda**k F_k`` of
``Psi = Phi + lambda G (*) (conj(Psi)**kappa Psi**(kappa+1))`` is built
order by order, deformed with the covariance map, and used to produce
expectation values, correlation functions and the counterterm series
``M = sum_k lambda**k M_k``.

>>> sol = expand(1, 2)
>>> print(sol.coefficients[1])
G⊛(Φ̄Φ²)
>>> print(counterterms(sol, 1).entries[0])
2C̄[·]
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Sequence

from .deformation import Diagram, bullet_product, deform, diagrams_to_json, to_diagrams
from .functional_algebra import (
    AlgebraError,
    Conv,
    Expr,
    FieldLeg,
    Operand,
    conjugate,
    convolve,
    evaluate_at_zero,
    iter_atoms,
    lam,
    leg_count,
    make_generator,
    multiply,
    pretty,
    substitute_operand,
    to_json,
)


class CountertermError(AlgebraError):
    """The residual of the renormalized equation has an unexpected structure."""


@dataclass
class PerturbativeSolution:
    kappa: int
    order: int
    coefficients: list

    def series(self, order: int | None = None, conj: bool = False) -> Expr:
        """``sum_k lambda**k F_k`` up to ``order`` (conjugated if asked)."""
        order = self.order if order is None else order
        if order > self.order:
            raise ValueError(f"order {order} exceeds the expansion order {self.order}")
        out = Expr()
        for k in range(order + 1):
            f = conjugate(self.coefficients[k]) if conj else self.coefficients[k]
            out = out + f.scale(1, k)
        return out

    def deformed(self, order: int | None = None, conj: bool = False) -> Expr:
        return deform(self.series(order, conj))


def series_mul(a: Expr, b: Expr, order: int) -> Expr:
    """Product of two lambda-series truncated at ``order``."""
    return multiply(a.truncate(order), b.truncate(order)).truncate(order)


def nonlinearity(psi: Expr, kappa: int, order: int) -> Expr:
    """``conj(psi)**kappa * psi**(kappa+1)`` truncated at ``order``."""
    psibar = conjugate(psi)
    out = make_generator("One")
    for _ in range(kappa):
        out = series_mul(out, psibar, order)
    for _ in range(kappa + 1):
        out = series_mul(out, psi, order)
    return out


def expand(kappa: int, K: int) -> PerturbativeSolution:
    """Coefficients ``F_0..F_K`` of the formal solution.

    ``F_k`` is ``G (*)`` applied to the lambda**(k-1) part of the
    nonlinearity evaluated on the partial sum up to ``F_{k-1}``.
    """
    if kappa < 1:
        raise ValueError("kappa must be a positive integer")
    if K < 0:
        raise ValueError("the expansion order must be nonnegative")
    coeffs = [make_generator("Phi")]
    psi = coeffs[0]
    for k in range(1, K + 1):
        nl = nonlinearity(psi, kappa, k - 1)
        fk = convolve(False, nl.at_order(k - 1))
        coeffs.append(fk)
        psi = psi + fk.scale(1, k)
    return PerturbativeSolution(kappa, K, coeffs)


def expectation(sol: PerturbativeSolution, order: int) -> Expr:
    """``evaluate_at_zero`` of the deformed truncated series."""
    return evaluate_at_zero(sol.deformed(order))


def _slot_series(sol: PerturbativeSolution, order: int, conj: bool) -> list:
    return [deform((conjugate(f) if conj else f).scale(1, k)) for k, f in enumerate(sol.coefficients[:order + 1])]


def correlation_expr(sol: PerturbativeSolution, pattern: Sequence[bool], order: int) -> Expr:
    """Multilocal correlation kernel at zero background, up to ``order``.

    ``pattern[i]`` tells whether slot ``i`` holds the conjugated solution.
    """
    if order > sol.order:
        raise ValueError(f"order {order} exceeds the expansion order {sol.order}")
    per_slot = [_slot_series(sol, order, bar) for bar in pattern]
    total = Expr(nslots=len(pattern))
    for ks in iproduct(range(order + 1), repeat=len(pattern)):
        if sum(ks) > order:
            continue
        parts = [per_slot[i][k] for i, k in enumerate(ks)]
        if any(not p for p in parts):
            continue
        total = total + evaluate_at_zero(bullet_product(parts))
    return total


def two_point(sol: PerturbativeSolution, order: int, conjugate_second: bool = True) -> list:
    """Diagrams of ``E[psi(f1) conj(psi(f2))]`` up to ``order``.

    With ``conjugate_second=False`` the unconjugated ``E[psi psi]`` is
    returned, which has no diagrams at all.
    """
    expr = correlation_expr(sol, [False, conjugate_second], order)
    return to_diagrams(expr, strict=True)


def m_point(sol: PerturbativeSolution, m: int, order: int, strict: bool = False) -> list:
    """Diagrams of the ``m``-point function with alternating psi, conj(psi) slots."""
    if m < 1:
        raise ValueError("m must be positive")
    if m % 2:
        if strict:
            raise ValueError(f"odd correlation functions vanish identically (m={m})")
        return []
    expr = correlation_expr(sol, [bool(i % 2) for i in range(m)], order)
    return to_diagrams(expr, strict=True)


# ---------------------------------------------------------------------------
# counterterms


@dataclass
class CountertermSeries:
    """Linear operators ``M_1..M_K`` as expressions holding one ``Operand``."""

    entries: list = field(default_factory=list)

    def __getitem__(self, k: int) -> Expr:
        return self.entries[k - 1]

    def __len__(self):
        return len(self.entries)

    def apply(self, k: int, arg: Expr) -> Expr:
        return apply_operator(self[k], arg)

    def as_series(self) -> Expr:
        out = Expr()
        for k, mk in enumerate(self.entries, start=1):
            out = out + mk.scale(1, k)
        return out


def apply_operator(op: Expr, arg: Expr) -> Expr:
    if not op:
        return Expr()
    return substitute_operand(op, arg)


def _residual_at(sol: PerturbativeSolution, k: int, cts: CountertermSeries, gammas: list) -> Expr:
    """Order-k mismatch of the renormalized equation before ``M_k`` enters."""
    kappa = sol.kappa
    res = gammas[k]
    # lambda G (*) conj(Psi)^kappa Psi^(kappa+1) built from deformed coefficients
    lifted = Expr()
    for j, g in enumerate(gammas[:k]):
        lifted = lifted + g.scale(1, j)
    nl = nonlinearity(lifted, kappa, k - 1).at_order(k - 1)
    res = res - convolve(False, nl)
    for k1 in range(1, k):
        k2 = k - k1
        if k1 <= len(cts):
            res = res - convolve(False, cts.apply(k1, gammas[k2]))
    return res


def _extract_operator(residual: Expr) -> Expr:
    """Write a residual ``G (*) u`` as ``G (*) (K Phi)`` and return ``K``."""
    acc = Expr()
    for (lamp, (atoms,)), c in residual.items():
        if lamp != 0 or len(atoms) != 1 or not isinstance(atoms[0], Conv) or atoms[0].bar:
            raise CountertermError(f"residual term {pretty(Expr({(lamp, (atoms,)): c}))} is not of the form G⊛u")
        u = atoms[0].arg
        op = _replace_one_phi(u)
        if op is None:
            raise CountertermError(
                f"residual term {pretty(Expr({(0, (atoms,)): c}))} has no free Φ leg; a Φ̄ correction would be needed")
        m, mb = _total_legs(op)
        if m != mb:
            raise CountertermError(
                f"counterterm candidate {pretty(Expr({(0, (op,)): c}))} has unbalanced degree ({m}, {mb})")
        acc = acc + Expr({(0, (op,)): c})
    return acc


def _total_legs(atoms) -> tuple:
    m = mb = 0
    for a, _ in iter_atoms(atoms):
        if isinstance(a, FieldLeg):
            if a.bar:
                mb += 1
            else:
                m += 1
    return m, mb


def _replace_one_phi(atoms: tuple):
    """Swap one Phi leg for an Operand, preferring the top level."""
    for i, a in enumerate(atoms):
        if isinstance(a, FieldLeg) and not a.bar:
            return atoms[:i] + (Operand(),) + atoms[i + 1:]
    for i, a in enumerate(atoms):
        if isinstance(a, Conv):
            inner = _replace_one_phi(a.arg)
            if inner is not None:
                return atoms[:i] + (Conv(a.bar, inner),) + atoms[i + 1:]
    return None


def counterterms(sol: PerturbativeSolution, K: int) -> CountertermSeries:
    """Extract ``M_1..M_K`` by matching the deformed solution order by order."""
    if K < 1:
        raise ValueError("counterterms start at order 1")
    if K > sol.order:
        raise ValueError(f"order {K} exceeds the expansion order {sol.order}")
    gammas = [deform(f) for f in sol.coefficients[:K + 1]]
    cts = CountertermSeries()
    for k in range(1, K + 1):
        cts.entries.append(_extract_operator(_residual_at(sol, k, cts, gammas)))
    return cts


@dataclass
class VerificationReport:
    passed: bool
    order: int
    first_failing_order: int | None = None
    residual: Expr | None = None
    kernel_residual: Expr | None = None

    def summary(self) -> str:
        if self.passed:
            return f"renormalized equation holds up to order {self.order}"
        return (f"fails at order {self.first_failing_order}: residual {pretty(self.residual)}; "
                f"operator mismatch {pretty(self.kernel_residual)}")


def verify_renormalized_equation(sol: PerturbativeSolution, cts: CountertermSeries, K: int) -> VerificationReport:
    """Check ``Psi_Q = Phi + lambda G (*) conj(Psi_Q)^kappa Psi_Q^(kappa+1) + G (*) (M Psi_Q)``.

    The whole truncated series is compared at once; on failure the first
    failing order is reported together with the residual and the residual
    operator acting on Phi.
    """
    psi_q = sol.deformed(K)
    rhs = make_generator("Phi") + convolve(False, nonlinearity(psi_q, sol.kappa, K - 1)).scale(1, 1)
    m_series = cts.as_series().truncate(K)
    if m_series:
        rhs = rhs + convolve(False, apply_operator(m_series, psi_q)).truncate(K)
    diff = (psi_q - rhs).truncate(K)
    if not diff:
        return VerificationReport(True, K)
    first = min(l for (l, _), _ in diff.items())
    residual = diff.at_order(first, strip=False)
    return VerificationReport(False, K, first, residual, _kernel_part(residual.at_order(first)))


def _kernel_part(residual: Expr) -> Expr:
    """Strip the outer ``G (*)`` from each residual term when present."""
    acc: dict = {}
    for (lamp, (atoms,)), c in residual.items():
        if len(atoms) == 1 and isinstance(atoms[0], Conv) and not atoms[0].bar:
            key = (lamp, (atoms[0].arg,))
        else:
            key = (lamp, (atoms,))
        acc[key] = acc.get(key, 0) + c
    return Expr(acc)


# ---------------------------------------------------------------------------
# reports


def unpaired_phi_ok(expr: Expr) -> bool:
    """Every monomial has exactly one more Phi than Phi-bar (through all levels)."""
    return all(m.grading[0] == m.grading[1] + 1 for m in expr.monomials())


def is_odd(expr: Expr) -> bool:
    return all((m.grading[0] + m.grading[1]) % 2 == 1 for m in expr.monomials())


def solution_report(sol: PerturbativeSolution, cts: CountertermSeries | None = None,
                    diagrams: Sequence[Diagram] | None = None) -> dict:
    out = {
        "kappa": sol.kappa,
        "order": sol.order,
        "coefficients": [{"k": k, "pretty": pretty(f), "terms": len(f), "json": to_json(f)}
                         for k, f in enumerate(sol.coefficients)],
    }
    if cts is not None:
        out["counterterms"] = [{"k": k, "pretty": pretty(m), "json": to_json(m)}
                               for k, m in enumerate(cts.entries, start=1)]
    if diagrams is not None:
        out["diagrams"] = json.loads(diagrams_to_json(diagrams))
    return out


def pretty_solution(sol: PerturbativeSolution) -> str:
    return "\n".join(f"F_{k} = {pretty(f)}" for k, f in enumerate(sol.coefficients)) + "\n"


__all__ = [
    "CountertermError", "CountertermSeries", "PerturbativeSolution", "VerificationReport",
    "apply_operator", "correlation_expr", "counterterms", "expand", "expectation", "is_odd",
    "leg_count", "lam", "m_point", "nonlinearity", "pretty_solution", "solution_report",
    "two_point", "unpaired_phi_ok", "verify_renormalized_equation",
]
