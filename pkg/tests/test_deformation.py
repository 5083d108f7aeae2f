from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochnls.deformation import (
    CountertermShift, Diagram, apply_counterterm_shift, bullet_product, deform, deformed_product,
    diagram_multiset, diagrams_from_json, diagrams_to_json, gamma_dot, to_diagrams,
)
from stochnls.functional_algebra import AlgebraError, conjugate, convolve, pretty, token
from stochnls.oracles import library_histogram, random_product, spec_to_expr, wick_matchings, wick_reference

from conftest import ONE, PHI, PHIBAR, expressions

CBAR = token("Cbar")


def test_deformed_product_examples():
    assert deformed_product(PHI, PHIBAR) == PHI * PHIBAR + CBAR
    assert deformed_product(PHI, PHI) == PHI * PHI
    assert deformed_product(PHIBAR, PHI * PHI) == PHIBAR * PHI * PHI + (CBAR * PHI).scale(2)


def test_gamma_dot_examples():
    # two Phi and two Phi-bar legs: 4 single pairings and 2 double pairings
    got = gamma_dot([PHI, PHI, PHIBAR, PHIBAR])
    want = PHI * PHI * PHIBAR * PHIBAR + (CBAR * PHI * PHIBAR).scale(4) + (CBAR * CBAR).scale(2)
    assert got == want
    f1 = convolve(False, PHIBAR * PHI * PHI)
    assert gamma_dot([deform(f1)]) == convolve(False, PHIBAR * PHI * PHI + (CBAR * PHI).scale(2))
    tau = PHIBAR * PHI
    assert gamma_dot([ONE, tau]) == tau


def test_bullet_product_examples():
    two = bullet_product([PHI, PHIBAR])
    assert two.nslots == 2 and len(two) == 2
    (cov,) = [d for d in to_diagrams(two) if d.edges]
    assert cov.edges == [(0, 1, "Q")] and cov.symmetry_factor == 1
    assert len(bullet_product([PHI, PHI])) == 1


def test_bullet_of_first_order_term():
    f1 = deform(convolve(False, PHIBAR * PHI * PHI))
    out = bullet_product([f1, PHIBAR])
    # bare tensor, the C̄ term tensored with Φ̄, and one contraction of each
    assert len(out) == 4
    listing = sorted(d.describe() for d in to_diagrams(out))
    assert "2·λ^0 G(x1,y1) Qbar(x2,y1) y1:{Cbar}" in listing
    assert sum(1 for d in to_diagrams(out) if d.edges_of_kind("Qbar")) == 2


def test_to_diagrams_examples():
    (d,) = to_diagrams(CBAR)
    assert d.decorations == [("Cbar",)] and d.edges == [] and len(d.externals) == 1
    (q,) = [d for d in to_diagrams(bullet_product([PHI, PHIBAR])) if d.edges]
    assert q.n_vertices == 2 and q.edges == [(0, 1, "Q")]


def test_to_diagrams_strict_rejects_legs():
    with pytest.raises(AlgebraError):
        to_diagrams(PHI, strict=True)


def test_counterterm_shift_examples():
    shifted = apply_counterterm_shift(deformed_product(PHI, PHIBAR), CountertermShift())
    assert shifted == PHI * PHIBAR + CBAR + token("DeltaCbar")
    assert pretty(shifted) == "Φ̄Φ + C̄ + δC̄"


@settings(max_examples=100, deadline=None)
@given(expressions)
def test_zero_shift_is_identity(a):
    assert apply_counterterm_shift(a, CountertermShift(scale=Fraction(0))) == a


@settings(max_examples=60, deadline=None)
@given(expressions)
def test_shift_commutes_with_convolution(a):
    shift = CountertermShift()
    a = deform(a)
    assert apply_counterterm_shift(convolve(False, a), shift) == convolve(False, apply_counterterm_shift(a, shift))


@settings(max_examples=60, deadline=None)
@given(expressions)
def test_deform_commutes_with_convolution_and_conjugation(a):
    assert deform(convolve(False, a)) == convolve(False, deform(a))
    assert deform(conjugate(a)) == conjugate(deform(a))


@settings(max_examples=60, deadline=None)
@given(expressions)
def test_deformation_preserves_leg_balance(a):
    # each contraction removes one Phi and one Phi-bar
    for m in deform(a).monomials():
        assert any(m.grading[0] - m.grading[1] == n.grading[0] - n.grading[1] for n in a.monomials())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gamma_dot_matches_wick_enumeration(seed):
    spec = random_product(np.random.default_rng(seed), max_legs=8)
    lib = gamma_dot([deform(spec_to_expr([item])) for item in spec])
    assert library_histogram(lib) == wick_reference(spec)


def test_wick_matching_count():
    # two Phi and two Phi-bar legs on distinct factors: 1 + 4 + 2 partial matchings
    assert len(wick_matchings(["phi", "phi", "phibar", "phibar"])) == 7


def test_diagram_json_roundtrip_and_multiset():
    diagrams = to_diagrams(bullet_product([deform(convolve(False, PHIBAR * PHI * PHI)), PHIBAR]))
    back = diagrams_from_json(diagrams_to_json(diagrams))
    assert back == diagrams
    assert diagram_multiset(back) == diagram_multiset(diagrams)


def test_diagram_validation():
    with pytest.raises(AlgebraError):
        Diagram(["x"], [[]], [(0, 3, "G")])
    with pytest.raises(AlgebraError):
        Diagram(["x"], [[], []], [(0, 1, "H")])


def test_diagram_forest_detection():
    tree = Diagram(["x1", "x2"], [[], [], []], [(0, 2, "G"), (1, 2, "Qbar")])
    loop = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q"), (0, 1, "Qbar")])
    assert tree.is_forest() and not loop.is_forest()


def test_canonical_key_ignores_internal_labels():
    a = Diagram(["x"], [[], ["Cbar"], ["C"]], [(0, 1, "G"), (0, 2, "Gbar")])
    b = Diagram(["x"], [[], ["C"], ["Cbar"]], [(0, 2, "G"), (0, 1, "Gbar")])
    assert a == b and hash(a) == hash(b)
