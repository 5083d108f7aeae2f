import json
from pathlib import Path

import pytest

from stochnls.deformation import diagram_multiset, diagrams_from_json, diagrams_to_json
from stochnls.functional_algebra import conjugate, convolve, from_json, multiply, operand, token
from stochnls.oracles import library_to_picard, picard_coefficients
from stochnls.perturbation import (
    CountertermError, CountertermSeries, correlation_expr, counterterms, expand, expectation, is_odd,
    m_point, two_point, unpaired_phi_ok, verify_renormalized_equation,
)
from stochnls.acceptance import expected_two_point_diagrams

from conftest import PHI, PHIBAR

GOLDEN = Path(__file__).parent / "golden"
CBAR = token("Cbar")


def test_first_coefficients_by_hand():
    sol = expand(1, 2)
    f0 = PHI
    f1 = convolve(False, PHIBAR * PHI * PHI)
    f2 = convolve(False, conjugate(f1) * f0 * f0 + (conjugate(f0) * f0 * f1).scale(2))
    assert sol.coefficients == [f0, f1, f2]
    assert expand(1, 0).coefficients == [PHI]


def test_f2_matches_golden():
    data = json.loads((GOLDEN / "F_2.json").read_text())
    assert from_json(data["terms"]) == expand(1, 2).coefficients[2]


@pytest.mark.parametrize("kappa,order", [(1, 3), (1, 4), (2, 2), (3, 2)])
def test_coefficients_match_picard_iteration(kappa, order):
    sol = expand(kappa, order)
    reference = picard_coefficients(kappa, order)
    for k in range(order + 1):
        assert library_to_picard(sol.coefficients[k]) == reference[k]


def test_f3_monomial_count():
    assert len(expand(1, 3).coefficients[3]) == len(picard_coefficients(1, 3)[3]) == 6


def test_coefficients_have_one_unpaired_phi():
    sol = expand(1, 4)
    assert all(unpaired_phi_ok(f) and is_odd(f) for f in sol.coefficients)


@pytest.mark.parametrize("kappa,kmax", [(1, 4), (2, 3)])
def test_vanishing_mean(kappa, kmax):
    sol = expand(kappa, kmax)
    for k in range(kmax + 1):
        assert expectation(sol, k) == 0


def test_order_one_deformed_solution():
    # the C̄ correction is what makes the first-order mean vanish
    assert expand(1, 1).deformed(1) == PHI + convolve(False, PHIBAR * PHI * PHI + (CBAR * PHI).scale(2)).scale(1, 1)


def test_two_point_orders():
    sol = expand(1, 1)
    (zero,) = two_point(sol, 0)
    assert zero.edges == [(0, 1, "Q")] and zero.symmetry_factor == 1
    assert diagram_multiset(two_point(sol, 1)) == diagram_multiset(expected_two_point_diagrams())
    assert two_point(sol, 1, conjugate_second=False) == []


def test_two_point_matches_golden():
    golden = diagrams_from_json((GOLDEN / "two_point_order1.json").read_text())
    got = two_point(expand(1, 1), 1)
    assert diagram_multiset(got) == diagram_multiset(golden)
    assert diagrams_to_json(got) + "\n" == (GOLDEN / "two_point_order1.json").read_text()


def test_m_point():
    sol = expand(1, 1)
    assert diagram_multiset(m_point(sol, 2, 1)) == diagram_multiset(two_point(sol, 1))
    assert m_point(sol, 3, 1) == []
    with pytest.raises(ValueError):
        m_point(sol, 3, 1, strict=True)
    # Gaussian four-point function: pair each Phi slot with a Phi-bar slot
    four = m_point(expand(1, 0), 4, 0)
    pairings = sorted(tuple(sorted((min(s, t), max(s, t)) for s, t, _ in d.edges)) for d in four)
    assert pairings == [((0, 1), (2, 3)), ((0, 3), (1, 2))]


def test_correlation_order_checked():
    with pytest.raises(ValueError):
        correlation_expr(expand(1, 1), [False, True], 2)


def test_counterterm_m1():
    cts = counterterms(expand(1, 1), 1)
    assert cts[1] == multiply(CBAR, operand()).scale(2)
    assert str(cts[1]) == "2C̄[·]"


def test_counterterm_kappa2_by_hand():
    # contractions of Φ̄²Φ³ leaving one Φ: 6 single ones with background Φ̄Φ, 6 double ones
    cts = counterterms(expand(2, 1), 1)
    want = (multiply(CBAR * PHIBAR * PHI, operand())).scale(6) + multiply(CBAR * CBAR, operand()).scale(6)
    assert cts[1] == want


@pytest.mark.parametrize("K", [1, 2])
def test_renormalized_equation_holds(K):
    sol = expand(1, K)
    assert verify_renormalized_equation(sol, counterterms(sol, K), K).passed


def test_renormalized_equation_holds_kappa2():
    sol = expand(2, 2)
    assert verify_renormalized_equation(sol, counterterms(sol, 2), 2).passed


def test_tampered_counterterm_fails_at_order_one():
    sol = expand(1, 1)
    m1 = counterterms(sol, 1)[1]
    report = verify_renormalized_equation(sol, CountertermSeries([m1.scale(3)]), 1)
    assert not report.passed and report.first_failing_order == 1
    # 2C̄Φ - M_1 Φ with M_1 = 6C̄
    assert report.kernel_residual == (CBAR * PHI).scale(-4)


def test_missing_counterterm_residual():
    report = verify_renormalized_equation(expand(1, 1), CountertermSeries(), 1)
    assert report.residual == convolve(False, (CBAR * PHI).scale(2)).scale(1, 1)


def test_counterterm_argument_checks():
    with pytest.raises(ValueError):
        counterterms(expand(1, 1), 2)
    with pytest.raises(ValueError):
        counterterms(expand(1, 1), 0)
    assert issubclass(CountertermError, ValueError)
