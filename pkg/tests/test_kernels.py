import json
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochnls.deformation import Diagram
from stochnls.numerics.evaluate import evaluate_diagram, evaluate_sum, standard_bindings
from stochnls.numerics.kernels import (
    CausalOps, QKernel, closed_form_G, coeff_C, coinciding_profile, kernel_G, q_diagonal, schrodinger_residual,
)
from stochnls.numerics.lattice import ChiSpec, LatticeSpec, bump, default_test_pairs, smooth_step

GOLDEN = Path(__file__).parent / "golden"


def _brute_G(spec):
    """Dense causal propagator matrix from the sampled kernel (lag >= 1 only)."""
    G = kernel_G(spec).values
    nt, nx = spec.shape
    M = np.zeros((nt * nx, nt * nx), complex)
    for ta in range(nt):
        for tz in range(ta):
            for xa in range(nx):
                M[ta * nx + xa, tz * nx:(tz + 1) * nx] = G[ta - tz, (xa - np.arange(nx)) % nx]
    return M


# -- lattice ---------------------------------------------------------------------------


def test_smooth_step_profile():
    u = np.linspace(-1.5, 1.5, 301)
    s = smooth_step(u, 0.5)
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(s[np.abs(u) <= 0.5] == 1) and np.all(s[np.abs(u) >= 1] == 0)


def test_lattice_validation():
    with pytest.raises(ValueError):
        LatticeSpec(nt=4)
    with pytest.raises(ValueError):
        LatticeSpec(sign_convention="up")
    with pytest.raises(ValueError):
        LatticeSpec(chi=ChiSpec(center_t=0.9, radius_t=0.45))
    with pytest.raises(ValueError):
        LatticeSpec(nt=128, epsilon=1e-4)


def test_lattice_dict_roundtrip():
    spec = LatticeSpec(nt=64, epsilon=0.05, chi=ChiSpec(height=0.5))
    assert LatticeSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_default_pairs_inside_cutoff(small_spec):
    chi = small_spec.chi_grid()
    for f1, f2 in default_test_pairs(small_spec):
        for f in (f1, f2):
            assert np.all(chi[np.abs(f.values) > 0] > 0)


# -- propagator ------------------------------------------------------------------------


def test_propagator_solves_equation_off_origin():
    spec = LatticeSpec(nt=128, nx=128)
    assert np.abs(schrodinger_residual(spec)[1:]).max() < 1e-6


def test_propagator_vanishes_before_source():
    g = kernel_G(LatticeSpec(nt=32, nx=32), negative_times=True)
    assert np.all(g.values[g.time_offsets < 0] == 0)


def test_propagator_initial_row_is_delta(small_spec):
    row = kernel_G(small_spec).values[0]
    assert row[0] == pytest.approx(1 / small_spec.dx)
    assert np.abs(row[1:]).max() < 1e-12


def test_barred_propagator_is_conjugate(small_spec):
    assert np.array_equal(kernel_G(small_spec, bar=True).values, np.conj(kernel_G(small_spec).values))


@pytest.mark.parametrize("convention", ["plus", "minus"])
def test_propagator_matches_closed_form(convention):
    # pairing against a wide Gaussian: the torus images are below 1e-4
    spec = LatticeSpec(nt=128, nx=128, sign_convention=convention)
    n = int(round(0.3 / spec.dt))
    f = np.exp(-(spec.xs() - 0.4) ** 2 / 0.5)
    lattice = np.sum(kernel_G(spec).values[n][(spec.nx // 2 - np.arange(spec.nx)) % spec.nx] * f) * spec.dx
    y = np.linspace(-15, 15, 300001)
    line = np.trapezoid(closed_form_G(spec, n * spec.dt, -y) * np.exp(-(y - 0.4) ** 2 / 0.5), y)
    assert abs(lattice - line) < 1e-4


def test_causal_forward_against_dense_sum(tiny_spec):
    rng = np.random.default_rng(1)
    u = rng.standard_normal(tiny_spec.shape) + 1j * rng.standard_normal(tiny_spec.shape)
    dense = (_brute_G(tiny_spec) @ u.ravel()) * tiny_spec.cell
    assert np.allclose(CausalOps(tiny_spec).forward(u).ravel(), dense, atol=1e-12)


def test_adjoint_is_transpose(tiny_spec):
    rng = np.random.default_rng(2)
    ops = CausalOps(tiny_spec)
    u, v = (rng.standard_normal(tiny_spec.shape) + 1j * rng.standard_normal(tiny_spec.shape) for _ in range(2))
    assert np.sum(v * ops.forward(u)) == pytest.approx(np.sum(u * ops.adjoint(v)), abs=1e-10)


# -- covariance -------------------------------------------------------------------------


def test_q_against_dense_triple_sum(tiny_spec):
    G = _brute_G(tiny_spec) * tiny_spec.cell
    chi2 = tiny_spec.chi_grid().ravel() ** 2
    brute = (G * chi2) @ G.conj().T / tiny_spec.cell
    dense = QKernel(tiny_spec).dense()
    assert np.abs(brute - dense).max() < 1e-12


def test_q_dense_is_hermitian_positive(tiny_spec):
    q = QKernel(tiny_spec).dense()
    assert np.abs(q - q.conj().T).max() < 1e-10
    assert np.linalg.eigvalsh((q + q.conj().T) / 2).min() > -1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_q_hermitian_symmetry(seed):
    spec = LatticeSpec(nt=32, nx=32)
    rng = np.random.default_rng(seed)
    a, b = (rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape) for _ in range(2))
    q = QKernel(spec)
    assert abs(q.pair(b, a) - np.conj(q.pair(np.conj(a), np.conj(b)))) < 1e-10


def test_q_disjoint_times_regression():
    spec = LatticeSpec()
    early = bump(spec, 0.25, 0.0, 0.1, 0.8)
    late = bump(spec, 0.75, 0.3, 0.1, 0.8)
    value = QKernel(spec).pair(early, late)
    frozen = json.loads((GOLDEN / "q_disjoint.json").read_text())
    assert abs(value) > 1e-5
    assert value == pytest.approx(complex(*frozen["value"]), rel=1e-9)


# -- coinciding-point kernel ------------------------------------------------------------


def test_cbar_vanishes_without_cutoff(small_spec):
    spec = replace(small_spec, chi=ChiSpec(height=0.0))
    for ext in ("epsilon_cut", "epsilon_cut_logsub"):
        assert np.all(coeff_C(spec, ext) == 0)


def test_cbar_is_real(small_spec):
    cbar = coeff_C(small_spec)
    assert np.isrealobj(cbar)
    b = standard_bindings(cbar)
    assert np.array_equal(b["C"], np.conj(b["Cbar"]))


def test_cbar_cut_removes_short_lags(small_spec):
    profile = coinciding_profile(small_spec)
    full = q_diagonal(small_spec, 1, profile)
    cut = coeff_C(replace(small_spec, epsilon=3 * small_spec.dt), profile=profile)
    assert np.allclose(full - cut, profile[1:4].sum(axis=0) * small_spec.dt)


def test_q_diagonal_matches_dense(tiny_spec):
    dense = QKernel(tiny_spec).dense()
    assert np.allclose(np.diag(dense).real, q_diagonal(tiny_spec).ravel(), atol=1e-12)


def test_extension_difference_is_one_grid_function(small_spec):
    profile = coinciding_profile(small_spec)
    diff = coeff_C(small_spec, "epsilon_cut_logsub", profile=profile) - coeff_C(small_spec, profile=profile)
    for f1, f2 in default_test_pairs(small_spec):
        direct = (np.sum(f1.values * coeff_C(small_spec, "epsilon_cut_logsub", profile=profile))
                  - np.sum(f1.values * coeff_C(small_spec, profile=profile)))
        assert direct == pytest.approx(np.sum(f1.values * diff), rel=1e-8)


def test_unknown_extension(small_spec):
    with pytest.raises(ValueError):
        coeff_C(small_spec, "dim_reg")


# -- diagram evaluation -----------------------------------------------------------------


def test_single_q_diagram_is_covariance(small_spec):
    d = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q")])
    for f1, f2 in default_test_pairs(small_spec):
        assert evaluate_diagram(d, small_spec, [f1, f2]) == pytest.approx(QKernel(small_spec).pair(f1, f2), rel=1e-12)


def test_qbar_edge_swaps_arguments(small_spec):
    f1, f2 = default_test_pairs(small_spec)[1]
    q = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q")])
    qbar = Diagram(["x1", "x2"], [[], []], [(0, 1, "Qbar")])
    assert evaluate_diagram(qbar, small_spec, [f1, f2]) == pytest.approx(evaluate_diagram(q, small_spec, [f2, f1]), rel=1e-12)


def test_zero_symmetry_factor(small_spec):
    d = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q")], symmetry_factor=Fraction(0))
    assert evaluate_diagram(d, small_spec, list(default_test_pairs(small_spec)[0])) == 0


def test_g_edge_against_dense_sum(tiny_spec):
    # <f, G_chi (cbar)>: one external vertex, one decorated integration vertex
    cbar = coeff_C(tiny_spec)
    f = bump(tiny_spec, 0.6, 0.0, 0.3, 2.0)
    d = Diagram(["x"], [[], ["Cbar"]], [(0, 1, "G")], symmetry_factor=2)
    G = _brute_G(tiny_spec) * tiny_spec.cell
    dense = 2 * np.sum(f.values.ravel() * (G @ (tiny_spec.chi_grid() * cbar).ravel())) * tiny_spec.cell
    assert evaluate_diagram(d, tiny_spec, [f], standard_bindings(cbar)) == pytest.approx(dense, rel=1e-10)


def test_evaluation_errors(small_spec):
    f1, f2 = default_test_pairs(small_spec)[0]
    loop = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q"), (0, 1, "Qbar")])
    with pytest.raises(ValueError):
        evaluate_diagram(loop, small_spec, [f1, f2])
    with pytest.raises(KeyError):
        evaluate_diagram(Diagram(["x"], [["Cbar"]], []), small_spec, [f1])
    with pytest.raises(ValueError):
        evaluate_diagram(Diagram(["x"], [[]], []), small_spec, [f1, f2])


def test_evaluate_sum_weights_lambda(small_spec):
    f1, f2 = default_test_pairs(small_spec)[0]
    d0 = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q")])
    d1 = Diagram(["x1", "x2"], [[], []], [(0, 1, "Q")], lambda_power=1)
    v = evaluate_diagram(d0, small_spec, [f1, f2])
    assert evaluate_sum([d0, d1], small_spec, [f1, f2], lam=0.5) == pytest.approx(1.5 * v)
