from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochnls.numerics.kernels import CausalOps, QKernel, coeff_C, q_diagonal
from stochnls.numerics.lattice import LatticeSpec, default_test_pairs
from stochnls.numerics.montecarlo import (
    Estimate, draw_noise, pair_key, propagate, renormalized_shift, simulate_first_order, simulate_linear,
    simulate_slopes,
)


def test_noise_is_reproducible_per_realisation(small_spec):
    a = draw_noise(small_spec, 5, [0, 1, 2, 3])
    b = draw_noise(small_spec, 5, [2, 3])
    assert np.array_equal(a[2:], b)
    assert not np.array_equal(a[0], draw_noise(small_spec, 6, [0])[0])


def test_noise_moments(small_spec):
    xi = draw_noise(small_spec, 0, range(64))
    cell = small_spec.cell
    assert np.mean(np.abs(xi) ** 2) * cell == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(xi * xi)) * cell < 0.02


def test_propagate_matches_causal_operator(small_spec):
    rng = np.random.default_rng(4)
    u = rng.standard_normal((2,) + small_spec.shape) + 1j * rng.standard_normal((2,) + small_spec.shape)
    ops = CausalOps(small_spec)
    out = propagate(small_spec, u)
    assert np.allclose(out[1], ops.forward(u[1]), atol=1e-12)
    with pytest.raises(ValueError):
        propagate(LatticeSpec(d=2, nt=8, nx=8, chi=small_spec.chi), np.zeros((1, 8, 8, 8)))


def test_estimate_against_numpy():
    rng = np.random.default_rng(7)
    z = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    e = Estimate.from_samples(z)
    assert e.mean == pytest.approx(z.mean(), abs=1e-15)
    var = np.var(z.real, ddof=1) + np.var(z.imag, ddof=1)
    assert e.stderr == pytest.approx(np.sqrt(var / 500), rel=1e-12)
    assert e.zscore(e.mean) == 0 and e.agrees(e.mean + 2 * e.stderr)
    assert not e.agrees(e.mean + 3.5 * e.stderr)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False), min_size=2, max_size=40),
       st.integers(1, 39))
def test_batch_merge_equals_one_batch(values, cut):
    cut = min(cut, len(values) - 1)
    whole = Estimate.from_samples(values)
    merged = Estimate.from_samples(values[:cut]) + Estimate.from_samples(values[cut:])
    assert merged == whole
    assert merged.mean == whole.mean


def test_batch_size_does_not_change_estimates(small_spec):
    pairs = default_test_pairs(small_spec)[:1]
    a = simulate_linear(small_spec, 150, pairs, seed=2, batch=150)
    b = simulate_linear(small_spec, 150, pairs, seed=2, batch=40)
    assert a == b


def test_linear_requires_realisations(small_spec):
    with pytest.raises(ValueError):
        simulate_linear(small_spec, 50, default_test_pairs(small_spec))


def test_linear_moments(small_spec):
    pairs = default_test_pairs(small_spec)
    est = simulate_linear(small_spec, 2000, pairs, seed=1)
    q = QKernel(small_spec)
    for f1, f2 in pairs:
        assert est[f"cov:{f1.name},{f2.name}"].agrees(q.pair(f1, np.conj(f2.values)))
        assert est[f"pseudo:{f1.name},{f2.name}"].agrees(0.0)
        assert est[f"mean:{f1.name}"].agrees(0.0)


def test_zero_coupling_reduces_to_linear(small_spec):
    pairs = default_test_pairs(small_spec)[:2]
    lin = simulate_linear(small_spec, 200, pairs, seed=3)
    slopes = simulate_slopes(small_spec, [0.0, 0.05], 200, pairs, seed=3)
    for f1, f2 in pairs:
        assert slopes[pair_key(f1, f2)]["value"][0.0] == lin[f"cov:{f1.name},{f2.name}"]
    f1, f2 = pairs[0]
    assert simulate_first_order(small_spec, 0.0, 200, f1, f2, seed=3) == lin[f"cov:{f1.name},{f2.name}"]


def test_renormalized_shift_is_short_lag_part(small_spec):
    shift = renormalized_shift(small_spec)
    assert np.allclose(shift + coeff_C(small_spec), q_diagonal(small_spec))
    assert np.all(shift >= -1e-14)


def test_central_difference_slope_is_exact_linear_part(small_spec):
    # P(lam) is quadratic in lam on common noise, so every lam gives the same slope samples
    pairs = default_test_pairs(small_spec)[:1]
    out = simulate_slopes(small_spec, [0.01, 0.3], 100, pairs, seed=9)[pair_key(*pairs[0])]["slope"]
    assert out[0.01].mean == pytest.approx(out[0.3].mean, rel=1e-9)


@pytest.mark.slow
def test_first_order_mean_vanishes(small_spec):
    pairs = default_test_pairs(small_spec)
    out = simulate_slopes(small_spec, [0.05], 2000, pairs, seed=4)
    for f1, f2 in pairs:
        assert out[pair_key(f1, f2)]["mean"][0.05].agrees(0.0)
