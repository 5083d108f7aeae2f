"""Lattice kernels, diagram evaluation and Monte Carlo oracles (d = 1 production)."""
from .evaluate import evaluate_diagram, evaluate_sum, standard_bindings
from .kernels import (CausalOps, KernelGrid, QKernel, closed_form_G, coeff_C, coinciding_profile,
                      kernel_G, kernel_Q, q_diagonal, schrodinger_residual)
from .lattice import ChiSpec, LatticeSpec, TestFunction, bump, default_test_pairs
from .montecarlo import Estimate, draw_noise, simulate_first_order, simulate_linear, simulate_slopes
from .scaling import (DecayGrid, directional_decay_test, scaling_degree_estimate, standard_decay_rows,
                      standard_scaling_estimates)

__all__ = [
    "CausalOps", "ChiSpec", "DecayGrid", "Estimate", "KernelGrid", "LatticeSpec", "QKernel", "TestFunction",
    "bump", "closed_form_G", "coeff_C", "coinciding_profile", "default_test_pairs", "directional_decay_test",
    "draw_noise", "evaluate_diagram", "evaluate_sum", "kernel_G", "kernel_Q", "q_diagonal",
    "scaling_degree_estimate", "schrodinger_residual", "simulate_first_order", "simulate_linear",
    "simulate_slopes", "standard_bindings", "standard_decay_rows", "standard_scaling_estimates",
]
