"""The acceptance suite: ten end-to-end checks with runtime budgets.

Each check returns a ``CriterionResult``; ``run_all`` runs a selection and
``format_line`` renders the one-line PASS/FAIL summary used by the CLI and
the test suite.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    budget: float = 0.0
    data: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget


def format_line(r: CriterionResult) -> str:
    status = "PASS" if r.ok else "FAIL"
    timing = f"{r.seconds:.1f}s/{r.budget:.0f}s"
    return f"{status} {r.key} [{timing}] {r.title}: {r.detail}"


# -- symbolic checks -----------------------------------------------------------------


def check_vanishing_mean() -> tuple:
    from .functional_algebra import pretty
    from .perturbation import expand, expectation

    bad = []
    for kappa, kmax in ((1, 4), (2, 3)):
        sol = expand(kappa, kmax)
        for k in range(kmax + 1):
            e = expectation(sol, k)
            if e:
                bad.append(f"kappa={kappa} k={k}: {pretty(e)}")
    return not bad, "all expectations vanish" if not bad else "; ".join(bad), {}


def expected_two_point_diagrams() -> list:
    """The order-1 two-point diagrams, written down by hand."""
    from .deformation import Diagram

    ext = ["x1", "x2"]
    return [
        Diagram(ext, [[], []], [(0, 1, "Q")], 1, 0),
        Diagram(ext, [[], [], ["Cbar"]], [(0, 2, "G"), (1, 2, "Qbar")], 2, 1),
        Diagram(ext, [[], [], ["C"]], [(1, 2, "Gbar"), (0, 2, "Q")], 2, 1),
    ]


def check_two_point() -> tuple:
    from .deformation import diagram_multiset
    from .perturbation import expand, two_point

    got = two_point(expand(1, 1), 1)
    want = expected_two_point_diagrams()
    same = diagram_multiset(got) == diagram_multiset(want) and len(got) == len(want)
    listing = "; ".join(d.describe() for d in got)
    return same, listing, {"diagrams": [d.to_json() for d in got]}


def check_counterterm() -> tuple:
    from .functional_algebra import multiply, operand, pretty, token
    from .perturbation import counterterms, expand, verify_renormalized_equation

    expected_m1 = multiply(token("Cbar"), operand()).scale(2)
    sol = expand(1, 2)
    cts = counterterms(sol, 2)
    m1_ok = not (cts[1] - expected_m1)
    reports = [verify_renormalized_equation(expand(1, K), counterterms(expand(1, K), K), K) for K in (1, 2)]
    ok = m1_ok and all(r.passed for r in reports)
    detail = f"M_1 = {pretty(cts[1])}; " + "; ".join(r.summary() for r in reports)
    return ok, detail, {}


def check_graph_closed_forms() -> tuple:
    from .diagrams import is_subcritical, subcritical_report

    try:
        rep1 = subcritical_report(1, kappa=1, k_max=8)
    except AssertionError as exc:
        return False, str(exc), {}
    rows_k1 = [r for r in rep1.rows if r.k == 1]
    rho_at_n3 = all(r.rho == 0 for r in rows_k1) and all(r.N == 3 for r in rows_k1)
    flagged = rep1.divergent_orders() == [0, 1]
    rep2 = subcritical_report(2, kappa=1, k_max=2)
    threshold = is_subcritical(Fraction(4, 3) - Fraction(1, 1000)) and not is_subcritical(Fraction(4, 3))
    ok = rep1.subcritical and flagged and rho_at_n3 and not rep2.subcritical and threshold
    detail = (f"{len(rep1.rows)} diagrams (k<=8) match L=3k+1, N=2k+1; d=1 divergent orders "
              f"{rep1.divergent_orders()}, subcritical={rep1.subcritical}; d=2 subcritical={rep2.subcritical}")
    return ok, detail, {}


def check_wick_oracle(n_cases: int = 500, seed: int = 2024) -> tuple:
    from .deformation import deform, gamma_dot
    from .oracles import library_histogram, random_product, spec_to_expr, wick_reference

    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_cases):
        spec = random_product(rng, max_legs=8)
        # convolution factors enter with their argument already deformed
        lib = gamma_dot([deform(spec_to_expr([item])) for item in spec])
        if library_histogram(lib) != wick_reference(spec):
            mismatches += 1
    return mismatches == 0, f"{n_cases} random products, {mismatches} mismatches", {}


# -- numerical checks ----------------------------------------------------------------


def default_lattice():
    from .numerics.lattice import LatticeSpec

    return LatticeSpec(d=1, T=1.0, Lx=2 * np.pi, nt=128, nx=128)


def check_covariance(n_real: int = 10_000, seed: int = 11) -> tuple:
    from .numerics.kernels import QKernel
    from .numerics.lattice import default_test_pairs
    from .numerics.montecarlo import simulate_linear

    spec = default_lattice()
    pairs = default_test_pairs(spec)
    est = simulate_linear(spec, n_real, pairs, seed=seed)
    q = QKernel(spec)
    worst, ok = 0.0, True
    for f1, f2 in pairs:
        target = q.pair(f1, np.conj(f2.values))
        cov = est[f"cov:{f1.name},{f2.name}"]
        pseudo = est[f"pseudo:{f1.name},{f2.name}"]
        z = max(cov.zscore(target), pseudo.zscore(0.0))
        worst = max(worst, z)
        ok &= cov.agrees(target) and pseudo.agrees(0.0)
    return ok, f"5 pairs, n={n_real}, worst deviation {worst:.2f} stderr", {}


def check_slope(n_real: int = 10_000, seed: int = 17, lams=(0.02, 0.05)) -> tuple:
    from .numerics.evaluate import evaluate_sum, standard_bindings
    from .numerics.kernels import coeff_C
    from .numerics.lattice import default_test_pairs
    from .numerics.montecarlo import pair_key, simulate_slopes
    from .perturbation import expand, two_point

    spec = default_lattice()
    pairs = default_test_pairs(spec)
    diagrams = [d for d in two_point(expand(1, 1), 1) if d.lambda_power == 1]
    bindings = standard_bindings(coeff_C(spec, "epsilon_cut"))
    mc = simulate_slopes(spec, list(lams), n_real, pairs, seed=seed, extension="epsilon_cut")
    worst, ok = 0.0, True
    for f1, f2 in pairs:
        target = evaluate_sum(diagrams, spec, [f1, f2], bindings)
        for lam in lams:
            est = mc[pair_key(f1, f2)]["slope"][lam]
            worst = max(worst, est.zscore(target))
            ok &= est.agrees(target)
    return ok, f"5 pairs x lambda {list(lams)}, n={n_real}, worst deviation {worst:.2f} stderr", {}


def check_scaling() -> tuple:
    from .numerics.scaling import standard_scaling_estimates

    res = {r.kernel: r for r in standard_scaling_estimates()}
    g, gg = res["G"].estimate, res["G*Gbar"].estimate
    ok = abs(g - 1) <= 0.15 and abs(gg - 2) <= 0.2 and res["G"].reliable and res["G*Gbar"].reliable
    return ok, f"wsd(G)={g:.3f}, wsd(G Gbar)={gg:.3f}", {}


def check_decay() -> tuple:
    from .numerics.scaling import standard_decay_rows

    rows = {r.direction: r for r in standard_decay_rows()}
    neg = rows[(-1.0, 0.0)].exponent
    spatial = min(rows[(0.0, 1.0)].exponent, rows[(0.0, -1.0)].exponent)
    ok = neg <= 1.5 and spatial >= 3
    return ok, f"p(-1,0)={neg:.2f}, p(+1,0)={rows[(1.0, 0.0)].exponent:.2f}, min spatial p={spatial:.2f}", {}


def check_extension_ambiguity() -> tuple:
    from .deformation import CountertermShift, apply_counterterm_shift, to_diagrams
    from .numerics.evaluate import evaluate_sum, standard_bindings
    from .numerics.kernels import coeff_C, coinciding_profile
    from .numerics.lattice import default_test_pairs
    from .perturbation import correlation_expr, expand

    spec = default_lattice()
    profile = coinciding_profile(spec)
    cut = coeff_C(spec, "epsilon_cut", profile=profile)
    logsub = coeff_C(spec, "epsilon_cut_logsub", profile=profile)
    expr = correlation_expr(expand(1, 1), [False, True], 1)
    diagrams = to_diagrams(expr, strict=True)
    shifted = apply_counterterm_shift(expr, CountertermShift())
    difference = to_diagrams(shifted - expr, strict=True)
    worst = 0.0
    for f1, f2 in default_test_pairs(spec):
        direct = (evaluate_sum(diagrams, spec, [f1, f2], standard_bindings(logsub), lam=1.0)
                  - evaluate_sum(diagrams, spec, [f1, f2], standard_bindings(cut), lam=1.0))
        via_shift = evaluate_sum(difference, spec, [f1, f2], standard_bindings(cut, logsub - cut), lam=1.0)
        worst = max(worst, abs(direct - via_shift) / abs(direct))
    ok = worst < 1e-9 and len(difference) == 2
    return ok, f"{len(difference)} shift diagrams, worst relative deviation {worst:.1e}", {}


@dataclass(frozen=True)
class Criterion:
    key: str
    title: str
    budget: float
    run: Callable


CRITERIA = [
    Criterion("vanishing_mean", "expectation vanishes (kappa=1 k<=4, kappa=2 k<=3)", 10, check_vanishing_mean),
    Criterion("two_point", "first-order two-point diagram set", 5, check_two_point),
    Criterion("counterterm", "M_1 = 2 Cbar [.] and renormalized equation up to K=2", 10, check_counterterm),
    Criterion("graph_counts", "tree power counting and subcriticality", 30, check_graph_closed_forms),
    Criterion("wick_oracle", "deformed products against brute-force Wick matchings", 60, check_wick_oracle),
    Criterion("covariance", "Monte Carlo covariance against Q", 300, check_covariance),
    Criterion("slope", "Monte Carlo order-lambda slope against order-1 diagrams", 600, check_slope),
    Criterion("scaling", "parabolic scaling degrees of G and G Gbar", 60, check_scaling),
    Criterion("decay", "directional Fourier decay of f G", 60, check_decay),
    Criterion("extension", "extension change equals the shift diagrams", 60, check_extension_ambiguity),
]

CRITERION_KEYS = [c.key for c in CRITERIA]


def run_criterion(c: Criterion) -> CriterionResult:
    start = time.perf_counter()
    try:
        passed, detail, data = c.run()
    except Exception as exc:  # a crash is a failure of the criterion, reported as such
        passed, detail, data = False, f"error: {type(exc).__name__}: {exc}", {}
    return CriterionResult(c.key, c.title, bool(passed), detail, time.perf_counter() - start, c.budget, data)


def run_all(keys=None) -> list:
    chosen = CRITERIA if not keys else [c for c in CRITERIA if c.key in set(keys)]
    unknown = set(keys or ()) - set(CRITERION_KEYS)
    if unknown:
        raise KeyError(f"unknown criteria: {sorted(unknown)}")
    return [run_criterion(c) for c in chosen]


__all__ = ["CRITERIA", "CRITERION_KEYS", "CriterionResult", "format_line", "run_all", "run_criterion"]
