"""Monte Carlo oracle for the linear and first-order stochastic equation (d = 1).

Noise cells are independent complex Gaussians with ``E[xi conj(xi)] =
1/(dt dx)`` and ``E[xi xi] = 0``.  Realisation ``i`` of a run with seed
``s`` always draws from ``default_rng([s, i])``, so any subset of
realisations can be regenerated bit for bit.

The stochastic convolution is computed by stepping every Fourier mode,
``V_n = E (V_{n-1} + dt U_{n-1})``, independently of the operators used to
evaluate diagrams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .kernels import coeff_C, coinciding_profile, q_diagonal
from .lattice import LatticeSpec, TestFunction


@dataclass(frozen=True)
class Estimate:
    """Sample mean of a complex observable with exact running sums.

    The sums are kept as exact rationals, so merging batches in any order
    reproduces the mean of a single big batch exactly.
    """

    n: int = 0
    sum_re: Fraction = Fraction(0)
    sum_im: Fraction = Fraction(0)
    sum_sq: Fraction = Fraction(0)

    @classmethod
    def from_samples(cls, z) -> "Estimate":
        z = np.asarray(z, dtype=complex).ravel()
        re = sum((Fraction(float(v)) for v in z.real), Fraction(0))
        im = sum((Fraction(float(v)) for v in z.imag), Fraction(0))
        sq = sum((Fraction(float(v)) ** 2 for v in z.real), Fraction(0)) + \
            sum((Fraction(float(v)) ** 2 for v in z.imag), Fraction(0))
        return cls(len(z), re, im, sq)

    def __add__(self, other: "Estimate") -> "Estimate":
        return Estimate(self.n + other.n, self.sum_re + other.sum_re, self.sum_im + other.sum_im,
                        self.sum_sq + other.sum_sq)

    @property
    def mean(self) -> complex:
        if not self.n:
            return complex("nan")
        return complex(float(self.sum_re / self.n), float(self.sum_im / self.n))

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return float("inf")
        m2 = (self.sum_re / self.n) ** 2 + (self.sum_im / self.n) ** 2
        var = (self.sum_sq / self.n - m2) * Fraction(self.n, self.n - 1)
        return math.sqrt(max(float(var), 0.0) / self.n)

    def zscore(self, target: complex) -> float:
        return abs(self.mean - target) / self.stderr if self.stderr > 0 else float("inf")

    def agrees(self, target: complex, sigmas: float = 3.0) -> bool:
        return abs(self.mean - target) < sigmas * self.stderr

    def row(self, name: str) -> list:
        m = self.mean
        return [name, repr(m.real), repr(m.imag), repr(self.stderr), self.n]


def draw_noise(spec: LatticeSpec, seed: int, indices: Sequence[int]) -> np.ndarray:
    """Noise for the given realisation indices, shape ``(len(indices), nt, nx)``."""
    scale = 1.0 / math.sqrt(2.0 * spec.cell)
    out = np.empty((len(indices),) + spec.shape, complex)
    for b, i in enumerate(indices):
        g = np.random.default_rng([int(seed), int(i)]).standard_normal((2,) + spec.shape)
        out[b] = (g[0] + 1j * g[1]) * scale
    return out


def propagate(spec: LatticeSpec, source: np.ndarray) -> np.ndarray:
    """Strictly causal propagation of a batch of sources ``(B, nt, nx)``."""
    if spec.d != 1:
        raise ValueError("the Monte Carlo oracle is implemented for d = 1")
    k = 2 * np.pi * np.fft.fftfreq(spec.nx, d=spec.dx)
    step = np.exp(-1j * spec.sigma * k ** 2 * spec.dt)
    S = np.fft.fft(source, axis=-1) * spec.dt
    V = np.zeros_like(S)
    for n in range(1, spec.nt):
        V[:, n] = step * (V[:, n - 1] + S[:, n - 1])
    return np.fft.ifft(V, axis=-1)


def _pair(f: TestFunction, fields: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    return np.einsum("tx,btx->b", f.values, fields) * spec.cell


def _batches(n_real: int, batch: int):
    for start in range(0, n_real, batch):
        yield list(range(start, min(start + batch, n_real)))


def simulate_linear(spec: LatticeSpec, n_real: int, observables: Sequence, seed: int = 0,
                    batch: int = 200) -> dict:
    """Estimates of ``E[phi(f1) conj phi(f2)]``, ``E[phi(f1) phi(f2)]`` and ``E[phi(f1)]``.

    ``phi`` is the cut-off stochastic convolution ``G_chi * xi``.  Keys are
    ``cov:<f1>,<f2>``, ``pseudo:<f1>,<f2>`` and ``mean:<f1>``.
    """
    if n_real < 100:
        raise ValueError("use at least 100 realisations")
    chi = spec.chi_grid()
    out: dict = {}
    for idx in _batches(n_real, batch):
        phi = propagate(spec, chi[None] * draw_noise(spec, seed, idx))
        for f1, f2 in observables:
            a, b = _pair(f1, phi, spec), _pair(f2, phi, spec)
            for key, z in ((f"cov:{f1.name},{f2.name}", a * np.conj(b)),
                           (f"pseudo:{f1.name},{f2.name}", a * b),
                           (f"mean:{f1.name}", a)):
                out[key] = out.get(key, Estimate()) + Estimate.from_samples(z)
    return out


def renormalized_shift(spec: LatticeSpec, extension: str = "epsilon_cut") -> np.ndarray:
    """``Q_lat(y, y) - C̄(y)``: the part of the lattice diagonal removed by the extension."""
    profile = coinciding_profile(spec)
    return q_diagonal(spec, 1, profile) - coeff_C(spec, extension, profile=profile)


def pair_key(f1: TestFunction, f2: TestFunction) -> str:
    return f"{f1.name},{f2.name}"


def simulate_first_order(spec: LatticeSpec, lam: float, n_real: int, f1: TestFunction, f2: TestFunction,
                         seed: int = 0, extension: str = "epsilon_cut", batch: int = 100) -> Estimate:
    """Estimate ``E[psi(f1) conj psi(f2)]`` for one Picard step.

    ``psi = phi + lam G_chi * (|phi|^2 phi - 2 (Q(y,y) - C̄(y)) phi)``: the
    coinciding-point product is renormalised with the same C̄ that enters
    the diagrams.
    """
    out = simulate_slopes(spec, [lam], n_real, [(f1, f2)], seed, extension, batch)
    return out[pair_key(f1, f2)]["value"][lam]


def simulate_slopes(spec: LatticeSpec, lams: Sequence[float], n_real: int, pairs: Sequence,
                    seed: int = 0, extension: str = "epsilon_cut", batch: int = 100) -> dict:
    """Common-random-number estimates at several couplings for several test pairs.

    Returns ``{"f1,f2": {"value": {lam: E[psi1 conj psi2]}, "slope": {lam: ...},
    "mean": {lam: E[psi(f1)]}}}``.  The slope is the central difference
    ``(P(lam) - P(-lam)) / (2 lam)`` of ``P = psi1 conj psi2`` on the same
    noise.  One Picard step makes ``P`` quadratic in lam, so the central
    difference has no truncation bias.
    """
    if n_real < 100:
        raise ValueError("use at least 100 realisations")
    chi = spec.chi_grid()
    shift = renormalized_shift(spec, extension)
    out = {pair_key(f1, f2): {"value": {lam: Estimate() for lam in lams},
                              "slope": {lam: Estimate() for lam in lams if lam},
                              "mean": {lam: Estimate() for lam in lams}} for f1, f2 in pairs}
    for idx in _batches(n_real, batch):
        phi = propagate(spec, chi[None] * draw_noise(spec, seed, idx))
        corr = propagate(spec, chi[None] * (np.abs(phi) ** 2 - 2.0 * shift[None]) * phi)
        for f1, f2 in pairs:
            acc = out[pair_key(f1, f2)]
            phi1, phi2 = _pair(f1, phi, spec), _pair(f2, phi, spec)
            corr1, corr2 = _pair(f1, corr, spec), _pair(f2, corr, spec)

            def prod(lam):
                return (phi1 + lam * corr1) * np.conj(phi2 + lam * corr2)

            for lam in lams:
                acc["value"][lam] = acc["value"][lam] + Estimate.from_samples(prod(lam))
                acc["mean"][lam] = acc["mean"][lam] + Estimate.from_samples(phi1 + lam * corr1)
                if lam:
                    diff = (prod(lam) - prod(-lam)) / (2 * lam)
                    acc["slope"][lam] = acc["slope"][lam] + Estimate.from_samples(diff)
    return out


__all__ = [
    "Estimate", "draw_noise", "pair_key", "propagate", "renormalized_shift", "simulate_first_order",
    "simulate_linear", "simulate_slopes",
]
