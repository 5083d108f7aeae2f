"""Numerical probes of the singular structure of the propagator.

``scaling_degree_estimate`` measures the weighted (parabolic) scaling
degree of a kernel towards the equal-time surface by pairing it with
rescaled test functions ``f_s(t, x) = s^-(2+d) f(t/s^2, x/s)``: for a
kernel homogeneous of degree ``-w`` the pairing scales like ``s^-w``.

``directional_decay_test`` computes localised space-time Fourier
transforms of ``f G`` along rays and fits a power-law decay exponent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernels import KernelGrid, closed_form_G, kernel_G, wrapped_offsets
from .lattice import LatticeSpec, TestFunction, smooth_step

DEFAULT_SCALES = (1.0, 0.5, 0.25, 0.125)


def scaling_lattice() -> LatticeSpec:
    """Fine d = 1 lattice resolving four dyadic parabolic scales."""
    return LatticeSpec(d=1, T=1.0, Lx=8.0, nt=2048, nx=1024)


def _profile(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    # supported on t in [0.25, 1], |x| <= 1
    return smooth_step((t - 0.625) / 0.375, 0.0) * smooth_step(x, 0.0)


@dataclass
class ScalingResult:
    kernel: str
    estimate: float
    scales: list
    pairings: list
    residual: float
    reliable: bool

    def row(self) -> list:
        return [self.kernel, repr(self.estimate)]


def scaling_degree_estimate(kernel: KernelGrid, scales: Sequence[float] = DEFAULT_SCALES,
                            profile: Callable | None = None, max_residual: float = 0.05,
                            name: str | None = None) -> ScalingResult:
    """Fit ``log |<K, f_s>|`` against ``log s`` and return minus the slope.

    ``kernel`` holds samples at non-negative time offsets and FFT-ordered
    space offsets (as produced by ``kernel_G``).  The fit is flagged
    unreliable when the rms residual exceeds ``max_residual``.
    """
    spec = kernel.spec
    if spec.d != 1:
        raise ValueError("scaling estimates are implemented for d = 1")
    if len(scales) < 4:
        raise ValueError("need at least 4 dyadic scales")
    profile = profile or _profile
    t = np.asarray(kernel.time_offsets, float) * spec.dt
    x = wrapped_offsets(spec)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    pairings = []
    for s in scales:
        fs = s ** -(2 + spec.d) * profile(tt / s ** 2, xx / s)
        pairings.append(complex(np.sum(fs * kernel.values) * spec.cell))
    logs, logp = np.log(scales), np.log(np.abs(pairings))
    coef = np.polyfit(logs, logp, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, logs) - logp) ** 2)))
    return ScalingResult(name or kernel.kind, float(-coef[0]), list(scales), pairings, resid,
                         resid <= max_residual)


def continuum_kernel(spec: LatticeSpec) -> KernelGrid:
    """Closed-form propagator on the line sampled at the lattice offsets (zero at ``t = 0``).

    On the torus ``|G|^2`` is not ``1/(4 pi t)``: the periodic images add up
    incoherently to ``1/(Lx dx)``.  Products of kernels are therefore probed
    with the line kernel, which agrees with the lattice one inside the
    support of the rescaled test functions.
    """
    t = np.arange(spec.nt) * spec.dt
    x = wrapped_offsets(spec)
    tt, xx = np.meshgrid(np.where(t > 0, t, 1.0), x, indexing="ij")
    vals = np.where(t[:, None] > 0, closed_form_G(spec, tt, xx), 0.0)
    return KernelGrid(vals, spec, "G", np.arange(spec.nt))


def standard_scaling_estimates(spec: LatticeSpec | None = None) -> list:
    """Estimates for ``G`` (lattice), ``G conj(G)`` (line kernel) and the constant kernel."""
    spec = spec or scaling_lattice()
    g = kernel_G(spec)
    line = continuum_kernel(spec)
    const = KernelGrid(np.ones_like(g.values), spec, "one", g.time_offsets)
    return [scaling_degree_estimate(g, name="G"),
            scaling_degree_estimate(line * line.conj(), name="G*Gbar"),
            scaling_degree_estimate(const, name="constant")]


# -- directional decay ---------------------------------------------------------------


@dataclass
class DecayGrid:
    """Square space-time window centred on the origin, ``t, x in [-L/2, L/2)``."""

    n: int = 256
    T: float = 2.0
    Lx: float = 2 * np.pi
    sign_convention: str = "plus"
    oversample: int = 16

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def dx(self) -> float:
        return self.Lx / self.n

    def times(self) -> np.ndarray:
        return -self.T / 2 + self.dt * np.arange(self.n)

    def xs(self) -> np.ndarray:
        return -self.Lx / 2 + self.dx * np.arange(self.n)

    def propagator(self) -> np.ndarray:
        """Spectral samples of ``G(t, x)``; zero for ``t < 0``, half the lattice delta at ``t = 0``.

        The kernel is computed on a periodic box ``oversample`` times wider
        (same spacing) and cropped, which pushes the wrap-around images far
        outside the tested frequency range.
        """
        m = self.n * self.oversample
        k = 2 * np.pi * np.fft.fftfreq(m, d=self.dx)
        sigma = 1 if self.sign_convention == "plus" else -1
        t = self.times()
        phase = np.exp(-1j * sigma * np.outer(np.clip(t, 0, None), k ** 2))
        wide = np.fft.ifft(phase, axis=1) / self.dx
        # column j of the window is x_j = -Lx/2 + j dx, i.e. offset index j - n/2 (mod m)
        cols = (np.arange(self.n) - self.n // 2) % m
        weight = np.where(t > 1e-12, 1.0, np.where(t > -1e-12, 0.5, 0.0))
        return wide[:, cols] * weight[:, None]

    def bump(self, t0: float, x0: float, radius_t: float, radius_x: float, name: str = "f") -> TestFunction:
        tt, xx = np.meshgrid(self.times(), self.xs(), indexing="ij")
        vals = smooth_step((tt - t0) / radius_t, 0.0) * smooth_step((xx - x0) / radius_x, 0.0)
        box = ((t0 - radius_t, t0 + radius_t), (x0 - radius_x, x0 + radius_x))
        return TestFunction(vals, box, name)

    def gaussian(self, t0: float, x0: float, width_t: float, width_x: float, name: str = "f") -> TestFunction:
        """Gaussian window cut to zero beyond 9 widths (below 1e-17).

        Compact bumps of the ``exp(-1/s)`` type have transforms decaying
        only like ``exp(-c sqrt(R))``, which looks like a low power on a
        short frequency range; the Gaussian separates smooth from singular
        behaviour much more sharply.
        """
        tt, xx = np.meshgrid(self.times(), self.xs(), indexing="ij")
        q = ((tt - t0) / width_t) ** 2 + ((xx - x0) / width_x) ** 2
        vals = np.where(q < 81.0, np.exp(-q / 2), 0.0)
        box = ((t0 - 9 * width_t, t0 + 9 * width_t), (x0 - 9 * width_x, x0 + 9 * width_x))
        return TestFunction(vals, box, name)


@dataclass
class DecayRow:
    direction: tuple
    exponent: float
    radii: list = field(default_factory=list)
    magnitudes: list = field(default_factory=list)
    singular: bool = False

    def row(self) -> list:
        return [f"({self.direction[0]:g},{self.direction[1]:g})", repr(self.exponent)]


def localized_transform(grid: DecayGrid, f: TestFunction, omega: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``sum f G exp(-i (omega t + xi x)) dt dx`` at the given frequency pairs."""
    fg = f.values * grid.propagator()
    et = np.exp(-1j * np.outer(omega, grid.times()))
    ex = np.exp(-1j * np.outer(xi, grid.xs()))
    return np.einsum("rt,tx,rx->r", et, fg, ex) * grid.dt * grid.dx


def directional_decay_test(grid: DecayGrid, f: TestFunction, directions: Sequence,
                           radii: Sequence[float] | None = None, floor: float = 1e-11,
                           singular_below: float = 2.0) -> list:
    """Fit ``|F(R u)| ~ R^-p`` along each unit direction ``u``.

    Radii default to a geometric range up to a fifth of the Nyquist
    frequency along the direction.  Points whose magnitude has dropped
    below ``floor`` times the largest one are excluded from the fit.
    """
    out = []
    for direction in directions:
        u = np.asarray(direction, float)
        u = u / np.linalg.norm(u)
        if radii is None:
            nyq = min(np.pi / h / abs(c) for h, c in ((grid.dt, u[0]), (grid.dx, u[1])) if abs(c) > 1e-12)
            rs = np.geomspace(nyq / 60, nyq / 5, 12)
        else:
            rs = np.asarray(radii, float)
        mags = np.abs(localized_transform(grid, f, rs * u[0], rs * u[1]))
        keep = mags > floor * max(mags.max(), 1e-300)
        if keep.sum() >= 3:
            p = float(-np.polyfit(np.log(rs[keep]), np.log(mags[keep]), 1)[0])
        else:
            # dropped to round-off immediately: faster than any tested power
            p = float("inf")
        out.append(DecayRow(tuple(float(c) for c in direction), p, list(rs), list(mags),
                            p < singular_below))
    return out


def standard_decay_rows(grid: DecayGrid | None = None) -> list:
    """Characteristic directions at the origin and spatial directions off the singular surface.

    The spatial probe sits at ``(t, x) = (0.5, 1.5)``.  Closer to ``t = 0``
    the stationary points of ``f G`` move to ``t ~ x / (2 xi)``, which the
    lattice stops resolving at the upper end of the tested range.
    """
    grid = grid or DecayGrid()
    at_origin = grid.gaussian(0.0, 0.0, 0.1, 0.3, name="origin")
    off_surface = grid.gaussian(0.5, 1.5, 0.1, 0.25, name="off_surface")
    rows = directional_decay_test(grid, at_origin, [(-1.0, 0.0), (1.0, 0.0)])
    rows += directional_decay_test(grid, off_surface, [(0.0, 1.0), (0.0, -1.0)])
    return rows


__all__ = [
    "DecayGrid", "DecayRow", "ScalingResult", "directional_decay_test", "localized_transform",
    "continuum_kernel", "scaling_degree_estimate", "scaling_lattice", "standard_decay_rows", "standard_scaling_estimates",
]
