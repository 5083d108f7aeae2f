"""Lattice kernels: the Schrödinger propagator, its covariance and C̄.

The propagator on the periodic lattice is the spectral sum

    G(t, x) = (1/Lx^d) sum_k exp(i k.x - i sigma |k|^2 t),   t > 0,

with ``G(0, .) = delta / dx^d`` and ``G = 0`` for ``t < 0``.  Convolutions
are strictly causal in time (left Riemann sum over earlier steps) and exact
in space (FFT), so ``(G * u)(t_n) = sum_{m<n} dt ifft(E^(n-m) fft(u_m))``
with ``E = exp(-i sigma |k|^2 dt)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec, TestFunction


@dataclass
class KernelGrid:
    """Samples indexed by (time offset n >= 0 or signed, space offset)."""

    values: np.ndarray
    spec: LatticeSpec
    kind: str
    time_offsets: np.ndarray

    def conj(self) -> "KernelGrid":
        bar = {"G": "Gbar", "Gbar": "G"}.get(self.kind, self.kind + "_conj")
        return KernelGrid(np.conj(self.values), self.spec, bar, self.time_offsets)

    def __mul__(self, other: "KernelGrid") -> "KernelGrid":
        if not np.array_equal(self.time_offsets, other.time_offsets):
            raise ValueError("kernel grids live on different time offsets")
        return KernelGrid(self.values * other.values, self.spec, f"{self.kind}*{other.kind}", self.time_offsets)


def _spatial_axes(spec: LatticeSpec) -> tuple:
    return tuple(range(-spec.d, 0))


def _fft(u, spec):
    return np.fft.fftn(u, axes=_spatial_axes(spec))


def _ifft(u, spec):
    return np.fft.ifftn(u, axes=_spatial_axes(spec))


def mode_phase(spec: LatticeSpec, steps) -> np.ndarray:
    """``exp(-i sigma |k|^2 t)`` for ``t = steps * dt`` (broadcast over steps)."""
    steps = np.asarray(steps, dtype=float)
    k2 = spec.k_squared()
    return np.exp(-1j * spec.sigma * np.multiply.outer(steps * spec.dt, k2))


def kernel_G(spec: LatticeSpec, bar: bool = False, negative_times: bool = False) -> KernelGrid:
    """Propagator samples at time offsets ``0..nt-1`` (optionally ``-(nt-1)..nt-1``).

    Space offsets are stored in FFT order (offset index ``j`` is the
    displacement ``j dx`` wrapped to the box).
    """
    if spec.d > 3:
        raise ValueError("only d <= 3 is supported")
    steps = np.arange(spec.nt)
    vals = _ifft(mode_phase(spec, steps), spec) / spec.dx ** spec.d
    offsets = steps
    if negative_times:
        vals = np.concatenate([np.zeros((spec.nt - 1,) + vals.shape[1:], complex), vals])
        offsets = np.arange(-(spec.nt - 1), spec.nt)
    if bar:
        vals = np.conj(vals)
    return KernelGrid(vals, spec, "Gbar" if bar else "G", offsets)


def closed_form_G(spec: LatticeSpec, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Continuum kernel ``(4 pi i t)^(-d/2) exp(-|x|^2 / (4 i t))`` (d = 1 arguments)."""
    t = np.asarray(t, dtype=float)
    s = spec.sigma
    return (4 * np.pi * 1j * s * t) ** (-0.5 * spec.d) * np.exp(-np.asarray(x) ** 2 / (4j * s * t))


def wrapped_offsets(spec: LatticeSpec) -> np.ndarray:
    """Displacement of each FFT-ordered offset index, wrapped to ``[-Lx/2, Lx/2)``."""
    j = np.arange(spec.nx)
    return ((j * spec.dx + spec.Lx / 2) % spec.Lx) - spec.Lx / 2


def schrodinger_residual(spec: LatticeSpec, grid: KernelGrid | None = None) -> np.ndarray:
    """Apply ``i d/dt + sigma * Laplacian`` to the propagator samples.

    The time derivative is taken mode by mode from the exact phase and the
    Laplacian spectrally, so the residual measures how well the sampled
    kernel solves the homogeneous equation away from ``t = 0``.
    """
    grid = grid or kernel_G(spec)
    k2 = spec.k_squared()
    modes = _fft(grid.values, spec) * spec.dx ** spec.d
    dt_modes = -1j * spec.sigma * k2 * modes
    lap_modes = -k2 * modes
    res = _ifft(1j * dt_modes + spec.sigma * lap_modes, spec) / spec.dx ** spec.d
    return res


def finite_difference_residual(spec: LatticeSpec) -> np.ndarray:
    """``(i d/dt + sigma Lap) G`` with a centred time difference on the samples.

    Returns the residual on interior times ``1..nt-2``; the origin row
    carries the delta source and is excluded by the caller.
    """
    g = kernel_G(spec).values
    dg = (g[2:] - g[:-2]) / (2 * spec.dt)
    lap = _ifft(-spec.k_squared() * _fft(g[1:-1], spec), spec)
    return 1j * dg + spec.sigma * lap


class CausalOps:
    """Lattice convolution operators built from the propagator.

    ``forward(u)(n) = sum_{m<n} sum_y G(n-m, x-y) u(m, y) dt dx^d``
    ``adjoint(v)(m) = sum_{n>m} sum_x G(n-m, x-y) v(n, x) dt dx^d`` (transpose)
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.step = mode_phase(spec, 1)
        self.chi = spec.chi_grid()

    def forward(self, u: np.ndarray) -> np.ndarray:
        spec = self.spec
        U = _fft(u, spec) * spec.dt
        V = np.zeros_like(U)
        acc = np.zeros(U.shape[1:], complex)
        for n in range(1, spec.nt):
            acc = self.step * (acc + U[n - 1])
            V[n] = acc
        return _ifft(V, spec)

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        spec = self.spec
        U = _fft(v, spec) * spec.dt
        W = np.zeros_like(U)
        acc = np.zeros(U.shape[1:], complex)
        for m in range(spec.nt - 2, -1, -1):
            acc = self.step * (acc + U[m + 1])
            W[m] = acc
        return _ifft(W, spec)

    # edge messages (see evaluate.py): G_chi(a, c) = G(a - c) chi(c)
    def g_up(self, m_child, bar=False):
        """Sum over the convolved vertex: ``sum_c G_chi(a, c) m(c)``."""
        if bar:
            return np.conj(self.forward(self.chi * np.conj(m_child)))
        return self.forward(self.chi * m_child)

    def g_down(self, m_parent, bar=False):
        """Sum over the outer vertex: ``sum_a G_chi(a, c) m(a)``."""
        if bar:
            return self.chi * np.conj(self.adjoint(np.conj(m_parent)))
        return self.chi * self.adjoint(m_parent)

    def q_to_first(self, m_second):
        """``sum_b Q(a, b) m(b)``."""
        return self.forward(self.chi ** 2 * np.conj(self.adjoint(np.conj(m_second))))

    def q_to_second(self, m_first):
        """``sum_a Q(a, b) m(a)``."""
        return np.conj(self.forward(self.chi ** 2 * np.conj(self.adjoint(m_first))))


class QKernel:
    """Covariance ``Q(a, b) = sum_z G(a-z) conj G(b-z) chi(z)^2 dt dx^d``."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.ops = CausalOps(spec)

    def pair(self, f1: TestFunction | np.ndarray, f2: TestFunction | np.ndarray) -> complex:
        """Bilinear pairing ``Q(f1 (x) f2)``."""
        a = getattr(f1, "values", f1)
        b = getattr(f2, "values", f2)
        cell = self.spec.cell
        h1 = self.ops.adjoint(a)
        h2 = np.conj(self.ops.adjoint(np.conj(b)))
        return complex(np.sum(self.ops.chi ** 2 * h1 * h2) * cell)

    def dense(self) -> np.ndarray:
        """Full matrix over grid points (small lattices only)."""
        spec = self.spec
        n = int(np.prod(spec.shape))
        if n > 4096:
            raise ValueError("dense Q is limited to 4096 grid points")
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0 / spec.cell
            cols.append(self.ops.q_to_first(e.reshape(spec.shape)).ravel())
        return np.array(cols).T


def kernel_Q(spec: LatticeSpec) -> QKernel:
    return QKernel(spec)


def coinciding_profile(spec: LatticeSpec) -> np.ndarray:
    """``D[tau, y] = sum_x |G(tau, x)|^2 chi(t_y - tau dt, y - x)^2 dx^d``.

    Row ``tau`` is the contribution of time lag ``tau`` to the diagonal of
    Q at ``y``; entries with ``t_y < tau dt`` are zero.
    """
    g2 = np.abs(kernel_G(spec).values) ** 2
    G2 = _fft(g2, spec)
    X = _fft(spec.chi_grid() ** 2, spec)
    out = np.zeros((spec.nt,) + spec.shape, float)
    for tau in range(1, spec.nt):
        conv = np.real(_ifft(G2[tau][None] * X[:spec.nt - tau], spec)) * spec.dx ** spec.d
        out[tau, tau:] = conv
    return out


def q_diagonal(spec: LatticeSpec, min_lag: int = 1, profile: np.ndarray | None = None) -> np.ndarray:
    """``sum_{tau >= min_lag} D[tau] dt``; ``min_lag = 1`` gives the full lattice Q(y, y)."""
    D = coinciding_profile(spec) if profile is None else profile
    return D[min_lag:].sum(axis=0) * spec.dt


def _cut_lag(spec: LatticeSpec, eps: float) -> int:
    """Smallest lag with ``tau dt > eps``."""
    return int(np.floor(eps / spec.dt + 1e-9)) + 1


def coeff_C(spec: LatticeSpec, extension: str = "epsilon_cut", n_fit: int = 4,
            profile: np.ndarray | None = None) -> np.ndarray:
    """Coinciding-point kernel C̄ on the grid.

    ``epsilon_cut`` keeps only time lags ``t_y - t_z > epsilon``.
    ``epsilon_cut_logsub`` fits ``C̄_e(y) = a(y) + b(y) log e`` over
    ``e = epsilon * 2^j`` and subtracts the trend ``b(y) log epsilon``.
    The grid is real, so the barred and unbarred kernels coincide.
    """
    D = coinciding_profile(spec) if profile is None else profile
    eps = spec.eps
    base = q_diagonal(spec, _cut_lag(spec, eps), D)
    if extension == "epsilon_cut":
        return base
    if extension != "epsilon_cut_logsub":
        raise ValueError(f"unknown extension {extension!r}")
    if spec.d != 1:
        raise ValueError("the logarithmic subtraction is only calibrated for d = 1")
    epss = [eps * 2 ** j for j in range(n_fit) if eps * 2 ** j < spec.T / 2]
    if len(epss) < 2:
        raise ValueError("epsilon too large for the logarithmic fit")
    logs = np.log(epss)
    vals = np.stack([q_diagonal(spec, _cut_lag(spec, e), D) for e in epss])
    lc = logs - logs.mean()
    slope = np.tensordot(lc, vals - vals.mean(axis=0), axes=(0, 0)) / np.sum(lc ** 2)
    return base - slope * np.log(eps)


__all__ = [
    "CausalOps", "KernelGrid", "QKernel", "closed_form_G", "coeff_C", "coinciding_profile",
    "finite_difference_residual", "kernel_G", "kernel_Q", "mode_phase", "q_diagonal",
    "schrodinger_residual", "wrapped_offsets",
]
