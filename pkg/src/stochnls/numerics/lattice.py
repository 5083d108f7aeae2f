"""Space-time lattice, smooth cutoffs and test functions.

Time runs over ``t_n = n * dt`` with ``dt = T / nt``; space is a periodic
box of side ``Lx`` sampled at ``x_j = -Lx/2 + j * dx``.  Grid functions are
arrays of shape ``(nt,) + (nx,) * d``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


def _flat(s: np.ndarray) -> np.ndarray:
    pos = s > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, s, 1.0)), 0.0)


def smooth_step(u: np.ndarray, plateau: float) -> np.ndarray:
    """C-infinity profile equal to 1 on ``|u| <= plateau`` and 0 for ``|u| >= 1``."""
    u = np.abs(np.asarray(u, dtype=float))
    s = np.clip((u - plateau) / max(1.0 - plateau, 1e-12), 0.0, 1.0)
    return _flat(1.0 - s) / (_flat(1.0 - s) + _flat(s))


@dataclass(frozen=True)
class ChiSpec:
    """Smooth bump ``height * s((t - ct)/rt) * prod s((x_i - cx)/rx)``."""

    center_t: float = 0.5
    center_x: float = 0.0
    radius_t: float = 0.45
    radius_x: float = 2.0
    plateau: float = 0.5
    height: float = 1.0


@dataclass(frozen=True)
class LatticeSpec:
    d: int = 1
    T: float = 1.0
    Lx: float = 2 * np.pi
    nt: int = 128
    nx: int = 128
    epsilon: float | None = None
    sign_convention: str = "plus"
    chi: ChiSpec = field(default_factory=ChiSpec)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"spatial dimension {self.d} not supported (1 to 3)")
        if self.nt < 8 or self.nx < 8:
            raise ValueError("nt and nx must be at least 8")
        if self.sign_convention not in ("plus", "minus"):
            raise ValueError("sign_convention must be 'plus' or 'minus'")
        if self.T <= 0 or self.Lx <= 0:
            raise ValueError("T and Lx must be positive")
        if self.epsilon is not None and self.epsilon < self.dt * (1 - 1e-12):
            raise ValueError(f"epsilon={self.epsilon} is below the time step {self.dt}")
        c = self.chi
        if c.center_t - c.radius_t < -1e-12 or c.center_t + c.radius_t > self.T + 1e-12:
            raise ValueError("chi time support leaves the grid")
        if c.radius_x > self.Lx / 2 + 1e-12:
            raise ValueError("chi spatial support wraps around the box")

    # -- geometry
    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def cell(self) -> float:
        return self.dt * self.dx ** self.d

    @property
    def shape(self) -> tuple:
        return (self.nt,) + (self.nx,) * self.d

    @property
    def sigma(self) -> int:
        """Sign in the mode evolution ``exp(-i sigma k^2 t)``."""
        return 1 if self.sign_convention == "plus" else -1

    @property
    def eps(self) -> float:
        return self.dt if self.epsilon is None else self.epsilon

    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    def xs(self) -> np.ndarray:
        return -self.Lx / 2 + np.arange(self.nx) * self.dx

    def momenta(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    def k_squared(self) -> np.ndarray:
        k = self.momenta()
        grids = np.meshgrid(*([k] * self.d), indexing="ij")
        return sum(g ** 2 for g in grids)

    def mesh(self):
        """``(t, x1, ..., xd)`` coordinate arrays of the full grid shape."""
        return np.meshgrid(self.times(), *([self.xs()] * self.d), indexing="ij")

    def chi_grid(self) -> np.ndarray:
        c = self.chi
        coords = self.mesh()
        out = c.height * smooth_step((coords[0] - c.center_t) / c.radius_t, c.plateau)
        for xi in coords[1:]:
            out = out * smooth_step((xi - c.center_x) / c.radius_x, c.plateau)
        return out

    # -- serialisation
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        d = dict(d)
        chi = d.pop("chi", None)
        return cls(chi=ChiSpec(**chi) if isinstance(chi, dict) else (chi or ChiSpec()), **d)


@dataclass
class TestFunction:
    values: np.ndarray
    box: tuple  # ((t_lo, t_hi), (x_lo, x_hi)) support box
    name: str = "f"

    def pair(self, field_values: np.ndarray, spec: LatticeSpec) -> np.ndarray:
        """Bilinear lattice pairing over the trailing grid axes."""
        axes = tuple(range(-len(spec.shape), 0))
        return np.sum(self.values * field_values, axis=axes) * spec.cell


def bump(spec: LatticeSpec, center_t: float, center_x: float, radius_t: float, radius_x: float,
         plateau: float = 0.0, amplitude: complex = 1.0, name: str = "f") -> TestFunction:
    """Smooth compactly supported test function on the lattice."""
    coords = spec.mesh()
    vals = smooth_step((coords[0] - center_t) / radius_t, plateau)
    for xi in coords[1:]:
        vals = vals * smooth_step((xi - center_x) / radius_x, plateau)
    vals = amplitude * vals
    box = ((center_t - radius_t, center_t + radius_t), (center_x - radius_x, center_x + radius_x))
    return TestFunction(np.asarray(vals), box, name)


def default_test_pairs(spec: LatticeSpec) -> list:
    """Five pairs of bumps inside the cutoff plateau (used by the covariance checks)."""
    c = spec.chi
    lo, hi = c.center_t - c.radius_t, c.center_t + c.radius_t
    span = hi - lo
    rt = 0.08 * span
    rx = 0.35 * c.radius_x
    centres = [
        ((lo + 0.55 * span, 0.0), (lo + 0.55 * span, 0.0)),
        ((lo + 0.45 * span, -0.3 * c.radius_x), (lo + 0.7 * span, 0.2 * c.radius_x)),
        ((lo + 0.75 * span, 0.1 * c.radius_x), (lo + 0.4 * span, -0.1 * c.radius_x)),
        ((lo + 0.6 * span, 0.35 * c.radius_x), (lo + 0.6 * span, -0.35 * c.radius_x)),
        ((lo + 0.35 * span, 0.0), (lo + 0.8 * span, 0.0)),
    ]
    out = []
    for i, ((t1, x1), (t2, x2)) in enumerate(centres):
        out.append((bump(spec, t1, x1, rt, rx, name=f"f{2 * i + 1}"),
                    bump(spec, t2, x2, rt, rx, name=f"f{2 * i + 2}")))
    return out
