"""Discretized one-dimensional phase space and unit conventions.

Units are amu, Angstrom and picosecond throughout, so that velocities come
out in Angstrom/ps and wavenumbers in 1/Angstrom.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants as _sc

# hbar in amu * Angstrom^2 / ps
HBAR_AMU_A2_PS = _sc.hbar / (_sc.atomic_mass * 1e-20 / 1e-12)

# standard atomic weight of iodine
IODINE_MASS_AMU = 126.90447


class GridError(ValueError):
    """Raised for invalid grid parameters."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float
    mass: float
    hbar_over_mass: float = field(init=False)

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError(f"hbar and mass must be positive, got hbar={self.hbar}, mass={self.mass}")
        object.__setattr__(self, "hbar_over_mass", self.hbar / self.mass)

    def velocity_to_k(self, v):
        """Wavenumber (1/A) of a particle moving at velocity ``v`` (A/ps)."""
        return np.asarray(v) / self.hbar_over_mass

    def k_to_velocity(self, k):
        return np.asarray(k) * self.hbar_over_mass


def iodine_constants(mass: str | float = "reduced") -> PhysicalConstants:
    """Constants for the I2 internuclear coordinate.

    ``mass`` is either ``"reduced"`` (m_I / 2, the default), ``"atomic"``
    (m_I) or an explicit value in amu.
    """
    if mass == "reduced":
        m = IODINE_MASS_AMU / 2
    elif mass == "atomic":
        m = IODINE_MASS_AMU
    else:
        m = float(mass)
    return PhysicalConstants(hbar=HBAR_AMU_A2_PS, mass=m)


def natural_constants() -> PhysicalConstants:
    return PhysicalConstants(hbar=1.0, mass=1.0)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform position grid and its DFT-conjugate wavenumber grid.

    The wavenumber grid has spacing ``2*pi/(N*dx)`` and is centered on
    ``k_center`` so that a band of occupied momenta away from zero can be
    resolved without wasting points.
    """

    n_points: int
    x_min: float
    x_max: float
    k_center: float = 0.0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise GridError(f"invalid point count n_points={self.n_points}; need an integer >= 2")
        if not self.x_max > self.x_min:
            raise GridError(f"invalid bounds: x_max={self.x_max} must exceed x_min={self.x_min}")
        if not self.k_center >= 0:
            raise GridError(f"k_center must be >= 0, got {self.k_center}")
        n = int(self.n_points)
        dx = (self.x_max - self.x_min) / (n - 1)
        dk = 2 * np.pi / (n * dx)
        offsets = np.arange(n) - (n // 2)
        x = self.x_min + dx * np.arange(n)
        k = self.k_center + dk * offsets
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dk", dk)
        object.__setattr__(self, "x_values", x)
        object.__setattr__(self, "k_values", k)

    @property
    def period(self) -> float:
        """Length of the periodic position window, N * dx."""
        return self.n_points * self.dx

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (self.n_points, self.x_min, self.x_max, self.k_center) == (
            other.n_points, other.x_min, other.x_max, other.k_center)

    def __hash__(self):
        return hash((self.n_points, self.x_min, self.x_max, self.k_center))

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "x_min": self.x_min, "x_max": self.x_max,
                "k_center": self.k_center}


def make_grid(n_points: int, x_min: float, x_max: float, k_center: float = 0.0) -> GridSpec:
    return GridSpec(n_points, float(x_min), float(x_max), float(k_center))


def paper_grid(constants: PhysicalConstants | None = None, n_points: int = 51) -> GridSpec:
    """51-point grid over 8-30 A with momenta centered on 4.3 A/ps.

    Wide enough that both velocity components stay inside the window from
    2 ps to 5 ps.
    """
    constants = constants or iodine_constants()
    return make_grid(n_points, 8.0, 30.0, float(constants.velocity_to_k(4.3)))
