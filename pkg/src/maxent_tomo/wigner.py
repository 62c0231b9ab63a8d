"""Wigner phase-space function of a momentum-basis density matrix.

For each pair of momenta (k_a, k_b) the coherence rho_ab contributes
rho_ab * exp(i (k_a - k_b) x) at the mean momentum (k_a + k_b) / 2.  Pairs
with odd a + b land halfway between grid momenta; their rows are split
evenly onto the two neighbouring grid momenta.  On a periodic N-point grid
the half-integer rows carry sign-flipped copies of the state displaced by
half the window, so splitting them cancels those copies to second order in
dk while keeping both marginals exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import GridSpec, PhysicalConstants
from .maxent import DensityMatrix


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """W(x, p) sampled on ``x_values`` x ``p_values``; ``values[i, j]`` is at (x_i, p_j).

    Normalized so that ``values.sum() * dx * dp == 1``.
    """

    values: np.ndarray
    x_values: np.ndarray
    p_values: np.ndarray
    mass: float
    hbar: float
    imag_residue: float = 0.0
    normalization_loss: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x_values[1] - self.x_values[0])

    @property
    def dp(self) -> float:
        return float(self.p_values[1] - self.p_values[0])

    @property
    def velocities(self) -> np.ndarray:
        return self.p_values / self.mass

    @property
    def dv(self) -> float:
        return self.dp / self.mass

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    @property
    def has_negativity(self) -> bool:
        return self.min_value < 0

    def norm(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)


def _row_sums(rho: np.ndarray, grid: GridSpec) -> np.ndarray:
    """R[s, j] = sum_{a+b=s} rho_ab exp(i (a-b) dk x_j), s = 0 .. 2N-2."""
    n = grid.n_points
    a, b = np.indices((n, n))
    s = (a + b).ravel()
    phase = np.exp(1j * np.outer((a - b).ravel() * grid.dk, grid.x_values))
    contrib = rho.ravel()[:, None] * phase
    out = np.zeros((2 * n - 1, n), dtype=complex)
    np.add.at(out, s, contrib)
    return out


def wigner_from_density(rho: DensityMatrix, grid: GridSpec, constants: PhysicalConstants) -> WignerGrid:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    n = grid.n_points
    if m.shape != (n, n):
        raise ValueError(f"dimension mismatch: rho is {m.shape}, grid has {n} points")
    r = _row_sums(m, grid)
    w = r[0::2].copy()
    w[1:] += r[1::2] / 2
    w[:-1] += r[1::2] / 2
    imag = float(np.max(np.abs(w.imag)))
    # per unit x and k; N dx dk = 2 pi
    wk = w.real.T / (2 * np.pi)
    return WignerGrid(values=wk / constants.hbar, x_values=grid.x_values.copy(),
                      p_values=constants.hbar * grid.k_values, mass=constants.mass,
                      hbar=constants.hbar, imag_residue=imag)


def marginals(w: WignerGrid):
    """Position and momentum bin probabilities (each sums to one).

    These are the integrals of W over momentum and position times the cell
    width, i.e. directly comparable with measured histograms.
    """
    cell = w.dx * w.dp
    return w.values.sum(axis=1) * cell, w.values.sum(axis=0) * cell


def shear_evolve(w: WignerGrid, t: float) -> WignerGrid:
    """Classical free-flight shear W'(x, p) = W(x - p t / M, p).

    Each momentum column is linearly interpolated; probability pushed
    outside the window is dropped and reported as ``normalization_loss``.
    """
    x = w.x_values
    out = np.empty_like(w.values)
    for j, v in enumerate(w.velocities):
        out[:, j] = np.interp(x - v * t, x, w.values[:, j], left=0.0, right=0.0)
    total = w.values.sum()
    loss = float(1 - out.sum() / total) if total else 0.0
    return WignerGrid(out, x.copy(), w.p_values.copy(), w.mass, w.hbar, w.imag_residue, loss)


def local_maxima(w: WignerGrid, min_fraction: float = 0.05) -> list[tuple[int, int]]:
    """Strict local maxima over the 8-neighbourhood with W >= min_fraction * max W."""
    v = w.values
    footprint = np.ones((3, 3), dtype=bool)
    footprint[1, 1] = False
    neigh = ndimage.maximum_filter(v, footprint=footprint, mode="constant", cval=-np.inf)
    mask = (v > neigh) & (v >= min_fraction * v.max())
    idx = np.argwhere(mask)
    order = np.argsort(-v[mask])
    return [tuple(map(int, idx[i])) for i in order]


def conditional_mean_velocity(w: WignerGrid, x_mask) -> float:
    """Mean velocity of the phase-space weight over the selected positions."""
    sub = w.values[np.asarray(x_mask)]
    return float(np.sum(sub * w.velocities[None, :]) / np.sum(sub))


def negative_regions(w: WignerGrid, min_fraction: float = 0.01) -> list[dict]:
    """Connected regions where W < -min_fraction * max W, with their phase-space areas.

    Areas are in amu A^2/ps (units of hbar).
    """
    mask = w.values < -min_fraction * w.values.max()
    labels, count = ndimage.label(mask)
    out = []
    cell = w.dx * w.dp
    for lab in range(1, count + 1):
        sel = labels == lab
        i, j = np.unravel_index(np.argmin(np.where(sel, w.values, np.inf)), w.values.shape)
        out.append({"area": float(sel.sum() * cell), "area_over_hbar": float(sel.sum() * cell / w.hbar),
                    "min": float(w.values[i, j]), "x": float(w.x_values[i]),
                    "v": float(w.velocities[j])})
    return sorted(out, key=lambda r: r["min"])
