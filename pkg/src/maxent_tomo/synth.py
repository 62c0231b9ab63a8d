"""Ground-truth states and synthetic measurement records.

States are built from Gaussian wavepackets, either mixed incoherently or
superposed coherently, and expressed in the momentum basis of a grid at the
pump time t = 0.  Component positions are specified at a reference time and
propagated back, so ``x0`` is where the packet sits at ``t_ref``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import GridSpec, PhysicalConstants
from .maxent import DensityMatrix, MeasurementRecord, entropy, expectations
from .projectors import MOMENTUM, build_observable_set, free_phases


class WavepacketOutOfGridError(ValueError):
    pass


@dataclass(frozen=True)
class Component:
    weight: float
    x0: float
    v0: float
    sigma_x: float
    coherent_with: int | None = None
    phase: float = 0.0


@dataclass(frozen=True)
class StateRecipe:
    components: tuple
    t_ref: float = 0.0

    def __post_init__(self):
        comps = tuple(c if isinstance(c, Component) else Component(**c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("recipe needs at least one component")
        for c in comps:
            if c.sigma_x <= 0:
                raise ValueError(f"sigma_x must be positive, got {c.sigma_x}")
            if c.weight < 0:
                raise ValueError(f"weights must be >= 0, got {c.weight}")
        groups = self.groups()
        for g in groups:
            ws = {comps[i].weight for i in g}
            if len(ws) != 1:
                raise ValueError(f"coherent components {g} must share one weight, got {sorted(ws)}")
        total = sum(comps[g[0]].weight for g in groups)
        if abs(total - 1) > 1e-9:
            raise ValueError(f"group weights must sum to 1, got {total}")

    def groups(self) -> list[list[int]]:
        """Indices of components forming each pure-state term of the mixture."""
        n = len(self.components)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i

        for i, c in enumerate(self.components):
            if c.coherent_with is not None:
                j = int(c.coherent_with)
                if not 0 <= j < n or j == i:
                    raise ValueError(f"component {i}: invalid coherent_with={c.coherent_with}")
                parent[find(i)] = find(j)
        out: dict = {}
        for i in range(n):
            out.setdefault(find(i), []).append(i)
        return sorted(out.values())

    def to_dict(self) -> dict:
        return {"t_ref": self.t_ref, "components": [vars(c).copy() for c in self.components]}


def paper_recipe(sigma_x: float = 0.4) -> StateRecipe:
    """Incoherent mixture of a slow packet at 12.4 A and a fast one at 13.6 A (2 ps)."""
    return StateRecipe((Component(0.5, 12.4, 4.0, sigma_x), Component(0.5, 13.6, 4.6, sigma_x)),
                       t_ref=2.0)


def superposition_recipe(sigma_x: float = 0.4, separation: float = 2.4,
                         phase: float = np.pi / 2) -> StateRecipe:
    """Coherent superposition of two co-moving packets, as from two phase-locked pulses."""
    x0 = 13.2 - separation / 2
    return StateRecipe((Component(1.0, x0, 4.3, sigma_x),
                        Component(1.0, x0 + separation, 4.3, sigma_x, coherent_with=0, phase=phase)),
                       t_ref=2.0)


PRESETS = {"paper-two-component": paper_recipe, "superposition": superposition_recipe}


def gaussian_amplitudes(grid: GridSpec, constants: PhysicalConstants, x0: float, v0: float,
                        sigma_x: float) -> np.ndarray:
    """Momentum amplitudes of exp(-(x-x0)^2/4 sigma^2 + i k0 x), unit norm."""
    k = grid.k_values
    k0 = constants.velocity_to_k(v0)
    psi = np.exp(-((k - k0) * sigma_x) ** 2 - 1j * (k - k0) * x0)
    return psi / np.linalg.norm(psi)


def _check_fit(c: Component, grid: GridSpec, constants: PhysicalConstants):
    lo, hi = c.x0 - 2 * c.sigma_x, c.x0 + 2 * c.sigma_x
    if lo < grid.x_min or hi > grid.x_max:
        raise WavepacketOutOfGridError(
            f"packet at x0={c.x0} A with sigma={c.sigma_x} A exceeds [{grid.x_min}, {grid.x_max}]")
    k0 = constants.velocity_to_k(c.v0)
    sk = 1 / (2 * c.sigma_x)
    if k0 - 2 * sk < grid.k_values[0] or k0 + 2 * sk > grid.k_values[-1]:
        raise WavepacketOutOfGridError(
            f"packet at v0={c.v0} A/ps exceeds the momentum window "
            f"[{constants.k_to_velocity(grid.k_values[0]):.3f}, "
            f"{constants.k_to_velocity(grid.k_values[-1]):.3f}] A/ps")
    if c.x0 - 4 * c.sigma_x < grid.x_min or c.x0 + 4 * c.sigma_x > grid.x_max:
        warnings.warn(f"packet at x0={c.x0} A lies within 4 sigma of the grid edge", stacklevel=3)


def build_state(recipe: StateRecipe, grid: GridSpec, constants: PhysicalConstants) -> DensityMatrix:
    n = grid.n_points
    back = np.conj(free_phases(grid, constants, recipe.t_ref))
    rho = np.zeros((n, n), dtype=complex)
    for group in recipe.groups():
        psi = np.zeros(n, dtype=complex)
        for i in group:
            c = recipe.components[i]
            _check_fit(c, grid, constants)
            psi += np.exp(1j * c.phase) * gaussian_amplitudes(grid, constants, c.x0, c.v0, c.sigma_x)
        psi = back * psi / np.linalg.norm(psi)
        rho += recipe.components[group[0]].weight * np.outer(psi, psi.conj())
    return DensityMatrix((rho + rho.conj().T) / 2)


def evolve(rho: DensityMatrix, t: float, grid: GridSpec, constants: PhysicalConstants,
           phase_sign: float = 1.0) -> DensityMatrix:
    """Free evolution by ``t`` ps: rho(k1, k2) picks up exp(-i hbar (k1^2 - k2^2) t / 2M)."""
    u = free_phases(grid, constants, t, phase_sign)
    m = u[:, None] * rho.matrix * u.conj()[None, :]
    return DensityMatrix(m, rho.eigenvalues)


def position_distribution(rho: DensityMatrix, t: float, grid: GridSpec,
                          constants: PhysicalConstants) -> np.ndarray:
    """Position histogram at time ``t`` by direct FFT of the eigenvectors.

    Independent of the projector matrices: each eigenvector is propagated,
    transformed to position with an inverse DFT and squared.
    """
    n = grid.n_points
    p, v = np.linalg.eigh(rho.matrix)
    u = free_phases(grid, constants, t)[:, None]
    j0 = n // 2
    # sum_a c_a exp(i k_a x_j) with k_a = k_center + (a - j0) dk and x_j = x_min + j dx
    shift = np.exp(1j * (grid.k_values - grid.k_center) * grid.x_min)[:, None]
    amp = np.fft.ifft(u * v * shift, axis=0) * n / np.sqrt(n)
    amp *= np.exp(1j * grid.k_center * grid.x_values)[:, None]
    amp *= np.exp(-2j * np.pi * j0 * np.arange(n) / n)[:, None]
    return np.clip(np.abs(amp) ** 2 @ np.clip(p, 0, None), 0, None)


def gaussian_cross_wigner(x, k, a, p, b, q, sigma):
    """Continuous cross-Wigner function W_fg(x, k) of two unit-norm Gaussians.

    f has center a and wavenumber p, g has center b and wavenumber q, both
    with position width ``sigma``.  Phases are not included.
    """
    beta = -(b - a) / (4 * sigma**2) + 1j * ((p + q) / 2 - k)
    return np.exp(-((x - a) ** 2 + (x - b) ** 2) / (4 * sigma**2) + 2 * sigma**2 * beta**2
                  + 1j * (p - q) * x) / np.pi


def analytic_wigner(recipe: StateRecipe, constants: PhysicalConstants, x, k) -> np.ndarray:
    """Continuum Wigner function W(x, k) of the recipe state at ``t_ref`` (per unit x and k)."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    w = np.zeros(np.broadcast(x, k).shape)
    for group in recipe.groups():
        comps = [recipe.components[i] for i in group]
        acc = np.zeros_like(w, dtype=complex)
        norm = 0.0
        for ci in comps:
            for cj in comps:
                ki = constants.velocity_to_k(ci.v0)
                kj = constants.velocity_to_k(cj.v0)
                if ci.sigma_x != cj.sigma_x:
                    raise ValueError("analytic cross terms need equal widths")
                ph = np.exp(1j * (ci.phase - cj.phase))
                acc += ph * gaussian_cross_wigner(x, k, ci.x0, ki, cj.x0, kj, ci.sigma_x)
                # overlap <g_j|g_i> for normalization
                s = ci.sigma_x
                dx0, dk0 = ci.x0 - cj.x0, ki - kj
                ov = np.exp(-dx0**2 / (8 * s**2) - s**2 * dk0**2 / 2
                            + 1j * dk0 * (ci.x0 + cj.x0) / 2)
                norm += np.real(ph * ov)
        w += comps[0].weight * np.real(acc) / norm
    return w


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    records: tuple
    truth: DensityMatrix
    seed: int | None = None
    times: tuple = field(default_factory=tuple)
    counts: int | None = None


def sample_dataset(rho: DensityMatrix, grid: GridSpec, constants: PhysicalConstants,
                   times: Sequence[float], counts: int | None = None,
                   seed: int | None = 0) -> SyntheticDataset:
    """Position records at each time plus one momentum record.

    Without ``counts`` the records are the exact expectations; with counts
    each dataset is one multinomial draw of ``counts`` events.
    """
    if counts is not None and counts <= 0:
        raise ValueError(f"counts must be positive, got {counts}")
    obs = build_observable_set(grid, constants, times)
    exact = expectations(rho, obs)
    rng = np.random.default_rng(seed)
    records = []
    for d in obs.dataset_ids:
        a = np.clip(exact[obs.dataset_slice(d)], 0, None)
        a = a / a.sum()
        if counts is not None:
            a = rng.multinomial(counts, a) / counts
        records.append(MeasurementRecord(d, a, counts))
    return SyntheticDataset(tuple(records), rho, seed, tuple(obs.times), counts)


__all__ = [
    "Component", "StateRecipe", "SyntheticDataset", "WavepacketOutOfGridError", "PRESETS",
    "paper_recipe", "superposition_recipe", "build_state", "evolve", "sample_dataset",
    "position_distribution", "analytic_wigner", "gaussian_amplitudes", "entropy", "MOMENTUM",
]
