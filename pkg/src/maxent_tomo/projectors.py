"""Momentum and time-propagated position projectors in the momentum basis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .grid import GridSpec, PhysicalConstants

MOMENTUM = "momentum"


@dataclass(frozen=True, eq=False)
class ProjectorMatrix:
    matrix: np.ndarray
    kind: str
    outcome_index: int
    time: float | None = None


def free_phases(grid: GridSpec, constants: PhysicalConstants, t: float,
                sign: float = 1.0) -> np.ndarray:
    """Diagonal of the free propagator exp(-i hbar k^2 t / 2M).

    ``sign=-1`` flips the phase; only used to build deliberately broken
    operators for mutation checks.
    """
    k = grid.k_values
    return np.exp(-1j * sign * constants.hbar_over_mass * k**2 * t / 2)


def free_propagator(grid: GridSpec, constants: PhysicalConstants, t: float) -> np.ndarray:
    return np.diag(free_phases(grid, constants, t))


def _check_index(index, n):
    if not (0 <= index < n) or int(index) != index:
        raise IndexError(f"outcome index {index} out of range [0, {n})")


def momentum_projector(grid: GridSpec, k_index: int) -> ProjectorMatrix:
    _check_index(k_index, grid.n_points)
    m = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    m[k_index, k_index] = 1.0
    return ProjectorMatrix(m, MOMENTUM, int(k_index))


def position_vectors(grid: GridSpec, constants: PhysicalConstants, t: float,
                     sign: float = 1.0) -> np.ndarray:
    """Columns are the momentum-basis components of |x_j, t>.

    Entry (a, j) is exp(-i k_a x_j) * exp(+i hbar k_a^2 t / 2M) / sqrt(N), so
    that <x_j, t|psi> is the position amplitude of psi evolved to time t.
    """
    k = grid.k_values[:, None]
    x = grid.x_values[None, :]
    n = grid.n_points
    return np.exp(-1j * k * x) * np.conj(free_phases(grid, constants, t, sign))[:, None] / np.sqrt(n)


def position_projector(grid: GridSpec, constants: PhysicalConstants, x_index: int,
                       t: float) -> ProjectorMatrix:
    """|x, t><x, t| with element (a, b) = exp(i(k_b - k_a)x) exp(i hbar(k_a^2 - k_b^2)t/2M) / N."""
    _check_index(x_index, grid.n_points)
    v = position_vectors(grid, constants, t)[:, x_index]
    return ProjectorMatrix(np.outer(v, v.conj()), "position", int(x_index), float(t))


class ObservableSet:
    """Ordered family of projectors, one block of N per dataset.

    Datasets are keyed by their probe time (float) or by ``"momentum"``.
    Position datasets come first in time order, the momentum dataset last.
    """

    def __init__(self, grid: GridSpec, constants: PhysicalConstants,
                 projectors: Sequence[ProjectorMatrix], dataset_ids: Sequence[Hashable]):
        self.grid = grid
        self.constants = constants
        self.projectors = tuple(projectors)
        self.dataset_ids = tuple(dataset_ids)
        n = grid.n_points
        if len(self.projectors) != n * len(self.dataset_ids):
            raise ValueError("projector count does not match datasets * N")
        self.index_map = {(d, j): i * n + j for i, d in enumerate(self.dataset_ids) for j in range(n)}
        stack = np.stack([p.matrix for p in self.projectors])
        stack.flags.writeable = False
        self._stack = stack

    def __len__(self):
        return len(self.projectors)

    @property
    def dim(self) -> int:
        return self.grid.n_points

    @property
    def stack(self) -> np.ndarray:
        """All projector matrices as one (len, N, N) array."""
        return self._stack

    def dataset_slice(self, dataset_id) -> slice:
        i = self.dataset_ids.index(dataset_id)
        n = self.grid.n_points
        return slice(i * n, (i + 1) * n)

    @property
    def times(self) -> list[float]:
        return [d for d in self.dataset_ids if d != MOMENTUM]

    def reordered(self, dataset_ids: Sequence[Hashable]) -> "ObservableSet":
        """Same projectors with datasets permuted into ``dataset_ids`` order."""
        if sorted(map(str, dataset_ids)) != sorted(map(str, self.dataset_ids)):
            raise ValueError("reordering must be a permutation of the existing datasets")
        projs = []
        for d in dataset_ids:
            projs.extend(self.projectors[self.dataset_slice(d)])
        return ObservableSet(self.grid, self.constants, projs, dataset_ids)


def build_observable_set(grid: GridSpec, constants: PhysicalConstants, times: Sequence[float],
                         include_momentum: bool = True, phase_sign: float = 1.0) -> ObservableSet:
    times = [float(t) for t in times]
    if not times:
        raise ValueError("at least one probe time is required")
    if len(set(times)) != len(times):
        raise ValueError(f"duplicate probe time in {times}")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"probe times must be strictly increasing, got {times}")
    n = grid.n_points
    projs = []
    for t in times:
        vecs = position_vectors(grid, constants, t, phase_sign)
        for j in range(n):
            projs.append(ProjectorMatrix(np.outer(vecs[:, j], vecs[:, j].conj()), "position", j, t))
    ids: list = list(times)
    if include_momentum:
        projs.extend(momentum_projector(grid, j) for j in range(n))
        ids.append(MOMENTUM)
    return ObservableSet(grid, constants, projs, ids)
