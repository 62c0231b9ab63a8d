"""Self-consistency suites behind ``maxent-tomo validate``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, PhysicalConstants, make_grid, natural_constants
from .maxent import DensityMatrix, MeasurementRecord, _objective, align_data, expectations
from .projectors import MOMENTUM, build_observable_set, position_projector
from .synth import evolve, gaussian_amplitudes
from .wigner import marginals, shear_evolve, wigner_from_density

COMPLETENESS_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-12
COVARIANCE_TOL = 1e-13
GRADIENT_RTOL = 1e-5
GRADIENT_STEP = 1e-5
# absolute floor for components that are zero up to finite-difference noise
GRADIENT_ATOL = 1e-10
MARGINAL_TOL = 1e-10
SHEAR_RMS_TOL = 1e-2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


def toy_grid(n: int) -> GridSpec:
    """Natural-units grid with unit spacing."""
    return make_grid(n, 0.0, float(n - 1), 0.0)


def random_density(n: int, rng, rank: int | None = None) -> DensityMatrix:
    g = rng.normal(size=(n, rank or n)) + 1j * rng.normal(size=(n, rank or n))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_records(obs, rng) -> list[MeasurementRecord]:
    return [MeasurementRecord(d, rng.dirichlet(np.ones(obs.dim))) for d in obs.dataset_ids]


def projector_errors(grid: GridSpec, constants: PhysicalConstants, times, phase_sign: float = 1.0):
    """Worst completeness, orthogonality and time-covariance residuals."""
    obs = build_observable_set(grid, constants, times, phase_sign=phase_sign)
    n = grid.n_points
    eye = np.eye(n)
    comp = orth = 0.0
    for d in obs.dataset_ids:
        block = obs.stack[obs.dataset_slice(d)]
        comp = max(comp, np.abs(block.sum(axis=0) - eye).max())
        prod = np.einsum("iab,jbc->ijac", block, block)
        expect = np.zeros_like(prod)
        idx = np.arange(n)
        expect[idx, idx] = block
        orth = max(orth, np.abs(prod - expect).max())
    cov = 0.0
    for t in times:
        u = np.diag(np.exp(-1j * phase_sign * constants.hbar_over_mass * grid.k_values**2 * t / 2))
        for j in range(n):
            p0 = position_projector(grid, constants, j, 0.0).matrix
            pt = obs.stack[obs.index_map[(float(t), j)]]
            cov = max(cov, np.abs(u.conj().T @ p0 @ u - pt).max())
    return comp, orth, cov


def max_commutator(obs) -> float:
    """Largest ||[A_i, A_j]|| between a momentum and a position projector."""
    best = 0.0
    mom = obs.stack[obs.dataset_slice(MOMENTUM)]
    for t in obs.times:
        pos = obs.stack[obs.dataset_slice(t)]
        c = np.einsum("iab,jbc->ijac", mom, pos) - np.einsum("jab,ibc->ijac", pos, mom)
        best = max(best, float(np.abs(c).max()))
    return best


def finite_difference_gradient(lam, obs, target, weights, step=GRADIENT_STEP):
    g = np.empty_like(lam)
    for i in range(lam.size):
        e = np.zeros_like(lam)
        e[i] = step
        g[i] = (_objective(lam + e, obs, target, weights)[0]
                - _objective(lam - e, obs, target, weights)[0]) / (2 * step)
    return g


def gradient_relative_error(obs, data, lam) -> float:
    """Worst componentwise relative error of the analytic gradient."""
    target, _ = align_data(obs, data)
    w = np.ones_like(target)
    analytic = _objective(lam, obs, target, w)[1]
    fd = finite_difference_gradient(lam, obs, target, w)
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), GRADIENT_ATOL / GRADIENT_RTOL)))


def marginal_errors(rho: DensityMatrix, grid: GridSpec, constants: PhysicalConstants):
    w = wigner_from_density(rho, grid, constants)
    px, pk = marginals(w)
    obs = build_observable_set(grid, constants, [0.0])
    e = expectations(rho, obs)
    return float(np.abs(px - e[: grid.n_points]).max()), float(np.abs(pk - e[grid.n_points:]).max())


def shear_test_setup():
    """Smooth natural-units Gaussian used by the two-path shear check."""
    c = natural_constants()
    grid = make_grid(64, -20.0, 20.0, 0.0)
    rho = DensityMatrix.from_pure(gaussian_amplitudes(grid, c, -8.0, 1.0, 1.5))
    return grid, c, rho, 6.0


def shear_rms(grid, constants, rho, t, phase_sign: float = 1.0) -> float:
    """RMS difference between quantum-evolved and classically sheared Wigner functions."""
    quantum = wigner_from_density(evolve(rho, t, grid, constants, phase_sign), grid, constants)
    classical = shear_evolve(wigner_from_density(rho, grid, constants), t)
    return float(np.sqrt(np.mean((quantum.values - classical.values) ** 2)))


def run_checks(n: int = 8, seed: int = 0, broken_phase_sign: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    sign = -1.0 if broken_phase_sign else 1.0
    grid = toy_grid(n)
    c = natural_constants()
    times = [0.3, 0.7, 1.1]
    results = []

    comp, orth, cov = projector_errors(grid, c, times, sign)
    results.append(CheckResult("projector completeness", comp < COMPLETENESS_TOL, comp, COMPLETENESS_TOL))
    results.append(CheckResult("projector orthogonality", orth < ORTHOGONALITY_TOL, orth, ORTHOGONALITY_TOL))
    results.append(CheckResult("propagator covariance", cov < COVARIANCE_TOL, cov, COVARIANCE_TOL))

    obs = build_observable_set(grid, c, times, phase_sign=sign)
    lam = rng.uniform(-1, 1, len(obs))
    gerr = gradient_relative_error(obs, random_records(obs, rng), lam)
    results.append(CheckResult("analytic gradient", gerr < GRADIENT_RTOL, gerr, GRADIENT_RTOL,
                               f"({len(obs)} multipliers)"))

    ex, ek = marginal_errors(random_density(n, rng), grid, c)
    merr = max(ex, ek)
    results.append(CheckResult("wigner marginals", merr < MARGINAL_TOL, merr, MARGINAL_TOL))

    sg, sc, srho, st = shear_test_setup()
    rms = shear_rms(sg, sc, srho, st, sign)
    results.append(CheckResult("shear consistency", rms < SHEAR_RMS_TOL, rms, SHEAR_RMS_TOL,
                               f"(t={st}, natural units)"))
    return results
