import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxent_tomo.checks import random_density, shear_rms, shear_test_setup
from maxent_tomo.grid import make_grid
from maxent_tomo.maxent import DensityMatrix, expectations
from maxent_tomo.projectors import build_observable_set
from maxent_tomo.synth import (Component, StateRecipe, analytic_wigner, build_state, evolve, gaussian_amplitudes,
                               position_distribution, superposition_recipe)
from maxent_tomo.wigner import (conditional_mean_velocity, local_maxima, marginals, negative_regions,
                                shear_evolve, wigner_from_density)


def test_maximally_mixed_is_flat(grid51, iodine):
    w = wigner_from_density(DensityMatrix.maximally_mixed(51), grid51, iodine)
    np.testing.assert_allclose(w.values, 1 / (51 * grid51.dx * 51 * iodine.hbar * grid51.dk), rtol=1e-12)
    assert w.norm() == pytest.approx(1, abs=1e-12)
    px, pv = marginals(w)
    np.testing.assert_allclose(px, 1 / 51, atol=1e-14)
    np.testing.assert_allclose(pv, 1 / 51, atol=1e-14)


def test_dimension_mismatch(grid51, iodine):
    with pytest.raises(ValueError, match="mismatch"):
        wigner_from_density(DensityMatrix.maximally_mixed(4), grid51, iodine)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 20), seed=st.integers(0, 10**6), kc=st.floats(0, 50))
def test_marginals_equal_diagonals(natural, n, seed, kc):
    g = make_grid(n, -3.0, 7.0, kc)
    rho = random_density(n, np.random.default_rng(seed))
    w = wigner_from_density(rho, g, natural)
    assert w.imag_residue < 1e-10
    assert w.norm() == pytest.approx(1, abs=1e-9)
    px, pk = marginals(w)
    obs = build_observable_set(g, natural, [0.0])
    e = expectations(rho, obs)
    assert np.abs(px - e[:n]).max() < 1e-10
    assert np.abs(pk - np.real(np.diag(rho.matrix))).max() < 1e-10


def test_marginals_of_non_physical_matrix(natural):
    # Hermitian, unit trace, indefinite: marginal identities still hold
    g = make_grid(6, 0.0, 5.0)
    h = np.diag([1.5, -0.5, 0, 0, 0, 0]).astype(complex)
    h[0, 3] = h[3, 0] = 0.3
    w = wigner_from_density(DensityMatrix(h), g, natural)
    _, pk = marginals(w)
    np.testing.assert_allclose(pk, np.diag(h).real, atol=1e-12)


def test_gaussian_wigner(natural):
    g = make_grid(96, -24.0, 24.0, 0.0)
    x0, k0, s = -3.0, 0.8, 1.2
    rho = DensityMatrix.from_pure(gaussian_amplitudes(g, natural, x0, k0, s))
    w = wigner_from_density(rho, g, natural)
    x, k = g.x_values, w.p_values
    near = np.abs(x - x0) <= g.period / 4
    # non-negative around the packet; elsewhere only the periodic-image residual remains
    assert w.values[near].min() >= -1e-10
    assert w.values.min() >= -0.02 * w.values.max()
    px, pk = marginals(w)
    oracle = position_distribution(rho, 0.0, g, natural)
    var_x = px @ (x - px @ x) ** 2
    assert var_x == pytest.approx(oracle @ (x - oracle @ x) ** 2, abs=1e-6)
    assert var_x == pytest.approx(s**2, abs=1e-6)
    var_k = pk @ (k - pk @ k) ** 2
    assert var_k == pytest.approx(1 / (4 * s**2), abs=1e-6)
    i, j = local_maxima(w)[0]
    assert x[i] == pytest.approx(x0, abs=g.dx) and k[j] == pytest.approx(k0, abs=g.dk)


def test_gaussian_close_to_continuum(natural):
    g = make_grid(96, -24.0, 24.0, 0.0)
    recipe = StateRecipe((Component(1.0, -3.0, 0.8, 1.2),))
    w = wigner_from_density(build_state(recipe, g, natural), g, natural)
    X, K = np.meshgrid(g.x_values, g.k_values, indexing="ij")
    exact = analytic_wigner(recipe, natural, X, K)
    # deviation is set by the momentum spacing relative to the packet's momentum width
    assert np.abs(w.values - exact).max() < (g.dk * 1.2) ** 2 * exact.max()


def test_two_gaussian_superposition_is_negative(grid51, iodine):
    recipe = superposition_recipe()
    rho = evolve(build_state(recipe, grid51, iodine), recipe.t_ref, grid51, iodine)
    w = wigner_from_density(rho, grid51, iodine)
    assert w.has_negativity and w.min_value < -0.5 * w.values.max()
    X, K = np.meshgrid(grid51.x_values, grid51.k_values, indexing="ij")
    exact = analytic_wigner(recipe, iodine, X, K) / iodine.hbar
    i, j = np.unravel_index(np.argmin(w.values), w.values.shape)
    ie, je = np.unravel_index(np.argmin(exact), exact.shape)
    assert (i, j) == (ie, je)
    mid = 0.5 * (recipe.components[0].x0 + recipe.components[1].x0)
    assert grid51.x_values[i] == pytest.approx(mid, abs=grid51.dx)


def test_negative_region_diagnostic(grid51, iodine):
    recipe = superposition_recipe()
    rho = evolve(build_state(recipe, grid51, iodine), recipe.t_ref, grid51, iodine)
    regions = negative_regions(wigner_from_density(rho, grid51, iodine))
    assert regions and regions[0]["min"] < 0
    # fringe cells are of order hbar in area
    assert 0.1 < regions[0]["area_over_hbar"] < 10


def test_paper_state_peaks(grid51, iodine, paper_truth):
    w = wigner_from_density(evolve(paper_truth, 2.0, grid51, iodine), grid51, iodine)
    peaks = local_maxima(w)
    assert len(peaks) == 2
    coords = sorted((w.x_values[i], w.velocities[j]) for i, j in peaks)
    assert coords[0][0] == pytest.approx(12.4, abs=grid51.dx)
    assert coords[0][1] == pytest.approx(4.0, abs=w.dv)
    assert coords[1][0] == pytest.approx(13.6, abs=grid51.dx)
    assert coords[1][1] == pytest.approx(4.6, abs=w.dv)
    px, pv = marginals(w)
    # double-peaked side panels
    assert len(local_peaks(px)) == 2 and len(local_peaks(pv)) == 2


def local_peaks(p, frac=0.05):
    return [i for i in range(1, len(p) - 1) if p[i] > p[i - 1] and p[i] > p[i + 1] and p[i] > frac * p.max()]


def test_conditional_velocity(grid51, iodine, paper_truth):
    w = wigner_from_density(evolve(paper_truth, 2.0, grid51, iodine), grid51, iodine)
    fast = conditional_mean_velocity(w, w.x_values > 13.0)
    slow = conditional_mean_velocity(w, w.x_values < 13.0)
    assert fast - slow == pytest.approx(0.6, abs=0.15)


def test_shear_identity(grid51, iodine, paper_truth):
    w = wigner_from_density(paper_truth, grid51, iodine)
    s = shear_evolve(w, 0.0)
    np.testing.assert_array_equal(s.values, w.values)
    assert s.normalization_loss == pytest.approx(0, abs=1e-15)


def test_shear_roundtrip():
    g, c, rho, t = shear_test_setup()
    w = wigner_from_density(rho, g, c)
    back = shear_evolve(shear_evolve(w, t), -t)
    assert np.sqrt(np.mean((back.values - w.values) ** 2)) < 1e-3


def test_shear_reports_leakage(natural):
    g, c, rho, _ = shear_test_setup()
    w = wigner_from_density(rho, g, c)
    assert shear_evolve(w, 40.0).normalization_loss > 0.5


def test_shear_matches_quantum_evolution():
    g, c, rho, t = shear_test_setup()
    assert shear_rms(g, c, rho, t) < 1e-2
    assert shear_rms(g, c, rho, t, phase_sign=-1.0) > 1e-2


def test_shear_matches_quantum_evolution_paper_units(grid51, iodine, paper_truth):
    at2 = evolve(paper_truth, 2.0, grid51, iodine)
    w2 = wigner_from_density(at2, grid51, iodine)
    w5 = wigner_from_density(evolve(at2, 3.0, grid51, iodine), grid51, iodine)
    diff = w5.values - shear_evolve(w2, 3.0).values
    assert np.sqrt(np.mean(diff**2)) < 1e-2
    # relative to the peak height the two paths agree to a few percent
    assert np.sqrt(np.mean(diff**2)) / w5.values.max() < 0.05
