import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsemimo.errors import EmptySelection, Infeasible, SubsetOutOfRange, SynthError
from sparsemimo.imaging import ImageGrid, bp_image
from sparsemimo.model import ArrayTopology, FrequencyGrid, Scene, forward_scatter
from sparsemimo.synthesis import (ReferenceSpec, ResolutionSpec, SynthesisConfig, apodize,
                                  lemma1_check, reference_pattern, resolution,
                                  reweighted_l1, sampling_grid, select_elements,
                                  select_indices, solve_l1, synthesize_sequential)
from sparsemimo.synthesis.sampling import min_samples
from sparsemimo.topologies import line, uniform_linear


def deg(a):
    return np.deg2rad(a)


# -- resolution and sampling ----------------------------------------------------

def spec(theta_x=30.0, theta_z=30.0, lam=9.224e-3, D_x=0.6, D_z=0.6):
    return ResolutionSpec(deg(theta_x), deg(theta_x), deg(theta_z), deg(theta_z),
                          lam, D_x, D_z)


def test_resolution_at_thirty_degrees():
    dx, dz = resolution(spec())
    assert dx == pytest.approx(8.91e-3, abs=5e-6)
    assert dx == dz


def test_resolution_limit_is_quarter_wavelength():
    dx, _ = resolution(spec(theta_x=180.0))
    assert dx == pytest.approx(9.224e-3 / 4, rel=1e-15)


def test_sampling_counts():
    g = sampling_grid(spec(D_z=0.0), 1.0)
    assert (g.M_x, g.M_z) == (68, 1)
    assert sampling_grid(spec(), 1.0).M == 4624
    assert min_samples(8.91e-3, 8.91e-3) == 2


def test_sampling_grid_centered_at_range():
    g = sampling_grid(spec(), 2.0)
    pos = g.positions
    assert np.all(pos[:, 1] == 2.0)
    assert pos[:, 0].mean() == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(np.diff(np.unique(pos[:, 0])), g.delta_x)


def test_resolution_spec_validation():
    with pytest.raises(SynthError):
        ResolutionSpec(-0.1, 0.1, 0.1, 0.1, 1e-2, 0.5, 0.5)
    with pytest.raises(SynthError):
        ResolutionSpec(0.0, 0.0, 0.1, 0.1, 1e-2, 0.5, 0.5)
    with pytest.raises(SynthError):
        ResolutionSpec(0.1, 0.1, 0.1, 0.1, 1e-2, 0.0, 0.0)


# -- reference pattern ------------------------------------------------------------

@pytest.fixture(scope="module")
def small_problem():
    freqs = FrequencyGrid(30e9, 35e9, 11)
    topo = uniform_linear(2, 0.3, 12, 0.02)
    res = ResolutionSpec.from_geometry(topo, 1.0, freqs, 0.2, 0.0)
    grid = sampling_grid(res, 1.0)
    return freqs, topo, grid


def test_single_pixel_reference_is_psf_peak():
    freqs = FrequencyGrid(30e9, 31e9, 3)
    topo = uniform_linear(1, 0.1, 4, 0.02)
    res = ResolutionSpec(0.1, 0.1, 0, 0, freqs.lambda_center, 0.0001, 0.0)
    grid = sampling_grid(res, 1.0)
    assert grid.M == 1
    pat = reference_pattern(topo, "uniform", grid, freqs)
    fld = forward_scatter(Scene.points(grid.positions), pat.referenced, freqs)
    assert pat.E_ref[0] == bp_image(fld, pat.referenced, grid.image_grid).values[0]
    # on-pixel: every pair adds coherently with unit compensated amplitude
    assert pat.E_ref[0] == pytest.approx(3 * np.sum(pat.w_ref), rel=1e-12)


def test_reference_is_linear_in_reflectivity(small_problem):
    freqs, topo, grid = small_problem
    a = reference_pattern(topo, "hamming", grid, freqs).E_ref
    b = reference_pattern(topo, "hamming", grid, freqs, reflectivity=2.0).E_ref
    np.testing.assert_allclose(b, 2 * a, rtol=1e-13)


def test_hamming_lowers_edge_response(linear_setup):
    freqs, topo, R0 = linear_setup
    res = ResolutionSpec.from_geometry(topo, R0, freqs, 0.6, 0.0)
    grid = sampling_grid(res, R0).image_grid
    center = Scene.points([[0.0, R0, 0.0]])
    edge = {}
    for name in ("uniform", "hamming"):
        weighted = topo.with_weights(rx=apodize(topo.rx_positions, name, 1))
        img = np.abs(bp_image(forward_scatter(center, weighted, freqs), weighted, grid).values)
        edge[name] = img[[0, -1]].max() / img.max()
    assert edge["hamming"] < edge["uniform"]


def test_apodize_leaves_short_axes_alone():
    pos = line(2, 0.5)
    np.testing.assert_array_equal(apodize(pos, "hamming", 2), [1, 1])
    w = apodize(line(5, 0.1), "hamming", 2)
    np.testing.assert_allclose(w, [0.08, 0.54, 1.0, 0.54, 0.08])


# -- solver -------------------------------------------------------------------------

def planted(seed, m=8, n=12, k=2):
    rng = np.random.default_rng(seed)
    B = (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))) / np.sqrt(2 * m)
    w0 = np.zeros(n, complex)
    supp = np.sort(rng.choice(n, size=k, replace=False))
    w0[supp] = (1 + rng.uniform(0, 1, k)) * np.exp(2j * np.pi * rng.uniform(size=k))
    return B, B @ w0, w0, supp


def oracle(B, E, eps, max_k=2):
    """Minimum-l1 least-squares fit over all supports of size <= max_k."""
    best = None
    for k in range(1, max_k + 1):
        for supp in itertools.combinations(range(B.shape[1]), k):
            cols = B[:, supp]
            x, *_ = np.linalg.lstsq(cols, E, rcond=None)
            r = E - cols @ x
            if np.vdot(r, r).real <= eps:
                l1 = np.abs(x).sum()
                if best is None or l1 < best[0]:
                    best = (l1, np.array(supp))
    return best


@pytest.mark.parametrize("seed", range(20))
def test_planted_two_sparse_matches_oracle(seed):
    B, E, w0, supp = planted(seed)
    cfg = SynthesisConfig(relative_epsilon=1e-8, reweight_iterations=1)
    res = solve_l1(B, E, cfg)
    assert res.converged
    assert res.residual <= res.epsilon
    o_l1, o_supp = oracle(B, E, res.epsilon)
    np.testing.assert_array_equal(o_supp, supp)
    np.testing.assert_array_equal(res.selected, supp)
    assert np.linalg.norm(res.w - w0) / np.linalg.norm(w0) < 1e-3
    assert res.l1_norm == pytest.approx(o_l1, rel=1e-3)


@pytest.mark.parametrize("seed", range(20))
def test_reweighting_never_grows_support(seed):
    B, E, _, _ = planted(seed)
    cfg = SynthesisConfig(relative_epsilon=1e-8)
    plain = solve_l1(B, E, cfg)
    rw = reweighted_l1(B, E, cfg)
    assert [h["residual"] <= rw.epsilon for h in rw.reweight_history] == [True] * 3
    assert rw.support().size <= plain.support().size


def test_identity_sensing():
    E = np.zeros(5, complex)
    E[0] = 1
    res = solve_l1(np.eye(5), E, SynthesisConfig(epsilon=1e-10))
    assert res.l1_norm == pytest.approx(1.0, abs=1e-4)
    assert abs(res.w[0] - 1) < 1e-4
    assert np.count_nonzero(res.w[1:]) == 0


def test_large_epsilon_gives_zero():
    B, E, _, _ = planted(0)
    res = solve_l1(B, E, SynthesisConfig(relative_epsilon=1.0))
    assert res.l1_norm == 0 and not np.any(res.w)


def test_infeasible_bound():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(10, 3)) + 0j
    E = rng.normal(size=10) + 0j
    with pytest.raises(Infeasible):
        solve_l1(B, E, SynthesisConfig(relative_epsilon=1e-6))


def test_single_reweight_equals_plain():
    B, E, _, _ = planted(3)
    cfg = SynthesisConfig(relative_epsilon=1e-2, reweight_iterations=1)
    np.testing.assert_array_equal(reweighted_l1(B, E, cfg).w, solve_l1(B, E, cfg).w)


def test_huge_delta_keeps_second_iterate():
    B, E, _, _ = planted(4)
    cfg = SynthesisConfig(relative_epsilon=1e-2, reweight_iterations=1)
    first = solve_l1(B, E, cfg)
    cfg2 = SynthesisConfig(relative_epsilon=1e-2, reweight_iterations=2,
                           reweight_delta=1e6 * np.abs(first.w).max())
    second = reweighted_l1(B, E, cfg2)
    assert np.linalg.norm(second.w - first.w) <= 1e-6 * np.linalg.norm(first.w)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-np.pi, np.pi))
def test_scaling_covariance(seed, mag, phase):
    B, E, _, _ = planted(seed)
    a = mag * np.exp(1j * phase)
    base = solve_l1(B, E, SynthesisConfig(relative_epsilon=1e-2))
    scaled = solve_l1(B, a * E, SynthesisConfig(relative_epsilon=1e-2))
    assert scaled.epsilon == pytest.approx(abs(a) ** 2 * base.epsilon, rel=1e-12)
    assert np.linalg.norm(scaled.w - a * base.w) <= 1e-5 * np.linalg.norm(a * base.w)
    np.testing.assert_array_equal(scaled.selected, base.selected)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.5))
def test_converged_runs_are_feasible(seed, rel):
    B, E, _, _ = planted(seed, m=10, n=16, k=4)
    res = reweighted_l1(B, E, SynthesisConfig(relative_epsilon=rel))
    if res.converged:
        assert res.residual <= res.epsilon * (1 + 1e-6)
        assert res.residual >= res.epsilon * (1 - 1e-4) or res.l1_norm == 0


# -- selection ------------------------------------------------------------------------

def test_threshold_selection():
    idx = select_indices(np.array([1, 0.5, 1e-9]), SynthesisConfig(threshold=0.01))
    np.testing.assert_array_equal(idx, [0, 1])


def test_top_n_tie_goes_to_lower_index():
    np.testing.assert_array_equal(
        select_indices(np.array([0.3, 0.3]), SynthesisConfig(top_n=1)), [0])


def test_empty_selection():
    with pytest.raises(EmptySelection):
        select_indices(np.zeros(4), SynthesisConfig())


def test_select_elements_carries_weights():
    B, E, w0, supp = planted(7)
    res = solve_l1(B, E, SynthesisConfig(relative_epsilon=1e-8, reweight_iterations=1))
    base = ArrayTopology([[0, 0, 0]], line(12, 0.01))
    topo = select_elements(res, SynthesisConfig(), base)
    np.testing.assert_array_equal(topo.rx_positions, base.rx_positions[supp])
    np.testing.assert_array_equal(topo.rx_weights, res.w[supp])
    uni = select_elements(res, SynthesisConfig(uniform_weights=True), base)
    np.testing.assert_array_equal(uni.rx_weights, [1, 1])


# -- subset residuals and sequential synthesis ----------------------------------------

def test_subset_residual_full_and_empty(small_problem):
    freqs, topo, grid = small_problem
    pat = reference_pattern(topo, "uniform", grid, freqs)
    res = reweighted_l1(pat.sensing_matrix(), pat, SynthesisConfig())
    full = lemma1_check(res, pat, range(grid.M))
    assert full == res.residual
    assert lemma1_check(res, pat, []) == 0.0
    with pytest.raises(SubsetOutOfRange):
        lemma1_check(res, pat, [grid.M])


def test_sequential_rx_then_tx(small_problem):
    freqs, _, _ = small_problem
    full = ArrayTopology(line(9, 0.02), line(9, 0.02, center=(0.01, 0.0)))
    res = ResolutionSpec.from_geometry(full, 1.0, freqs, 0.2, 0.0)
    rspec = ReferenceSpec(freqs, sampling_grid(res, 1.0), "uniform")
    cfg = SynthesisConfig(top_n=5)
    topo, diag = synthesize_sequential(full, rspec, {"rx": cfg, "tx": cfg})
    assert (topo.n_tx, topo.n_rx) == (5, 5)
    assert [d.side for d in diag] == ["rx", "tx"]
    assert all(d.residual <= d.epsilon for d in diag)
    # tx candidates are imaged against the synthesized rx
    np.testing.assert_array_equal(diag[1].pattern.referenced.rx_positions, topo.rx_positions)


def test_sequential_single_side_leaves_other_side(small_problem):
    freqs, topo, grid = small_problem
    rspec = ReferenceSpec(freqs, grid, "uniform")
    out, diag = synthesize_sequential(topo, rspec, {"rx": SynthesisConfig(top_n=6)})
    assert len(diag) == 1 and out.n_rx == 6
    np.testing.assert_array_equal(out.tx_positions, topo.tx_positions)
    with pytest.raises(ValueError):
        synthesize_sequential(topo, rspec, {"rx": SynthesisConfig()}, rounds=0)
