import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from straintail.kernel import squared_exponential
from straintail.sampler import PathSample, sample_path
from straintail.solver import (CONSTANT, INTERIOR_MAX, AssumptionError, ForcingProfile, ProblemSpec,
                               antiderivative_F, constant_forcing, cosine_bump, gaussian_bump,
                               max_abs_strain, solve_fd_oracle, strain_closed_form, uniform_grid,
                               validate_forcing)

SE = squared_exponential(0.2)


def _path(grid, values):
    return PathSample(np.asarray(grid, float), np.asarray(values, float), 0)


def _sine(L):
    k = math.pi / L
    return ForcingProfile(
        p=lambda x: np.sin(k * np.asarray(x, float)),
        dp=lambda x: k * np.cos(k * np.asarray(x, float)),
        d2p=lambda x: -k * k * np.sin(k * np.asarray(x, float)),
        case=INTERIOR_MAX,
        x_stars=(L / 2,),
    )


def test_antiderivative_exact_and_by_quadrature():
    assert antiderivative_F(constant_forcing(2.5), 0.8) == pytest.approx(2.0, rel=1e-15)
    L = 1.7
    assert antiderivative_F(_sine(L), L) == pytest.approx(2 * L / math.pi, rel=1e-12)
    assert antiderivative_F(_sine(L), 0.0) == 0.0
    g = gaussian_bump(0.3, 1.2, 0.4, 0.1)
    xs = np.array([0.0, 0.3, 1.0])
    from scipy.integrate import quad
    ref = [quad(lambda t: float(g.p(np.asarray(t))), 0, x, epsabs=1e-14)[0] for x in xs]
    np.testing.assert_allclose(antiderivative_F(g, xs), ref, rtol=1e-12, atol=1e-14)


def test_zero_sigma_constant_force():
    spec = ProblemSpec(1.0, 0.0, SE, constant_forcing(2.0))
    grid = uniform_grid(1.0, 64)
    x, vp = strain_closed_form(spec, _path(grid, np.random.default_rng(0).normal(size=grid.size)))
    np.testing.assert_allclose(vp, 2.0 * (x - 0.5), atol=1e-14)
    assert max_abs_strain(spec, _path(grid, np.zeros(grid.size))) == (pytest.approx(1.0, abs=1e-14), 0.0)


def test_zero_sigma_general_force_is_centred_antiderivative():
    L = 2.0
    spec = ProblemSpec(L, 0.0, SE, cosine_bump(0.5, 1.0, 0.7, L))
    grid = uniform_grid(L, 4000)
    x, vp = strain_closed_form(spec, _path(grid, np.zeros(grid.size)))
    F = antiderivative_F(spec.forcing, x)
    from scipy.integrate import quad
    mean = quad(lambda t: float(antiderivative_F(spec.forcing, t)), 0, L, epsabs=1e-13)[0] / L
    np.testing.assert_allclose(vp, F - mean, atol=1e-6)


def test_constant_path_scales_the_zero_sigma_strain():
    grid = uniform_grid(1.0, 100)
    spec0 = ProblemSpec(1.0, 0.0, SE, gaussian_bump(1.0, 1.0, 0.5, 0.2))
    spec = ProblemSpec(1.0, 0.7, SE, spec0.forcing)
    _, v0 = strain_closed_form(spec0, _path(grid, np.zeros(grid.size)))
    _, v1 = strain_closed_form(spec, _path(grid, np.full(grid.size, 1.3)))
    np.testing.assert_allclose(v1, math.exp(0.7 * 1.3) * v0, rtol=1e-13, atol=1e-15)


def test_fd_oracle_exact_for_quadratic_solution():
    spec = ProblemSpec(1.0, 0.0, SE, constant_forcing(3.0))
    grid = uniform_grid(1.0, 1024)
    x, v, vp = solve_fd_oracle(spec, _path(grid, np.zeros(grid.size)))
    np.testing.assert_allclose(v, 3.0 * x * (x - 1.0) / 2, atol=1e-10)
    np.testing.assert_allclose(vp, 3.0 * (x - 0.5), atol=1e-10)


def test_fd_boundary_values_and_second_order_agreement():
    spec = ProblemSpec(1.0, 0.5, SE, gaussian_bump(1.0, 2.0, 0.4, 0.15))
    fine = uniform_grid(1.0, 1024)
    path = sample_path(SE, fine, 11)
    errs = []
    for stride in (4, 2, 1):
        g = fine[::stride]
        p = _path(g, path.values[::stride])
        x, v, vp_fd = solve_fd_oracle(spec, p)
        assert v[0] == 0.0 and v[-1] == 0.0
        _, vp = strain_closed_form(spec, p)
        errs.append(np.max(np.abs(vp - vp_fd)))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_spike_location_offset():
    # a tall bump of the conditional-mean shape puts the strain peak about one gamma away from its centre
    sigma, u, x0 = 1.0, 40.0, 0.5
    spec = ProblemSpec(1.0, sigma, SE, constant_forcing(1.0))
    grid = uniform_grid(1.0, 2048)
    xi = u * SE(grid - x0)
    _, loc = max_abs_strain(spec, _path(grid, xi))
    gamma = 1.0 / math.sqrt(u * SE.delta * sigma)
    h = grid[1] - grid[0]
    assert min(abs(loc - (x0 - gamma)), abs(loc - (x0 + gamma))) <= 3 * h


def test_refinement_does_not_lose_the_maximum():
    spec = ProblemSpec(1.0, 0.5, SE, constant_forcing(1.0))
    fine = uniform_grid(1.0, 1024)
    path = sample_path(SE, fine, 5)
    coarse = _path(fine[::2], path.values[::2])
    v_c, _ = max_abs_strain(spec, coarse)
    v_f, _ = max_abs_strain(spec, path)
    assert v_f >= v_c - 10.0 / 512**2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 1.5))
def test_weighted_average_bound(seed, sigma):
    forcing = gaussian_bump(0.2, 1.0, 0.3, 0.2)
    spec = ProblemSpec(1.0, sigma, SE, forcing)
    grid = uniform_grid(1.0, 128)
    path = sample_path(SE, grid, seed)
    x, vp = strain_closed_form(spec, path)
    F = antiderivative_F(forcing, x)
    osc = F.max() - F.min()
    assert np.all(np.abs(vp) <= np.exp(sigma * path.values) * osc * (1 + 1e-12))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sign_flip_of_force(seed):
    grid = uniform_grid(1.0, 128)
    path = sample_path(SE, grid, seed)
    a = ProblemSpec(1.0, 0.5, SE, gaussian_bump(0.5, 1.0, 0.5, 0.2))
    b = ProblemSpec(1.0, 0.5, SE, gaussian_bump(-0.5, -1.0, 0.5, 0.2))
    _, va = strain_closed_form(a, path)
    _, vb = strain_closed_form(b, path)
    np.testing.assert_allclose(va, -vb, rtol=1e-13, atol=1e-14)
    assert max_abs_strain(a, path) == pytest.approx(max_abs_strain(b, path), rel=1e-13)


def test_large_shift_of_the_path_only_rescales():
    spec = ProblemSpec(1.0, 1.0, SE, constant_forcing(1.0))
    grid = uniform_grid(1.0, 64)
    xi = np.random.default_rng(2).normal(size=grid.size)
    v0, l0 = max_abs_strain(spec, _path(grid, xi))
    v1, l1 = max_abs_strain(spec, _path(grid, xi + 600.0))
    assert l0 == l1
    assert math.log(v1) == pytest.approx(math.log(v0) + 600.0, rel=1e-13)


def test_forcing_validation():
    validate_forcing(ProblemSpec(1.0, 0.5, SE, gaussian_bump(1.0, 1.0, 0.5, 0.2)))
    validate_forcing(ProblemSpec(1.0, 0.5, SE, constant_forcing(-2.0)))
    with pytest.raises(AssumptionError):
        # a dip, not a peak, of |p|
        validate_forcing(ProblemSpec(1.0, 0.5, SE, gaussian_bump(3.0, -1.0, 0.5, 0.2)))
    with pytest.raises(AssumptionError):
        constant_forcing(0.0)
    with pytest.raises(ValueError):
        ProblemSpec(0.0, 0.5, SE, constant_forcing(1.0))
    with pytest.raises(ValueError):
        ProblemSpec(1.0, -0.1, SE, constant_forcing(1.0))


def test_grid_must_span_domain():
    spec = ProblemSpec(2.0, 0.5, SE, constant_forcing(1.0))
    g = uniform_grid(1.0, 10)
    with pytest.raises(ValueError):
        strain_closed_form(spec, _path(g, np.zeros(g.size)))
