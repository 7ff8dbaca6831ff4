import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linedefect.cone import ConeParams, project_many
from linedefect.energy import (
    OFF,
    EnergyTrace,
    PotentialSpec,
    discrete_energy,
    discrete_energy_reference,
    euler_lagrange_residual,
    prolong,
    relax,
    relax_multilevel,
    restrict_injection,
)
from linedefect.grid import Grid, LineField, constant_field, sample_field
from linedefect.presets import boundary_start, constant_source, sample_oracle

from oracles import cube_energy_integral, oracle_values

K4 = ConeParams(4.0)
P = np.array([math.sqrt(3) / 2, 0.3, 0.4, 0.0])


def random_field(n, seed, kappa=4.0):
    rng = np.random.default_rng(seed)
    p = ConeParams(kappa)
    return LineField(Grid.cube(n), project_many(rng.normal(size=(n, n, n, 4)), p), p)


def test_constant_field_zero_energy():
    assert discrete_energy(constant_field(Grid.cube(9), K4, P)) == 0.0


def test_opposite_director_neighbors_cost_nothing():
    v = np.broadcast_to(P, (9, 9, 9, 4)).copy()
    v[4, 4, 4, 1:] *= -1
    v[2, 5, 1, 1:] *= -1
    assert discrete_energy(LineField(Grid.cube(9), v, K4)) == 0.0


def test_kernel_matches_reference(oracle33):
    f = random_field(11, 3)
    assert discrete_energy(f) == pytest.approx(discrete_energy_reference(f), rel=1e-12)
    pot = PotentialSpec(True, 2.0, 0.5)
    assert discrete_energy(oracle33, pot) == pytest.approx(discrete_energy_reference(oracle33, pot), rel=1e-12)


def test_oracle_energy_converges_to_integral():
    # the core of the r^(2 a - 2) density makes the lattice error decay like h^(2 alpha*)
    exact = cube_energy_integral(4.0)
    err = [discrete_energy(sample_oracle(4.0, n)) / exact - 1 for n in (17, 33, 65)]
    assert all(e > 0 for e in err)
    orders = [math.log2(a / b) for a, b in zip(err, err[1:])]
    assert all(0.4 < o < 0.65 for o in orders)


@pytest.mark.xfail(strict=True, reason="lattice core bias is about 30% at h = 1/32 and decays like h^0.5")
def test_oracle_energy_within_5_percent_at_h_1_64():
    exact = cube_energy_integral(4.0)
    assert discrete_energy(sample_oracle(4.0, 129)) == pytest.approx(exact, rel=0.05)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_energy_gauge_invariant(seed):
    f = random_field(9, seed)
    mask = np.random.default_rng(seed + 1).random((9, 9, 9)) < 0.5
    e0, e1 = discrete_energy(f), discrete_energy(f.flip_signs(mask))
    assert abs(e0 - e1) <= 1e-13 * e0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_energy_scales_quadratically(seed, lam):
    f = random_field(9, seed)
    assert discrete_energy(f.scaled(lam)) == pytest.approx(lam * lam * discrete_energy(f), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2.0, 4.0, 9.0]))
def test_relax_monotone_from_random_start(seed, k):
    f = random_field(9, seed, k)
    _, tr = relax(f, OFF, 60, 1e-14)
    assert tr.is_monotone(1e-12)
    assert tr.sweeps == len(tr.energies)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relax_monotone_with_potential(seed):
    f = random_field(9, seed)
    pot = PotentialSpec(True, 5.0, 0.4)
    _, tr = relax(f, pot, 60, 1e-14)
    assert tr.is_monotone(1e-12)


def test_zero_coefficient_potential_is_bitwise_off():
    f = random_field(9, 7)
    a, ta = relax(f, OFF, 40, 1e-14)
    b, tb = relax(f, PotentialSpec(True, 0.0), 40, 1e-14)
    assert np.array_equal(a.values, b.values)
    assert ta.energies == tb.energies


def test_constant_boundary_converges_to_constant():
    f = sample_field(constant_source(K4), Grid.cube(9), K4, vectorized=True)
    out, tr = relax(boundary_start(f), OFF, 5000, 1e-14)
    assert tr.final <= 1e-12 * tr.initial
    assert np.max(np.abs(out.values - f.values[0, 0, 0])) < 1e-6


def test_constant_start_stops_immediately():
    f = sample_field(constant_source(K4), Grid.cube(9), K4, vectorized=True)
    out, tr = relax(f, OFF, 100, 1e-10)
    assert tr.sweeps == 0 and tr.final == 0.0 and tr.converged
    assert tr.rows() == [[0, 0.0]]


def test_ray_boundary_gives_linear_profile():
    # a single ray of the cone is flat, so the discrete harmonic extension is linear
    g = Grid.cube(9, 0.0, 1.0)
    f = sample_field(lambda X: X[..., :1] * P, g, K4, vectorized=True)
    out, _ = relax(boundary_start(f), OFF, 20000, 1e-15, xtol=1e-13)
    assert np.max(np.abs(out.values - f.values)) < 1e-8


def test_relaxed_cylinder_matches_oracle_off_axis(relaxed_cyl65):
    # the discrete minimizer does not keep the axis at the apex; off the core it tracks the oracle
    f, tr, _ = relaxed_cyl65
    pts = f.grid.points()
    ref = oracle_values(4.0, 1.0, pts)
    err = np.linalg.norm(f.values - ref, axis=-1)
    flip = np.linalg.norm(f.values - ref * np.array([1, -1, -1, -1]), axis=-1)
    err = np.minimum(err, flip)
    r = np.hypot(pts[..., 0], pts[..., 1])
    assert np.max(err[r >= 8 * f.h]) < 5 * f.h
    assert tr.converged and tr.is_monotone()


def test_euler_lagrange_residual_drops(relaxed_cyl65):
    f, _, _ = relaxed_cyl65
    start = boundary_start(sample_oracle(4.0, 65))
    assert euler_lagrange_residual(f) < 1e-3 * euler_lagrange_residual(start)


def test_injection_and_prolongation_stay_on_cone(oracle33):
    c = restrict_injection(oracle33)
    assert c.n == 17 and np.array_equal(c.values, oracle33.values[::2, ::2, ::2])
    up = prolong(c, oracle33.grid)
    lf = LineField(oracle33.grid, up, K4)
    assert lf.cone_residual() < 1e-12
    assert np.allclose(up[::2, ::2, ::2], c.values, rtol=0, atol=1e-14)


def test_multilevel_levels_and_boundary(oracle33):
    start = boundary_start(oracle33)
    out, tr, levels = relax_multilevel(start, OFF, 5000, 1e-9)
    assert [n for n, _ in levels] == [9, 17, 33]
    assert np.array_equal(out.values[out.boundary_mask], oracle33.values[oracle33.boundary_mask])
    assert all(t.is_monotone() for _, t in levels)


def test_trace_monotonicity_helper():
    assert EnergyTrace([3.0, 2.0, 2.0], 4.0).is_monotone()
    assert not EnergyTrace([3.0, 3.1], 4.0).is_monotone()


def test_potential_validation():
    with pytest.raises(ValueError):
        PotentialSpec(True, -1.0)
    with pytest.raises(ValueError):
        PotentialSpec(True, 1.0, 1.5)
    assert PotentialSpec(True, 1.0, 0.5).bound_M == pytest.approx(3.0)
    assert OFF.lam(K4) == 0.0
