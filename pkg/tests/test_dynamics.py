import numpy as np
import pytest

from geomaxwell import (EvolutionConfig, FieldState, Kerr, LinearSusceptibility, NonlocalDispersive,
                        Vacuum, build_mesh, casimir_monitors, maxwell_rhs, poisson_bracket, step)
from geomaxwell.dec import Cochain
from geomaxwell.dynamics import energy, evolve
from geomaxwell.errors import NonConvergence

import oracles


def line_mesh(n=64, L=1.0):
    return build_mesh(1, [n], [L]).lift_to_3d()


def transverse_mode(mesh, k, amp=1.0):
    e = np.zeros(mesh.n_cells(1))
    x = mesh.cell_centers(1, (1,))[0]
    e[mesh.block_slice(1, (1,))] = amp * np.cos(k * x) * mesh.lengths[1]
    return e


def random_grad(mesh, rng, integer=False):
    n1, n2 = mesh.n_cells(1), mesh.n_cells(2)
    draw = (lambda n: rng.integers(-50, 50, n).astype(float)) if integer else (lambda n: rng.normal(size=n))
    return Cochain(1, "straight", draw(n1)), Cochain(1, "twisted", draw(n2))


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=-1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.1, integrator="rk4")
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.1, fixed_point_tol=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.1, monitor_stride=0)


def test_rhs_zero_e_freezes_b():
    mesh = build_mesh(3, [4, 3, 3])
    rng = np.random.default_rng(0)
    b = mesh.incidence[1] @ rng.normal(size=mesh.n_cells(1))
    st = FieldState.from_eb(mesh, Vacuum(), np.zeros(mesh.n_cells(1)), b)
    _, db = maxwell_rhs(mesh, Vacuum(), st)
    assert not np.any(db.values)


def test_rhs_b_is_divergence_free_exactly():
    mesh = build_mesh(3, [4, 5, 3])
    rng = np.random.default_rng(1)
    e = rng.integers(-9, 9, mesh.n_cells(1)).astype(float)
    st = FieldState.from_eb(mesh, Kerr(0.1, 0.2), e, np.zeros(mesh.n_cells(2)))
    _, db = maxwell_rhs(mesh, Kerr(0.1, 0.2), st)
    assert not np.any(mesh.incidence[2] @ db.values)


def test_rhs_matches_analytic_derivative_second_order():
    errs = []
    for n in (32, 64):
        mesh = line_mesh(n)
        k = 2 * np.pi * 2
        st = FieldState.from_eb(mesh, Vacuum(), transverse_mode(mesh, k), np.zeros(mesh.n_cells(2)))
        _, db = maxwell_rhs(mesh, Vacuum(), st)
        h = 1.0 / n
        Bz_rate = db.values[:n] / h
        x_half = (np.arange(n) + 0.5) * h
        errs.append(np.max(np.abs(Bz_rate - k * np.sin(k * x_half))) / k)
    assert errs[1] < 1e-2
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_bracket_antisymmetry():
    mesh = build_mesh(3, [3, 4, 3])
    rng = np.random.default_rng(2)
    for _ in range(100):
        F, G = random_grad(mesh, rng), random_grad(mesh, rng)
        fg, gf = poisson_bracket(mesh, F, G), poisson_bracket(mesh, G, F)
        assert abs(fg + gf) <= 1e-13 * max(1.0, abs(fg))
    F = random_grad(mesh, rng)
    assert abs(poisson_bracket(mesh, F, F)) <= 1e-13


def test_gauss_functionals_are_casimirs():
    mesh = build_mesh(3, [4, 3, 5])
    rng = np.random.default_rng(3)
    zero1 = Cochain(1, "straight", np.zeros(mesh.n_cells(1)))
    zero2 = Cochain(1, "twisted", np.zeros(mesh.n_cells(2)))
    for _ in range(20):
        G = random_grad(mesh, rng, integer=True)
        xi = rng.integers(-50, 50, mesh.n_cells(0)).astype(float)
        eta = rng.integers(-50, 50, mesh.n_cells(3)).astype(float)
        CD = (Cochain(1, "straight", mesh.incidence[0] @ xi), zero2)
        CB = (zero1, Cochain(1, "twisted", mesh.incidence[2].T @ eta))
        assert poisson_bracket(mesh, CD, G) == 0.0
        assert poisson_bracket(mesh, CB, G) == 0.0


def test_bracket_ignores_hodge():
    mesh = build_mesh(3, [3, 3, 4], [1.0, 2.0, 0.5])
    rng = np.random.default_rng(4)
    for _ in range(10):
        F, G = random_grad(mesh, rng), random_grad(mesh, rng)
        scaled = mesh.with_hodge([m * rng.uniform(0.01, 100.0, m.size) for m in mesh.hodge])
        assert poisson_bracket(scaled, F, G) == poisson_bracket(mesh, F, G)


def test_bracket_rejects_wrong_slots():
    mesh = build_mesh(3, [3, 3, 3])
    rng = np.random.default_rng(5)
    F = random_grad(mesh, rng)
    bad = (Cochain(2, "twisted", F[0].values), F[1])
    with pytest.raises(ValueError):
        poisson_bracket(mesh, bad, F)
    with pytest.raises(ValueError):
        poisson_bracket(mesh, F, (F[0], Cochain(1, "straight", F[1].values)))


def test_casimir_monitor_detects_corruption():
    mesh = build_mesh(3, [4, 4, 3])
    rng = np.random.default_rng(6)
    b = mesh.incidence[1] @ rng.normal(size=mesh.n_cells(1))
    st = FieldState.from_eb(mesh, Vacuum(), mesh.incidence[0] @ rng.normal(size=mesh.n_cells(0)) * 0, b)
    div_b, div_d = casimir_monitors(mesh, st)
    assert div_b < 1e-14 and div_d < 1e-14
    st.b = Cochain(2, "straight", b + rng.normal(size=b.size) * 1e-3)
    assert casimir_monitors(mesh, st)[0] > 1e-6


def test_zero_time_step_returns_same_state():
    mesh = line_mesh(16)
    st = FieldState.from_eb(mesh, Kerr(0.1, 0.1), transverse_mode(mesh, 2 * np.pi), np.zeros(mesh.n_cells(2)))
    new = step(mesh, Kerr(0.1, 0.1), st, EvolutionConfig(dt=0.0))
    np.testing.assert_array_equal(new.d.values, st.d.values)
    np.testing.assert_array_equal(new.b.values, st.b.values)


def test_vacuum_mode_is_exact_midpoint_rotation():
    mesh = line_mesh(64)
    k = 2 * np.pi * 2
    h = 1 / 64
    dt = 0.5 * h
    st = FieldState.from_eb(mesh, Vacuum(), transverse_mode(mesh, k), np.zeros(mesh.n_cells(2)))
    _, rows = evolve(mesh, Vacuum(), st, EvolutionConfig(dt=dt, n_steps=1000),
                     probe=lambda s: s.e.values[64])
    H = rows["H"]
    assert np.max(np.abs(H - H[0])) / H[0] <= 1e-10
    # a harmonic oscillator advances by 2 arctan(w dt / 2) per midpoint step
    omega = oracles.discrete_wavenumber(k, h)
    theta = 2 * np.arctan(0.5 * omega * dt)
    expect = np.cos(theta * np.arange(1001))
    np.testing.assert_allclose(rows["probe"], expect, atol=1e-9)


def test_kerr_energy_error_is_second_order():
    mesh = line_mesh(64)
    med = Kerr(0.1, 1.0)
    x = mesh.cell_centers(1, (1,))[0]
    e = np.zeros(mesh.n_cells(1))
    e[mesh.block_slice(1, (1,))] = np.cos(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x)
    b = np.zeros(mesh.n_cells(2))
    dts, errs = [4e-3, 2e-3, 1e-3], []
    for dt in dts:
        _, rows = evolve(mesh, med, FieldState.from_eb(mesh, med, e, b),
                         EvolutionConfig(dt=dt, n_steps=int(round(0.2 / dt))))
        errs.append(np.max(np.abs(rows["H"] - rows["H"][0])) / rows["H"][0])
    assert oracles.fit_order(dts, errs) >= 1.9


@pytest.mark.parametrize("medium,integrator", [
    (Kerr(0.1, 0.5), "implicit_midpoint"),
    (NonlocalDispersive(0.1, 0.02), "implicit_midpoint"),
    (LinearSusceptibility(0.2, 0.1), "lie_splitting"),
], ids=["kerr", "nonlocal", "lie"])
def test_casimirs_constant_in_three_dimensions(medium, integrator):
    mesh = build_mesh(3, [5, 4, 4], [1.0, 1.0, 0.8])
    rng = np.random.default_rng(7)
    e = 0.2 * rng.normal(size=mesh.n_cells(1))
    b = 0.2 * (mesh.incidence[1] @ rng.normal(size=mesh.n_cells(1)))
    st = FieldState.from_eb(mesh, medium, e, b)
    _, rows = evolve(mesh, medium, st, EvolutionConfig(dt=0.02, n_steps=40, integrator=integrator))
    assert rows["div_d"][0] > 1e-3  # non-trivial initial divergence is carried exactly
    assert np.max(np.abs(rows["div_b"] - rows["div_b"][0])) <= 1e-12
    assert np.max(np.abs(rows["div_d"] - rows["div_d"][0])) <= 1e-12


def test_lie_splitting_requires_linear_medium():
    mesh = line_mesh(8)
    st = FieldState.from_eb(mesh, Kerr(0.1, 0.1), transverse_mode(mesh, 2 * np.pi), np.zeros(mesh.n_cells(2)))
    with pytest.raises(ValueError):
        step(mesh, Kerr(0.1, 0.1), st, EvolutionConfig(dt=0.01, integrator="lie_splitting"))


def test_nonconvergence_recommends_smaller_step():
    mesh = line_mesh(16)
    med = Kerr(0.1, 5.0)
    st = FieldState.from_eb(mesh, med, transverse_mode(mesh, 2 * np.pi), np.zeros(mesh.n_cells(2)))
    with pytest.raises(NonConvergence) as err:
        evolve(mesh, med, st, EvolutionConfig(dt=0.05, n_steps=3, fixed_point_max_iter=1))
    assert err.value.payload["recommended_dt"] == 0.025
    assert err.value.payload["step"] == 1


def test_monitor_stride_and_energy_helper():
    mesh = line_mesh(16)
    med = Vacuum()
    st = FieldState.from_eb(mesh, med, transverse_mode(mesh, 2 * np.pi), np.zeros(mesh.n_cells(2)))
    final, rows = evolve(mesh, med, st, EvolutionConfig(dt=0.01, n_steps=10, monitor_stride=4))
    np.testing.assert_allclose(rows["t"], [0.0, 0.04, 0.08, 0.10])
    assert rows["H"][-1] == pytest.approx(energy(mesh, med, final))
