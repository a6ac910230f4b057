import importlib

import numpy as np
import pytest

from geomaxwell import FieldState, Kerr, LinearSusceptibility, Vacuum, step
from geomaxwell import _kernels_py, kernels
from geomaxwell.dynamics import EvolutionConfig
from geomaxwell.errors import LeakageError
from geomaxwell.media import FOUR_PI
from geomaxwell.vlasov import (PhaseSpaceGrid, PlasmaState, arakawa, canonical_brackets,
                               charge_density, charge_functional, coupled_step, current_density,
                               gauss_consistent_state, gauss_monitor, maxwellian, total_energy,
                               two_stream, vlasov_rhs, weibel)


def small_grid(**kw):
    return PhaseSpaceGrid(16, 4 * np.pi, 16, 0.8, **kw)


def plasma(grid, medium=Kerr(0.0, 5.0), amp=0.05):
    f = two_stream(grid, 1 / FOUR_PI, 0.2, 0.07, eps=1e-2)
    return gauss_consistent_state(grid, medium, f, e_transverse=amp * np.cos(0.5 * grid.x))


def random_kernel_inputs(grid, rng):
    f = rng.random(grid.shape)
    ex, ey, bz = rng.normal(size=(3, grid.n_x))
    return f, ex, ey, bz


def test_compiled_kernels_match_reference():
    compiled = pytest.importorskip("geomaxwell._kernels")
    g = small_grid()
    rng = np.random.default_rng(0)
    f, ex, ey, bz = random_kernel_inputs(g, rng)
    args = (g._cwx, g._ara, ex, ey, bz, -1.0, 1 / g.h, 0.5 / g.du)
    np.testing.assert_allclose(compiled.vlasov_rhs(f, *args), _kernels_py.vlasov_rhs(f, *args),
                               rtol=1e-12, atol=1e-12)
    for a, b in zip(compiled.moments(f, g._cwx, g._cwy), _kernels_py.moments(f, g._cwx, g._cwy)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13 * np.abs(b).max())


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("SIM_PURE_PYTHON", "1")
    try:
        mod = importlib.reload(kernels)
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("SIM_PURE_PYTHON")
        importlib.reload(kernels)


def test_arakawa_conserves_mean_energy_and_enstrophy():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 12, 10))
    J = arakawa(a, b, 0.3)
    assert abs(J.sum()) < 1e-12
    assert abs(np.sum(a * J)) < 1e-12
    assert abs(np.sum(b * J)) < 1e-12
    np.testing.assert_allclose(arakawa(b, a, 0.3), -J, atol=1e-12)


def test_arakawa_is_second_order():
    errs = []
    for n in (32, 64):
        d = 2 * np.pi / n
        x = np.arange(n) * d
        X, Y = np.meshgrid(x, x, indexing="ij")
        J = arakawa(np.sin(X) * np.cos(Y), np.cos(2 * X + Y), d)
        exact = (np.cos(X) * np.cos(Y) * -np.sin(2 * X + Y)
                 - (-np.sin(X) * np.sin(Y)) * -2 * np.sin(2 * X + Y))
        errs.append(np.max(np.abs(J - exact)))
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_rhs_conserves_mass_and_kinetic_moments():
    g = small_grid()
    rng = np.random.default_rng(2)
    f, ex, ey, bz = random_kernel_inputs(g, rng)
    r = vlasov_rhs(g, f, np.array([ex, ey]), bz)
    assert abs(r.sum()) < 1e-10 * np.abs(r).sum()
    # the magnetic force does no work: dK/dt from B alone vanishes
    rb = vlasov_rhs(g, f, np.zeros((2, g.n_x)), bz) - vlasov_rhs(g, f, np.zeros((2, g.n_x)), 0 * bz)
    assert abs(np.sum(g.K[None] * rb)) < 1e-10 * np.sum(g.K[None] * np.abs(rb))


def test_moments_of_uniform_maxwellian():
    g = PhaseSpaceGrid(8, 1.0, 48, 1.0)
    f = maxwellian(g, 2.0, drift=(0.0, 0.0), sigma=(0.1, 0.1))
    np.testing.assert_allclose(charge_density(g, f), FOUR_PI * -1.0 * 2.0 * g.h, rtol=1e-10)
    jx, jy = current_density(g, f)
    assert np.max(np.abs(jx)) < 1e-12 and np.max(np.abs(jy)) < 1e-12
    drifting = maxwellian(g, 2.0, drift=(0.3, 0.0), sigma=(0.1, 0.1))
    assert np.all(current_density(g, drifting)[0] < 0)  # electrons moving in +x


def test_initial_data_shapes_and_mass():
    g = PhaseSpaceGrid(16, 2.0, 40, 1.0)
    for f in (two_stream(g, 0.5, 0.3, 0.08, eps=0.1), weibel(g, 0.5, 0.1, 0.2, eps=0.1)):
        assert f.shape == g.shape and np.all(f >= 0)
        assert g.mass(f) == pytest.approx(0.5 * 2.0, rel=1e-6)


def test_grid_validation_and_initial_checks():
    with pytest.raises(ValueError):
        PhaseSpaceGrid(1, 1.0, 8, 1.0)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(8, -1.0, 8, 1.0)
    g = small_grid()
    with pytest.raises(ValueError):
        g.check_initial(-np.ones(g.shape))
    with pytest.warns(UserWarning):
        g.check_initial(np.ones(g.shape))


def test_gauss_consistent_state():
    g = small_grid()
    st = plasma(g)
    assert gauss_monitor(g, st) < 1e-13
    f = two_stream(g, 1 / FOUR_PI, 0.2, 0.07)
    with pytest.raises(ValueError):
        gauss_consistent_state(g, Vacuum(), f, neutralize=False)


def test_charge_and_gauss_conserved_by_coupled_steps():
    g = PhaseSpaceGrid(16, 4 * np.pi, 32, 0.8)
    med = Kerr(0.0, 5.0)
    st = plasma(g, med)
    etas = [np.ones(g.n_x), np.sin(0.5 * g.x), np.cos(g.x) + 0.3]
    C0 = [charge_functional(g, st.f, st.fields.d, eta) for eta in etas]
    H0 = total_energy(g, med, st)
    cfg = EvolutionConfig(dt=0.05)
    for _ in range(20):
        st = coupled_step(g, med, st, cfg)
    for eta, c0 in zip(etas, C0):
        assert abs(charge_functional(g, st.f, st.fields.d, eta) - c0) <= 1e-12
    assert gauss_monitor(g, st) <= 1e-12
    assert abs(total_energy(g, med, st) - H0) / H0 < 1e-6


def test_empty_plasma_reproduces_maxwell_bitwise():
    g = small_grid()
    med = Kerr(0.1, 2.0)
    mesh = g.field_mesh
    e = np.zeros(mesh.n_cells(1))
    e[g.n_x:2 * g.n_x] = 0.3 * np.cos(0.5 * g.x)
    fs = FieldState.from_eb(mesh, med, e, np.zeros(mesh.n_cells(2)))
    ps = PlasmaState(fs.copy(), np.zeros(g.shape), np.zeros(g.n_x))
    cfg = EvolutionConfig(dt=0.05)
    for _ in range(10):
        fs = step(mesh, med, fs, cfg)
        ps = coupled_step(g, med, ps, cfg)
        np.testing.assert_array_equal(ps.fields.d.values, fs.d.values)
        np.testing.assert_array_equal(ps.fields.b.values, fs.b.values)
    assert not np.any(ps.f)


def test_leakage_aborts():
    g = small_grid()
    f = np.zeros(g.shape)
    f[:, 0, g.n_u // 2] = 1.0  # all mass on the velocity boundary
    ps = PlasmaState(FieldState.from_eb(g.field_mesh, LinearSusceptibility(0, 0),
                                        np.zeros(g.field_mesh.n_cells(1)),
                                        np.zeros(g.field_mesh.n_cells(2))),
                     f, np.zeros(g.n_x))
    with pytest.raises(LeakageError):
        coupled_step(g, LinearSusceptibility(0, 0), ps, EvolutionConfig(dt=0.01))
    coupled_step(g, LinearSusceptibility(0, 0), ps, EvolutionConfig(dt=0.01), check_leakage=False)


def test_canonical_brackets_antisymmetric():
    g = small_grid()
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2,) + g.shape)
    w = rng.random(g.shape)
    bz = rng.normal(size=g.n_x)
    ab, ba = canonical_brackets(g, a, b, w, bz), canonical_brackets(g, b, a, w, bz)
    np.testing.assert_allclose(ab, [-x for x in ba], atol=1e-12)
    np.testing.assert_allclose(canonical_brackets(g, a, a, w, bz), [0.0, 0.0], atol=1e-12)
