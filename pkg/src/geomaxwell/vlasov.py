"""Reduced 1D2V relativistic Vlasov equation coupled to the Maxwell bracket.

Geometry: f(x, ux, uy) with fields (E_x, E_y, B_z) on the 3D lift of a 1D
periodic mesh.  f sits at x-vertices and velocity-cell centres.  Velocity
stencils wrap periodically, which keeps the discrete moment identities
exact; the truncated velocity boundary is monitored instead.

Discrete velocity ``w = D_u K / (m c)`` (centred differences of the kinetic
energy) drives both x-advection and the current, and the magnetic term uses
the Arakawa Jacobian of ``K / (m c)``.  With these choices the semi-discrete
system conserves total energy and the charge functional exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .dec import STRAIGHT, TWISTED, Cochain, build_mesh, solve_graph_laplacian
from .dynamics import (carry_solver_state, energy, finish_state, implicit_midpoint_update,
                       predict_midpoint)
from .errors import LeakageError, NonConvergence
from .media import FOUR_PI, FieldState, constitutive_DH

LEAK_WARN = 1e-12
LEAK_ABORT = 1e-8


def relativistic_kinetic(m=1.0, c=1.0):
    """K(u) = m c sqrt(1 + u^2)."""
    return lambda ux, uy: m * c * np.sqrt(1.0 + ux * ux + uy * uy)


def _centred(a, axis, du):
    return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2.0 * du)


def arakawa_coefficients(a, d):
    """Neighbour weights of the Arakawa Jacobian J(a, .) on a periodic grid.

    Order: E, W, N, S, NE, NW, SE, SW (E/W along axis 0, N/S along axis 1).
    """
    r = lambda s0, s1: np.roll(np.roll(a, -s0, 0), -s1, 1)
    aE, aW, aN, aS = r(1, 0), r(-1, 0), r(0, 1), r(0, -1)
    aNE, aNW, aSE, aSW = r(1, 1), r(-1, 1), r(1, -1), r(-1, -1)
    coef = np.stack([
        -(aN - aS) - (aNE - aSE),
        (aN - aS) + (aNW - aSW),
        (aE - aW) + (aNE - aNW),
        -(aE - aW) - (aSE - aSW),
        aE - aN,
        aN - aW,
        aS - aE,
        aW - aS,
    ]) / (12.0 * d * d)
    return np.ascontiguousarray(coef)


def arakawa(a, b, d):
    """Arakawa Jacobian da/dx db/dy - da/dy db/dx on a periodic grid."""
    coef = arakawa_coefficients(a, d)
    r = lambda s0, s1: np.roll(np.roll(b, -s0, 0), -s1, 1)
    nb = [r(1, 0), r(-1, 0), r(0, 1), r(0, -1), r(1, 1), r(-1, 1), r(1, -1), r(-1, -1)]
    return sum(c * x for c, x in zip(coef, nb))


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    """Periodic x-axis with a square truncated velocity grid.

    Parameters
    ----------
    n_x, length : int, float
        x cells and periodic length.
    n_u, u_max : int, float
        Velocity cells per axis on [-u_max, u_max].
    q, m, c : float
        Species charge and mass, speed of light.
    kinetic : callable, optional
        K(ux, uy); defaults to m c sqrt(1 + u^2).
    """

    n_x: int
    length: float
    n_u: int
    u_max: float
    q: float = -1.0
    m: float = 1.0
    c: float = 1.0
    kinetic: Optional[Callable] = None
    K: np.ndarray = field(init=False, repr=False)
    wx: np.ndarray = field(init=False, repr=False)
    wy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_x < 2 or self.n_u < 4:
            raise ValueError("need n_x >= 2 and n_u >= 4")
        if not (self.length > 0 and self.u_max > 0 and self.m > 0 and self.c > 0):
            raise ValueError("length, u_max, m and c must be positive")
        kin = self.kinetic or relativistic_kinetic(self.m, self.c)
        ux, uy = np.meshgrid(self.u, self.u, indexing="ij")
        K = np.asarray(kin(ux, uy), float)
        gam = K / (self.m * self.c)
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("K", K)
        set_("wx", np.ascontiguousarray(_centred(gam, 0, self.du)))
        set_("wy", np.ascontiguousarray(_centred(gam, 1, self.du)))
        set_("_ara", arakawa_coefficients(gam, self.du))
        set_("_cwx", np.ascontiguousarray(self.c * self.wx))
        set_("_cwy", np.ascontiguousarray(self.c * self.wy))
        if self.kinetic is None and np.max(np.hypot(self.wx, self.wy)) >= 1.0:
            raise ValueError("discrete characteristic speed reaches c")
        set_("field_mesh", build_mesh(1, [self.n_x], [self.length]).lift_to_3d())

    @property
    def h(self):
        return self.length / self.n_x

    @property
    def du(self):
        return 2.0 * self.u_max / self.n_u

    @property
    def u(self):
        return -self.u_max + (np.arange(self.n_u) + 0.5) * self.du

    @property
    def x(self):
        return np.arange(self.n_x) * self.h

    @property
    def shape(self):
        return (self.n_x, self.n_u, self.n_u)

    @property
    def phase_volume(self):
        """x-cell volume (with unit transverse extent) times velocity cell area."""
        return self.h * self.du * self.du

    def kinetic_energy(self, f):
        return float(self.phase_volume * np.sum(self.K[None] * f))

    def mass(self, f):
        return float(self.phase_volume * np.sum(f))

    def boundary_fraction(self, f):
        """Share of the mass held in the outermost velocity cells."""
        ring = np.zeros((self.n_u, self.n_u), bool)
        ring[[0, -1], :] = True
        ring[:, [0, -1]] = True
        tot = np.sum(np.abs(f))
        return float(np.sum(np.abs(f[:, ring])) / tot) if tot > 0 else 0.0

    def boundary_peak_ratio(self, f):
        ring = np.zeros((self.n_u, self.n_u), bool)
        ring[[0, -1], :] = True
        ring[:, [0, -1]] = True
        peak = np.max(np.abs(f))
        return float(np.max(np.abs(f[:, ring])) / peak) if peak > 0 else 0.0

    def check_initial(self, f):
        if np.any(f < 0):
            raise ValueError("initial distribution must be nonnegative")
        ratio = self.boundary_peak_ratio(f)
        if ratio > LEAK_WARN:
            warnings.warn(f"velocity boundary density is {ratio:.1e} of peak; increase u_max",
                          stacklevel=2)


# ---------------------------------------------------------------------------
# field sampling and moments


def fields_at_vertices(grid, e, b):
    """(E_x, E_y, B_z) at x-vertices from lifted-mesh cochain arrays."""
    n = grid.n_x
    h = grid.h
    ex_edge = e[:n] / h
    ey = e[n:2 * n].copy()
    bz_face = b[:n] / h
    ex = 0.5 * (ex_edge + np.roll(ex_edge, 1))
    bz = 0.5 * (bz_face + np.roll(bz_face, 1))
    return ex, ey, bz


def vlasov_rhs(grid, f, E, B):
    """Time derivative of f for vertex-sampled fields.

    Parameters
    ----------
    E : array (2, n_x)
        (E_x, E_y) at the x-vertices.
    B : array (n_x,)
        B_z at the x-vertices.
    """
    E = np.asarray(E, float)
    return kernels.vlasov_rhs(f, grid._cwx, grid._ara, E[0], E[1], np.asarray(B, float),
                              grid.q / grid.m, 1.0 / grid.h, 0.5 / grid.du)


def charge_density(grid, f):
    """Twisted 3-cochain 4 pi q * (charge in each dual x-cell); one value per vertex."""
    n, _, _ = kernels.moments(f, grid._cwx, grid._cwy)
    return FOUR_PI * grid.q * grid.phase_volume * n


def current_density(grid, f):
    """Proxy current J = 4 pi q sum c w f du^2 as (J_x at edge centres, J_y at vertices)."""
    _, jx, jy = kernels.moments(f, grid._cwx, grid._cwy)
    s = FOUR_PI * grid.q * grid.du * grid.du
    return s * jx, s * jy


def current_cochain(grid, f):
    """Twisted 2-cochain of the current on the lifted mesh (dual-face fluxes)."""
    jx, jy = current_density(grid, f)
    n = grid.n_x
    out = np.zeros(3 * n)
    out[:n] = jx
    out[n:2 * n] = grid.h * jy
    return out


class KineticCoupling:
    """Adapter exposing the kinetic part to the midpoint solver."""

    def __init__(self, grid):
        self.grid = grid

    def rhs(self, f, e, b):
        ex, ey, bz = fields_at_vertices(self.grid, e, b)
        return kernels.vlasov_rhs(f, self.grid._cwx, self.grid._ara, ex, ey, bz,
                                  self.grid.q / self.grid.m, 1.0 / self.grid.h, 0.5 / self.grid.du)

    def current(self, f):
        return current_cochain(self.grid, f)


# ---------------------------------------------------------------------------
# coupled state


@dataclass
class PlasmaState:
    """Field state, distribution function and the static neutralising background."""

    fields: FieldState
    f: np.ndarray
    rho_background: np.ndarray


def charge_functional(grid, f, d, eta):
    """C_D = <d eta, d> + <eta, rho(f)> for a vertex test function ``eta``."""
    mesh = grid.field_mesh
    eta = np.asarray(eta, float)
    dv = d.values if isinstance(d, Cochain) else np.asarray(d, float)
    return float(np.dot(mesh.incidence[0] @ eta, dv) + np.dot(eta, charge_density(grid, f)))


def total_energy(grid, medium, state):
    return energy(grid.field_mesh, medium, state.fields) + grid.kinetic_energy(state.f)


def gauss_monitor(grid, state):
    mesh = grid.field_mesh
    div_d = -(mesh.incidence[0].T @ state.fields.d.values)
    rho = charge_density(grid, state.f) + state.rho_background
    return float(np.linalg.norm(div_d - rho))


def gauss_consistent_state(grid, medium, f, e_transverse=None, b=None, neutralize=True):
    """Build a plasma state whose d satisfies the discrete Gauss law.

    The longitudinal part of d is ``-M1 d0 phi`` with ``d0^T M1 d0 phi`` equal
    to the charge density (made neutral by a uniform static background).

    Parameters
    ----------
    e_transverse : array (n_x,), optional
        E_y at the vertices (added to d through the constitutive map).
    b : array, optional
        Full straight 2-cochain for the magnetic field.
    """
    mesh = grid.field_mesh
    grid.check_initial(f)
    n = grid.n_x
    rho = charge_density(grid, f)
    bg = -np.full(n, rho.mean()) if neutralize else np.zeros(n)
    if not neutralize and abs(rho.sum()) > 1e-12 * (1 + np.abs(rho).sum()):
        raise ValueError("non-neutral charge on a periodic domain needs a background")
    d0 = mesh.incidence[0].astype(float)
    M1 = mesh.hodge[1]
    L = (d0.T @ sp.diags(M1) @ d0)[:n, :n]
    phi = solve_graph_laplacian(L, rho + bg)
    d_long = -M1 * (d0 @ phi)
    bv = np.zeros(mesh.n_cells(2)) if b is None else np.asarray(b, float)
    e = np.zeros(mesh.n_cells(1))
    if e_transverse is not None:
        e[n:2 * n] = e_transverse
    # transverse d from the constitutive map, longitudinal part from Gauss
    dv = constitutive_DH(mesh, medium, e, bv)[0].values.copy()
    dv[:n] = d_long[:n]
    st = FieldState(d=Cochain(2, TWISTED, dv), b=Cochain(2, STRAIGHT, bv))
    st.refresh(mesh, medium, e0=e)
    return PlasmaState(fields=st, f=np.array(f, float), rho_background=bg)


def coupled_step(grid, medium, state, config, check_leakage=True):
    """One implicit-midpoint step of the coupled Vlasov-Maxwell system.

    With ``f == 0`` the field update is bit-for-bit the pure Maxwell step.
    """
    mesh = grid.field_mesh
    fs = state.fields
    fs.refresh(mesh, medium)
    dt, c = config.dt, config.c
    if dt == 0:
        return PlasmaState(fs.copy(), state.f.copy(), state.rho_background)
    e0 = fs.e.values
    try:
        d1, b1, e_m, f1, info = implicit_midpoint_update(
            mesh, medium, fs.d.values, fs.b.values, e0, dt, c,
            config.fixed_point_tol, config.fixed_point_max_iter,
            kinetic=KineticCoupling(grid), f0=state.f,
            carried=fs.info.get("jacobian"), guess=predict_midpoint(fs, dt))
        new = finish_state(mesh, medium, d1, b1, 2.0 * e_m - e0, info["lu_e"])
    except NonConvergence as exc:
        exc.payload.setdefault("recommended_dt", 0.5 * dt)
        raise
    carry_solver_state(new, info, dt)
    if check_leakage:
        frac = grid.boundary_fraction(f1)
        if frac > LEAK_ABORT:
            raise LeakageError(f"velocity boundary holds {frac:.2e} of the mass")
    return PlasmaState(new, f1, state.rho_background)


# ---------------------------------------------------------------------------
# brackets and initial data


def canonical_brackets(grid, g, h, f_weight, bz=None):
    """Weighted particle brackets ``(<f, [g,h]_v>, <f, [g,h]_B>)``.

    [g,h]_v = (1/m)(dg/dx dh/dux - dg/dux dh/dx) and
    [g,h]_B = (q / (m^2 c)) B_z (dg/dux dh/duy - dg/duy dh/dux), with
    centred differences and phase-space quadrature.
    """
    g = np.asarray(g, float)
    h = np.asarray(h, float)
    f = np.asarray(f_weight, float)
    bz = np.ones(grid.n_x) if bz is None else np.asarray(bz, float)
    gx, hx = _centred(g, 0, grid.h), _centred(h, 0, grid.h)
    gu, hu = _centred(g, 1, grid.du), _centred(h, 1, grid.du)
    gv, hv = _centred(g, 2, grid.du), _centred(h, 2, grid.du)
    bv = (gx * hu - gu * hx) / grid.m
    bb = grid.q / (grid.m ** 2 * grid.c) * bz[:, None, None] * (gu * hv - gv * hu)
    w = grid.phase_volume
    return float(w * np.sum(f * bv)), float(w * np.sum(f * bb))


def _gaussian(u, mean, sigma):
    return np.exp(-0.5 * ((u - mean) / sigma) ** 2) / (np.sqrt(2 * np.pi) * sigma)


def maxwellian(grid, n0, drift=(0.0, 0.0), sigma=(0.1, 0.1), eps=0.0, mode=1):
    """Drifting (nonrelativistic-shape) Maxwellian with an optional density ripple."""
    k = 2 * np.pi * mode / grid.length
    nx = n0 * (1.0 + eps * np.cos(k * grid.x))
    gx = _gaussian(grid.u, drift[0], sigma[0])
    gy = _gaussian(grid.u, drift[1], sigma[1])
    return nx[:, None, None] * gx[None, :, None] * gy[None, None, :]


def two_stream(grid, n0, drift, sigma, eps=0.0, mode=1):
    """Two equal counter-drifting beams along ux."""
    k = 2 * np.pi * mode / grid.length
    nx = n0 * (1.0 + eps * np.cos(k * grid.x))
    gx = 0.5 * (_gaussian(grid.u, drift, sigma) + _gaussian(grid.u, -drift, sigma))
    gy = _gaussian(grid.u, 0.0, sigma)
    return nx[:, None, None] * gx[None, :, None] * gy[None, None, :]


def weibel(grid, n0, sigma_x, sigma_y, eps=0.0, mode=1):
    """Temperature-anisotropic Maxwellian."""
    return maxwellian(grid, n0, (0.0, 0.0), (sigma_x, sigma_y), eps, mode)
