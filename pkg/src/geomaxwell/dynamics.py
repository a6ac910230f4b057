"""Hamiltonian evolution of the macroscopic Maxwell system.

Faraday's law is strong, ``db/dt = -c d1 e``; Ampere's law is weak,
``dd/dt = c d1^T h - J`` with ``h`` the twisted (raw-DOF) magnetic field.
The Poisson bracket below touches only incidence matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dec import STRAIGHT, TWISTED, Cochain, divergence_cleaning
from .errors import NonConvergence
from .media import (FOUR_PI, FieldState, _constitutive_raw, _require_3d, hamiltonian_H,
                    hessian_blocks, invert_constitutive)

INTEGRATORS = ("implicit_midpoint", "lie_splitting")


@dataclass
class EvolutionConfig:
    """Time-stepping parameters."""

    dt: float
    n_steps: int = 1
    integrator: str = "implicit_midpoint"
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 100
    monitor_stride: int = 1
    c: float = 1.0

    def __post_init__(self):
        if not self.dt >= 0:
            raise ValueError(f"dt must be non-negative, got {self.dt}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if not self.fixed_point_tol > 0:
            raise ValueError("fixed_point_tol must be positive")
        if self.fixed_point_max_iter < 1 or self.monitor_stride < 1 or self.n_steps < 0:
            raise ValueError("iteration counts must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")


def curl_transpose(mesh):
    return mesh.operator("curl_T", lambda: mesh.incidence[1].T.tocsr())


def maxwell_rhs(mesh, medium, state, c=1.0):
    """Time derivatives ``(dd/dt, db/dt)`` of a field state."""
    _require_3d(mesh)
    state.refresh(mesh, medium)
    C = mesh.incidence[1]
    dd = c * (curl_transpose(mesh) @ state.h.values)
    db = -c * (C @ state.e.values)
    return Cochain(2, TWISTED, dd), Cochain(2, STRAIGHT, db)


def poisson_bracket(mesh, grad_F, grad_G, c=1.0):
    """Field bracket ``4 pi c [<G_b, d F_d> - <F_b, d G_d>]``.

    Each gradient is a pair ``(slot_d, slot_b)`` of raw DOF derivatives:
    ``slot_d`` is a straight 1-cochain (derivative with respect to the
    twisted d), ``slot_b`` a twisted 1-cochain (derivative with respect to
    the straight b).  Only incidence and the combinatorial pairing are used.
    """
    _require_3d(mesh)
    for name, (gd, gb) in (("F", grad_F), ("G", grad_G)):
        if not isinstance(gd, Cochain) or gd.degree != 1 or gd.flavor != STRAIGHT:
            raise ValueError(f"{name}: d-slot must be a straight 1-cochain (raw DOF convention)")
        if not isinstance(gb, Cochain) or gb.degree != 1 or gb.flavor != TWISTED:
            raise ValueError(f"{name}: b-slot must be a twisted 1-cochain (raw DOF convention)")
    C = mesh.incidence[1]
    Fd, Fb = grad_F[0].values, grad_F[1].values
    Gd, Gb = grad_G[0].values, grad_G[1].values
    return float(FOUR_PI * c * (np.dot(C @ Fd, Gb) - np.dot(C @ Gd, Fb)))


def casimir_monitors(mesh, state, rho=None):
    """Gauss-law norms ``(|d2 b|, |d~2 d - rho|)``."""
    _require_3d(mesh)
    div_b = mesh.incidence[2] @ state.b.values
    div_d = -(mesh.incidence[0].T @ state.d.values)
    if rho is not None:
        div_d = div_d - rho
    return float(np.linalg.norm(div_b)), float(np.linalg.norm(div_d))


def energy(mesh, medium, state):
    state.refresh(mesh, medium)
    return hamiltonian_H(mesh, medium, state.e, state.b)


def clean_state(mesh, medium, state):
    """Project b onto the divergence-free subspace and refresh the cache."""
    b = divergence_cleaning(mesh, state.b)
    e = state.e.values if state.e is not None else None
    new = FieldState(d=state.d, b=b)
    return new.refresh(mesh, medium, e0=e)


def _midpoint_jacobian(mesh, medium, e, b, dt, c):
    M1 = sp.diags(mesh.hodge[1])
    M2 = sp.diags(mesh.hodge[2])
    Kee, Keb, Kbb = hessian_blocks(mesh, medium, e, b)
    C = mesh.incidence[1].astype(float)
    half = 0.5 * dt * c
    De = M1 - FOUR_PI * Kee
    Db = -FOUR_PI * Keb
    He = FOUR_PI * Keb.T
    Hb = M2 + FOUR_PI * Kbb
    J = sp.bmat([[De - half * (C.T @ He), Db - half * (C.T @ Hb)],
                 [half * C, sp.identity(mesh.n_cells(2))]], format="csc")
    try:
        return spla.splu(J), spla.splu(sp.csc_matrix(De))
    except RuntimeError as exc:  # singular or non-finite Jacobian
        raise NonConvergence(f"midpoint Jacobian is singular: {exc}") from exc


JACOBIAN_MAX_AGE = 8
JACOBIAN_MAX_ITER = 6


def _factors(mesh, medium, e, b, dt, c, carried=None):
    """Frozen midpoint Jacobian factors.

    Linear media share one factorisation per mesh; nonlinear media reuse the
    factors carried by the trajectory until they age out or slow down.
    """
    if medium.linear:
        key = ("midpoint_lu", medium, float(dt), float(c))
        return mesh.operator(key, lambda: _midpoint_jacobian(mesh, medium, np.zeros_like(e),
                                                             np.zeros_like(b), dt, c)), 0
    if carried is not None:
        factors, age, iters, key = carried
        if key == (medium, dt, c) and age < JACOBIAN_MAX_AGE and iters <= JACOBIAN_MAX_ITER:
            return factors, age + 1
    return _midpoint_jacobian(mesh, medium, e, b, dt, c), 0


def implicit_midpoint_update(mesh, medium, d0, b0, e0, dt, c, tol, max_iter, kinetic=None, f0=None,
                             carried=None, guess=None):
    """One implicit-midpoint step on raw DOF arrays.

    The midpoint unknowns (e_m, b_m) are found by simplified Newton with a
    frozen Jacobian; kinetic unknowns are updated by Picard iteration.  The
    end-of-step values are then formed explicitly from the midpoint fluxes,
    so discrete Gauss laws and charge hold independently of ``tol``.

    Returns
    -------
    d1, b1, e_m, f1, info
    """
    C = mesh.incidence[1]
    CT = curl_transpose(mesh)
    n1 = mesh.n_cells(1)
    half = 0.5 * dt
    if guess is None:
        e_m, b_m = e0.copy(), b0.copy()
    else:
        e_m, b_m = guess[0].copy(), guess[1].copy()
    (lu, lu_e), age = _factors(mesh, medium, e_m, b_m, dt, c, carried)
    f_m = f0
    scale_d = 1.0 + np.max(np.abs(d0), initial=0.0)
    scale_b = 1.0 + np.max(np.abs(b0), initial=0.0)
    scale_f = 1.0 + (np.max(np.abs(f0), initial=0.0) if f0 is not None else 0.0)
    err = prev = np.inf
    start = (e_m.copy(), b_m.copy())
    fresh = medium.linear or age == 0
    for it in range(max_iter + 1):
        D_m, H_m = _constitutive_raw(mesh, medium, e_m, b_m)
        src = c * (CT @ H_m)
        if kinetic is not None:
            src = src - kinetic.current(f_m)
            V = kinetic.rhs(f_m, e_m, b_m)
        curl_e = c * (C @ e_m)
        r1 = D_m - d0 - half * src
        r2 = b_m - b0 + half * curl_e
        err = max(np.max(np.abs(r1), initial=0.0) / scale_d, np.max(np.abs(r2), initial=0.0) / scale_b)
        if kinetic is not None:
            rf = f_m - f0 - half * V
            err = max(err, np.max(np.abs(rf), initial=0.0) / scale_f)
        if err <= tol:
            break
        if it == max_iter:
            raise NonConvergence("implicit midpoint fixed point did not converge", residual=err,
                                 iterations=it, recommended_dt=0.5 * dt)
        if fresh and not np.isfinite(err):
            raise NonConvergence("implicit midpoint iterate became non-finite", residual=err,
                                 iterations=it, recommended_dt=0.5 * dt)
        if not fresh and (not np.isfinite(err) or err >= prev):
            # a lagged Jacobian stopped contracting: refactor once at a finite iterate
            if not np.isfinite(err):
                e_m, b_m = start[0].copy(), start[1].copy()
                f_m = f0
            lu, lu_e = _midpoint_jacobian(mesh, medium, e_m, b_m, dt, c)
            age, fresh, prev = 0, True, np.inf
            continue
        prev = err
        delta = lu.solve(np.concatenate([r1, r2]))
        e_m = e_m - delta[:n1]
        b_m = b_m - delta[n1:]
        if kinetic is not None:
            f_m = f0 + half * V
    d1 = d0 + dt * src
    b1 = b0 - dt * curl_e
    f1 = f0 + dt * V if kinetic is not None else None
    info = {"iterations": it, "residual": err, "lu_e": lu_e, "midpoint": (e_m, b_m),
            "jacobian": ((lu, lu_e), age, it, (medium, dt, c))}
    return d1, b1, e_m, f1, info


def _lie_splitting(mesh, medium, state, dt, c):
    if not medium.linear:
        raise ValueError("lie_splitting is available for linear media only")
    C = mesh.incidence[1]
    b1 = state.b.values - dt * c * (C @ state.e.values)
    _, h1 = _constitutive_raw(mesh, medium, state.e.values, b1)
    d1 = state.d.values + dt * c * (curl_transpose(mesh) @ h1)
    return d1, b1


def step(mesh, medium, state, config):
    """Advance a field state by one time step; returns a new clean state."""
    _require_3d(mesh)
    state.refresh(mesh, medium)
    dt, c = config.dt, config.c
    if dt == 0:
        return state.copy()
    if config.integrator == "lie_splitting":
        d1, b1 = _lie_splitting(mesh, medium, state, dt, c)
        guess = state.e.values
        factor = None
    try:
        if config.integrator == "implicit_midpoint":
            e0 = state.e.values
            d1, b1, e_m, _, info = implicit_midpoint_update(
                mesh, medium, state.d.values, state.b.values, e0, dt, c,
                config.fixed_point_tol, config.fixed_point_max_iter,
                carried=state.info.get("jacobian"), guess=predict_midpoint(state, dt))
            guess = 2.0 * e_m - e0
            factor = info["lu_e"]
        new = finish_state(mesh, medium, d1, b1, guess, factor)
    except NonConvergence as exc:
        exc.payload.setdefault("recommended_dt", 0.5 * dt)
        raise
    if config.integrator == "implicit_midpoint":
        carry_solver_state(new, info, dt)
    return new


def predict_midpoint(state, dt):
    """Linear extrapolation of the next midpoint from the previous one."""
    prev = state.info.get("midpoint")
    if prev is None or prev[2] != dt:
        return None
    return 2.0 * state.e.values - prev[0], 2.0 * state.b.values - prev[1]


def carry_solver_state(state, info, dt):
    state.info["jacobian"] = info["jacobian"]
    state.info["midpoint"] = info["midpoint"] + (dt,)


def finish_state(mesh, medium, d1, b1, guess, factor=None):
    d = Cochain(2, TWISTED, d1)
    b = Cochain(2, STRAIGHT, b1)
    e = invert_constitutive(mesh, medium, d, b, e0=guess, factor=factor)
    _, h = _constitutive_raw(mesh, medium, e.values, b1)
    return FieldState(d=d, b=b, e=e, h=Cochain(1, TWISTED, h), dirty=False)


def evolve(mesh, medium, state, config, probe=None, callback=None):
    """Run ``config.n_steps`` steps and record monitors every ``monitor_stride``.

    Returns the final state and a dict of arrays with keys ``t``, ``H``,
    ``div_b``, ``div_d`` and, when ``probe`` is given, ``probe``.
    """
    rows = {"t": [], "H": [], "div_b": [], "div_d": []}
    if probe is not None:
        rows["probe"] = []

    def record(n, s):
        rows["t"].append(n * config.dt)
        rows["H"].append(energy(mesh, medium, s))
        cb, cd = casimir_monitors(mesh, s)
        rows["div_b"].append(cb)
        rows["div_d"].append(cd)
        if probe is not None:
            rows["probe"].append(probe(s))

    state.refresh(mesh, medium)
    record(0, state)
    for n in range(1, config.n_steps + 1):
        try:
            state = step(mesh, medium, state, config)
        except NonConvergence as exc:
            exc.payload["step"] = n
            raise
        if n % config.monitor_stride == 0 or n == config.n_steps:
            record(n, state)
        if callback is not None:
            callback(n, state)
    return state, {k: np.asarray(v) for k, v in rows.items()}
