"""Lorentz boosts of fields and constitutive laws, and kinetic-energy diagnostics.

The 6x6 boost acts on the stacked (E, B); (D, -H) transforms with its
inverse transpose.  Invariance tests use c = 1, where |E|^2 - |B|^2 and E.B
are the field invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .media import FOUR_PI


def hat(v):
    """Cross-product matrix: hat(v) @ w == v x w."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class Boost:
    """A pure boost with velocity ``v``."""

    v: np.ndarray
    c: float
    gamma: float
    matrix: np.ndarray

    @property
    def spatial(self):
        """The diagonal block gamma I + (1 - gamma) v v^T / v^2."""
        return self.matrix[:3, :3]


def _gamma(v, c):
    v = np.asarray(v, float)
    speed2 = float(np.dot(v, v))
    if not speed2 < c * c:
        raise ValueError(f"|v| = {np.sqrt(speed2):.6g} must be below c = {c}")
    return 1.0 / np.sqrt(1.0 - speed2 / (c * c)), speed2


def boost_matrix(v, c=1.0):
    """The block matrix [[A, gamma hat(v)], [-(gamma/c^2) hat(v), A]]."""
    v = np.asarray(v, float).reshape(3)
    g, v2 = _gamma(v, c)
    if v2 == 0.0:
        return Boost(v, float(c), 1.0, np.eye(6))
    A = g * np.eye(3) + (1.0 - g) * np.outer(v, v) / v2
    V = hat(v)
    M = np.block([[A, g * V], [-(g / c ** 2) * V, A]])
    return Boost(v, float(c), float(g), M)


def _pair(boost, X, Y, sign):
    # shared law for (D, H) and (P, M): X' = A X + s (gamma/c^2) v x Y, Y' = A Y - s gamma v x X
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    A = boost.spatial
    V = hat(boost.v)
    g, c2 = boost.gamma, boost.c ** 2
    return A @ X + sign * (g / c2) * (V @ Y), A @ Y - sign * g * (V @ X)


def boost_EB(boost, E, B):
    """Apply the boost matrix to (E, B); arrays of shape (3,) or (3, N)."""
    E = np.asarray(E, float)
    B = np.asarray(B, float)
    out = boost.matrix @ np.concatenate([E, B], axis=0)
    return out[:3], out[3:]


def boost_DH(boost, D, H):
    """D' = gamma (D + v x H / c^2) + (1 - gamma)(v.D) v / v^2, H' = gamma (H - v x D) + ..."""
    return _pair(boost, D, H, 1.0)


def boost_PM(boost, P, M):
    """Same algebraic law as :func:`boost_DH` in the (P, M) slots.

    The law holds with P = -dK/dE and M = dK/dB.
    """
    return _pair(boost, P, M, 1.0)


def lorentz_invariants(E, B, c=1.0):
    """(|E|^2 - c^2 |B|^2, E.B)."""
    E = np.asarray(E, float)
    B = np.asarray(B, float)
    return np.sum(E * E, axis=0) - c * c * np.sum(B * B, axis=0), np.sum(E * B, axis=0)


def compose_collinear(v1, v2, c=1.0):
    """Relativistic addition of parallel velocities."""
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    return (v1 + v2) / (1.0 + np.dot(v1, v2) / c ** 2)


def reduced_velocity(v, c=1.0):
    """u = (v/c) / sqrt(1 - v^2/c^2)."""
    v = np.asarray(v, float)
    s2 = np.sum(v * v, axis=0)
    if np.any(s2 >= c * c):
        raise ValueError("|v| must be below c")
    return (v / c) / np.sqrt(1.0 - s2 / (c * c))


def velocity_from_reduced(u, c=1.0):
    """v = c u / sqrt(1 + u^2)."""
    u = np.asarray(u, float)
    return c * u / np.sqrt(1.0 + np.sum(u * u, axis=0))


# ---------------------------------------------------------------------------
# constitutive covariance


def pointwise_DH(medium, E, B):
    """D = E - 4 pi dk/dE, H = B + 4 pi dk/dB for a pointwise medium."""
    kE, kB = medium.total_grad(E, B)
    return np.asarray(E, float) - FOUR_PI * kE, np.asarray(B, float) + FOUR_PI * kB


def polarization_magnetization(medium, E, B):
    """P = -dk/dE, M = dk/dB (the convention under which boost_PM holds)."""
    kE, kB = medium.total_grad(E, B)
    return -kE, kB


def covariance_check(medium, E, B, v, c=1.0):
    """Max-norm mismatch between 'constitute then boost' and 'boost then constitute'."""
    if not getattr(medium, "pointwise", True):
        raise ValueError("covariance_check needs a pointwise medium")
    bst = boost_matrix(v, c)
    D, H = pointwise_DH(medium, E, B)
    Da, Ha = boost_DH(bst, D, H)
    Ep, Bp = boost_EB(bst, E, B)
    Db, Hb = pointwise_DH(medium, Ep, Bp)
    return float(max(np.max(np.abs(Da - Db)), np.max(np.abs(Ha - Hb))))


# ---------------------------------------------------------------------------
# four-vector and K-splitting diagnostics


@dataclass(frozen=True)
class FourVector:
    """(time, space) components with signature (+, -, -, -)."""

    t: float
    x: np.ndarray

    def minkowski_norm(self):
        return float(self.t * self.t - np.dot(self.x, self.x))

    def boosted(self, v, c=1.0):
        """Components in a frame moving with velocity ``v``."""
        v = np.asarray(v, float)
        g, v2 = _gamma(v, c)
        if v2 == 0.0:
            return FourVector(self.t, np.array(self.x, float))
        beta = v / c
        n = v / np.sqrt(v2)
        x = np.asarray(self.x, float)
        t_new = g * (self.t - np.dot(beta, x))
        x_new = x + (g - 1.0) * np.dot(n, x) * n - g * beta * self.t
        return FourVector(float(t_new), x_new)


def numeric_gradient(fn, u, rel_step=1e-3):
    """Fourth-order central-difference gradient of a scalar function of u."""
    u = np.asarray(u, float)
    g = np.empty(3)
    for i in range(3):
        s = rel_step * (1.0 + abs(u[i]))
        e = np.zeros(3)
        e[i] = s
        g[i] = (8.0 * (fn(u + e) - fn(u - e)) - (fn(u + 2 * e) - fn(u - 2 * e))) / (12.0 * s)
    return g


def kinetic_four_vector(K, u, c=1.0, grad=None):
    """(sqrt(1+u^2), sqrt(1+u^2)/c grad_u K)."""
    u = np.asarray(u, float)
    gam = np.sqrt(1.0 + np.dot(u, u))
    gK = numeric_gradient(K, u) if grad is None else np.asarray(grad(u), float)
    return FourVector(float(gam), gam / c * gK)


def four_vector_check(K, v_boost, sample_u, c=1.0, grad=None):
    """Residual between boosting the kinetic four-vector and re-evaluating it.

    Path (a) Lorentz-transforms the four-vector built at u; path (b) boosts
    the particle (four-velocity transform of u) and rebuilds the four-vector
    at the new u.  Returns the largest component mismatch over the samples.
    """
    v_boost = np.asarray(v_boost, float)
    samples = np.atleast_2d(np.asarray(sample_u, float))
    worst = 0.0
    for u in samples:
        a = kinetic_four_vector(K, u, c, grad).boosted(v_boost, c)
        particle = FourVector(float(np.sqrt(1.0 + np.dot(u, u))), u).boosted(v_boost, c)
        b = kinetic_four_vector(K, particle.x, c, grad)
        worst = max(worst, abs(a.t - b.t), float(np.max(np.abs(a.x - b.x))))
    return float(worst)


@dataclass(frozen=True)
class KSpec:
    """Declared velocity dependence of a kinetic energy functional.

    Parameters
    ----------
    kind : {"relativistic_kinetic", "other"}
    u_part : callable
        The u-dependent part K(u) for a 3-vector u.
    decoupled : callable, optional
        An additive part depending on (x, E, B) only.
    m, c : float
    """

    kind: str
    u_part: Callable
    decoupled: Optional[Callable] = None
    m: float = 1.0
    c: float = 1.0


def k_splitting_check(spec, u_max=3.0, n=9, tol=1e-10):
    """Test whether the u-dependence is exactly m c sqrt(1+u^2) plus a constant."""
    if spec.kind not in ("relativistic_kinetic", "other"):
        raise ValueError(f"unknown K kind {spec.kind!r}")
    axis = np.linspace(-u_max, u_max, n)
    worst = 0.0
    for u in np.array(np.meshgrid(axis, axis, axis, indexing="ij")).reshape(3, -1).T:
        r = np.sqrt(1.0 + np.dot(u, u)) / (spec.m * spec.c) * numeric_gradient(spec.u_part, u) - u
        worst = max(worst, float(np.max(np.abs(r))))
    passed = worst <= tol
    report = {"passed": bool(passed), "residual": worst, "declared": spec.kind}
    if spec.decoupled is not None:
        report["annotation"] = "decoupled, invariance unresolved"
    return report
