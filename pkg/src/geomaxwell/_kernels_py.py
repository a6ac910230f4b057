"""Pure-numpy phase-space kernels (reference and fallback backend).

Layout: ``f[x, ux, uy]``, periodic in every index.  ``ara`` holds the
Arakawa coefficients of J(gamma, .) for the neighbours E, W, N, S, NE, NW,
SE, SW, where E/W step the ux index and N/S the uy index.
"""

import numpy as np


def vlasov_rhs(f, cwx, ara, ex, ey, bz, qm, inv_h, inv_2du):
    fE = np.roll(f, -1, 1)
    fW = np.roll(f, 1, 1)
    fN = np.roll(f, -1, 2)
    fS = np.roll(f, 1, 2)
    flux = cwx * (f + np.roll(f, -1, 0)) * 0.5
    out = -(flux - np.roll(flux, 1, 0)) * inv_h
    kx = (qm * inv_2du * ex)[:, None, None]
    ky = (qm * inv_2du * ey)[:, None, None]
    kb = (qm * bz)[:, None, None]
    jac = (ara[0] * fE + ara[1] * fW + ara[2] * fN + ara[3] * fS
           + ara[4] * np.roll(fE, -1, 2) + ara[5] * np.roll(fW, -1, 2)
           + ara[6] * np.roll(fE, 1, 2) + ara[7] * np.roll(fW, 1, 2))
    out -= kx * (fE - fW) + ky * (fN - fS)
    out += kb * jac
    return out


def moments(f, cwx, cwy):
    """Per-x sums: density, edge-averaged x-flux and vertex y-flux."""
    n = f.sum(axis=(1, 2))
    fbar = 0.5 * (f + np.roll(f, -1, 0))
    jx = (cwx * fbar).sum(axis=(1, 2))
    jy = (cwy * f).sum(axis=(1, 2))
    return n, jx, jy
