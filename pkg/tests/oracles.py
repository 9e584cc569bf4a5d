"""Independent finite-difference oracles for the geometry tests."""
from __future__ import annotations

import numpy as np


def random_polynomial_metric_rows(n, rng, amp=0.15):
    """Text rows of ``g = I + amp * (symmetric random quadratic polynomials)``."""
    rows = [["0"] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            terms = []
            c0 = rng.uniform(-1, 1) * amp * (0.3 if i != j else 1.0)
            terms.append(f"{1.0 + c0 if i == j else c0:.6f}")
            for a in range(n):
                terms.append(f"{rng.uniform(-1, 1) * amp:.6f}*x{a + 1}")
                b = rng.integers(n)
                terms.append(f"{rng.uniform(-1, 1) * amp:.6f}*x{a + 1}*x{b + 1}")
            e = " + ".join(terms)
            rows[i][j] = rows[j][i] = e
    return rows


def fd_metric_derivative(gfun, p, h=1e-5):
    n = len(p)
    out = np.zeros((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        out[a] = (-gfun(p + 2 * e) + 8 * gfun(p + e) - 8 * gfun(p - e) + gfun(p - 2 * e)) / (12 * h)
    return out


def fd_christoffel(gfun, p, h=1e-5):
    g = gfun(p)
    dg = fd_metric_derivative(gfun, p, h)  # dg[a, i, j] = d_a g_ij
    ginv = np.linalg.inv(g)
    low = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)  # [l, i, j]: d_i g_lj + d_j g_li - d_l g_ij
    return np.einsum("kl,lij->kij", ginv, low)


def fd_riemann(gfun, p, h=1e-4):
    """``R[i, j, k, l] = g_ka omega[i, j, a, l]`` with omega from differenced Christoffels."""
    n = len(p)
    gam = fd_christoffel(gfun, p)
    dgam = np.zeros((n, n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        dgam[a] = (-fd_christoffel(gfun, p + 2 * e) + 8 * fd_christoffel(gfun, p + e)
                   - 8 * fd_christoffel(gfun, p - e) + fd_christoffel(gfun, p - 2 * e)) / (12 * h)
    # omega[i, j, a, b] = d_i G^a_jb - d_j G^a_ib + G^a_im G^m_jb - G^a_jm G^m_ib
    om = (np.einsum("iajb->ijab", dgam) - np.einsum("jaib->ijab", dgam)
          + np.einsum("aim,mjb->ijab", gam, gam) - np.einsum("ajm,mib->ijab", gam, gam))
    return np.einsum("ka,ijal->ijkl", gfun(p), om)
