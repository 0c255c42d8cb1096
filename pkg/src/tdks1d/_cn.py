"""Tridiagonal Crank-Nicolson kernels shared by all orbitals.

The Hamiltonian on the grid is tridiagonal with a site-dependent real
diagonal and constant off-diagonals, so the elimination coefficients are
computed once per call and reused for every orbital.  Orbitals are stored
column-wise, ``psi[j, i]`` = orbital ``i`` at node ``j``; the inner loop runs
over orbitals, which hides the latency of the serial Thomas sweep.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _factor(diag, upper, lower, z):
    n = diag.shape[0]
    up = z * upper
    lo = z * lower
    cprime = np.empty(n, dtype=np.complex128)
    inv = np.empty(n, dtype=np.complex128)
    inv[0] = 1.0 / (1.0 + z * diag[0])
    cprime[0] = up * inv[0]
    for j in range(1, n):
        inv[j] = 1.0 / (1.0 + z * diag[j] - lo * cprime[j - 1])
        cprime[j] = up * inv[j]
    return cprime, inv


@nb.njit(cache=True)
def cayley_step(psi, diag, upper, lower, z, out):
    """Write (1 + zH)^{-1} (1 - zH) psi into ``out``.

    ``z = i dt/2`` is the real-time Crank-Nicolson step, ``z = dt/2`` the
    imaginary-time one.  ``upper``/``lower`` are the constant couplings
    H[j, j+1] and H[j+1, j]; Dirichlet zero outside the grid.
    """
    n, m = psi.shape
    cprime, inv = _factor(diag, upper, lower, z)
    up = z * upper
    lo = z * lower
    a = 1.0 - z * diag[0]
    for i in range(m):
        out[0, i] = (a * psi[0, i] - up * psi[1, i]) * inv[0]
    for j in range(1, n - 1):
        a = 1.0 - z * diag[j]
        iv = inv[j]
        for i in range(m):
            out[j, i] = (a * psi[j, i] - up * psi[j + 1, i]
                         - lo * psi[j - 1, i] - lo * out[j - 1, i]) * iv
    a = 1.0 - z * diag[n - 1]
    for i in range(m):
        out[n - 1, i] = (a * psi[n - 1, i] - lo * psi[n - 2, i]
                         - lo * out[n - 2, i]) * inv[n - 1]
    for j in range(n - 2, -1, -1):
        c = cprime[j]
        for i in range(m):
            out[j, i] -= c * out[j + 1, i]
    return out


@nb.njit(cache=True)
def apply_hamiltonian(psi, diag, upper, lower, out):
    n, m = psi.shape
    for i in range(m):
        out[0, i] = diag[0] * psi[0, i] + upper * psi[1, i]
        out[n - 1, i] = diag[n - 1] * psi[n - 1, i] + lower * psi[n - 2, i]
    for j in range(1, n - 1):
        for i in range(m):
            out[j, i] = diag[j] * psi[j, i] + upper * psi[j + 1, i] + lower * psi[j - 1, i]
    return out


@nb.njit(cache=True)
def gram_schmidt(psi, dx):
    """Modified Gram-Schmidt over columns, lowest index first, in place."""
    n, m = psi.shape
    for i in range(m):
        for k in range(i):
            s = 0j
            for j in range(n):
                s += np.conj(psi[j, k]) * psi[j, i]
            s *= dx
            for j in range(n):
                psi[j, i] -= s * psi[j, k]
        nrm = 0.0
        for j in range(n):
            nrm += psi[j, i].real ** 2 + psi[j, i].imag ** 2
        nrm = np.sqrt(nrm * dx)
        for j in range(n):
            psi[j, i] /= nrm
    return psi
