"""
Independent reference implementations used only by the tests.

Nothing here imports the solver's own machinery for the quantity being
checked: Fock-space operators are built from Jordan-Wigner matrices, the
circuit from explicit Kronecker products, and integrals from numerical
quadrature.
"""

from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.integrate import quad

N_MODES = 6


@lru_cache(maxsize=None)
def annihilators(n_modes=N_MODES):
    """Jordan-Wigner annihilation matrices; mode i is bit i of the Fock index."""
    dim = 2**n_modes
    ops = []
    for i in range(n_modes):
        a = np.zeros((dim, dim))
        for state in range(dim):
            if (state >> i) & 1:
                sign = (-1) ** bin(state & ((1 << i) - 1)).count("1")
                a[state ^ (1 << i), state] = sign
        ops.append(a)
    return tuple(ops)


def vacuum(n_modes=N_MODES):
    v = np.zeros(2**n_modes)
    v[0] = 1.0
    return v


def determinant(occupied, n_modes=N_MODES):
    """a+_{i1} a+_{i2} ... |0> for the orbitals listed left to right."""
    a = annihilators(n_modes)
    v = vacuum(n_modes)
    for i in reversed(occupied):
        v = a[i].T @ v
    return v


def fock_state(coeffs, dets):
    return sum(c * determinant(d) for c, d in zip(coeffs, dets))


def two_rdm(psi):
    """15x15 matrix <psi| a+_i a+_j a_l a_k |psi> over pairs i<j, k<l."""
    a = annihilators()
    pairs = list(combinations(range(N_MODES), 2))
    D = np.zeros((15, 15))
    for x, (i, j) in enumerate(pairs):
        bra = a[j] @ a[i] @ psi  # (a+_i a+_j)^dagger psi
        for y, (k, l) in enumerate(pairs):
            D[x, y] = bra @ (a[l] @ a[k] @ psi)
    return D


def one_rdm(psi):
    a = annihilators()
    return np.array([[psi @ a[i].T @ a[j] @ psi for j in range(N_MODES)] for i in range(N_MODES)])


def fock_hamiltonian(h1, v2):
    """H = sum h_ij a+_i a_j + 1/2 sum <ij|kl> a+_i a+_j a_l a_k."""
    a = annihilators()
    ad = [x.T for x in a]
    H = np.zeros((64, 64))
    n = len(a)
    for i in range(n):
        for j in range(n):
            if h1[i, j] != 0:
                H += h1[i, j] * ad[i] @ a[j]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    if v2[i, j, k, l] != 0:
                        H += 0.5 * v2[i, j, k, l] * ad[i] @ ad[j] @ a[l] @ a[k]
    return H


# --- circuit ---------------------------------------------------------------

def _kron3(a, b, c):
    return np.kron(np.kron(a, b), c)


def circuit_state(theta1, theta2):
    """Gate-by-gate product of the 3-qubit preparation circuit acting on |000>."""
    I = np.eye(2)
    P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])

    def ry(t):
        return np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])

    ry1 = _kron3(ry(theta1), I, I)
    cx13 = _kron3(P0, I, I) + _kron3(P1, I, X)
    ry2 = _kron3(I, ry(theta2), I)
    cx21 = _kron3(I, P0, I) + _kron3(X, P1, I)
    psi = np.zeros(8)
    psi[0] = 1.0
    return cx21 @ ry2 @ cx13 @ ry1 @ psi


# --- integrals -------------------------------------------------------------

def boys_quadrature(t):
    return quad(lambda u: np.exp(-t * u * u), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]


def sto3g_overlap_quadrature(distance_bohr):
    """Overlap of two STO-3G hydrogen 1s functions by 1D quadrature per Cartesian axis."""
    exps = np.array([3.42525091, 0.62391373, 0.16885540])
    coefs = np.array([0.15432897, 0.53532814, 0.44463454])

    def axis(a, b, shift):
        f = lambda x: np.exp(-a * x * x - b * (x - shift) ** 2)
        return quad(f, -np.inf, np.inf, epsabs=1e-14)[0]

    def gauss_overlap(a, b, d):
        return axis(a, b, d) * axis(a, b, 0.0) ** 2

    norms = np.array([1.0 / np.sqrt(gauss_overlap(a, a, 0.0)) for a in exps])
    d = coefs * norms

    def contracted(dist):
        return sum(d[i] * d[j] * gauss_overlap(exps[i], exps[j], dist) for i in range(3) for j in range(3))

    return contracted(distance_bohr) / contracted(0.0)
