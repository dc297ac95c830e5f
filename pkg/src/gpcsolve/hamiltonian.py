"""
Reduced Hamiltonian in the GPC spin-orbital basis and classical orbital rotations.

The six GPC spin orbitals are tied to spatial molecular orbitals by the fixed
map

    n1 <-> phi1 alpha    n4 <-> phi3 alpha
    n2 <-> phi2 alpha    n5 <-> phi2 beta
    n3 <-> phi1 beta     n6 <-> phi3 beta

Alpha and beta electrons may live in different spatial orbitals
(`MolecularOrbitals.c_alpha` / `c_beta`); rotations never mix spins.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .integrals import IntegralSet

ALPHA, BETA = 0, 1
N_ELECTRONS = 3
# GPC index (0-based) -> (spatial MO index, spin)
GPC_ORBITALS = ((0, ALPHA), (1, ALPHA), (0, BETA), (2, ALPHA), (1, BETA), (2, BETA))
GPC_SPIN = np.array([s for _, s in GPC_ORBITALS])
ALPHA_ORBITALS = (0, 1, 3)
BETA_ORBITALS = (2, 4, 5)
PAIRS = tuple(combinations(range(6), 2))
PAIR_INDEX = {pair: k for k, pair in enumerate(PAIRS)}
GIVENS_PLANES = ((0, 1), (0, 2), (1, 2))


class OrthonormalityError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class MolecularOrbitals:
    c_alpha: np.ndarray
    c_beta: np.ndarray
    label: str = "rohf"

    @classmethod
    def restricted(cls, C, label: str = "rohf") -> "MolecularOrbitals":
        C = np.array(C, dtype=float)
        return cls(C, C.copy(), label)

    @property
    def is_restricted(self) -> bool:
        return np.array_equal(self.c_alpha, self.c_beta)

    def spin_orbital_coefficients(self) -> np.ndarray:
        """AO x 6 matrix whose columns are the GPC spin orbitals' spatial parts."""
        cs = (self.c_alpha, self.c_beta)
        return np.stack([cs[spin][:, p] for p, spin in GPC_ORBITALS], axis=1)

    def orthonormality_error(self, S) -> float:
        eye = np.eye(self.c_alpha.shape[1])
        return max(
            np.max(np.abs(c.T @ S @ c - eye)) for c in (self.c_alpha, self.c_beta)
        )

    def reorthonormalized(self, S) -> "MolecularOrbitals":
        """Symmetric re-orthonormalization in a new metric, keeping the orbitals' character."""
        def fix(c):
            w, v = np.linalg.eigh(c.T @ S @ c)
            return c @ (v * w**-0.5) @ v.T
        return MolecularOrbitals(fix(self.c_alpha), fix(self.c_beta), self.label)


def givens_matrix(angles) -> np.ndarray:
    """Product G(g12) G(g13) G(g23) of plane rotations among three orbitals."""
    G = np.eye(3)
    for (i, j), t in zip(GIVENS_PLANES, angles):
        c, s = np.cos(t), np.sin(t)
        R = np.eye(3)
        R[i, i] = R[j, j] = c
        R[i, j] = -s
        R[j, i] = s
        G = G @ R
    return G


@dataclass(frozen=True)
class GivensAngles:
    """Rotation angles (g12, g13, g23) per spin.  ``beta=None`` reuses the alpha angles."""

    alpha: tuple = (0.0, 0.0, 0.0)
    beta: tuple | None = None

    @classmethod
    def from_vector(cls, x, restricted: bool = False) -> "GivensAngles":
        x = np.asarray(x, dtype=float)
        if restricted:
            return cls(tuple(x[:3]))
        return cls(tuple(x[:3]), tuple(x[3:6]))

    def matrices(self):
        ga = givens_matrix(self.alpha)
        gb = ga if self.beta is None else givens_matrix(self.beta)
        return ga, gb


def apply_givens(mos: MolecularOrbitals, angles: GivensAngles) -> MolecularOrbitals:
    ga, gb = angles.matrices()
    return MolecularOrbitals(mos.c_alpha @ ga, mos.c_beta @ gb, "rotated")


@dataclass(frozen=True)
class ReducedHamiltonian:
    h1: np.ndarray  # 6x6 one-electron integrals, GPC spin-orbital order
    v2: np.ndarray  # <pq|rs> spin-orbital integrals (physicists'), spin-orthogonality applied
    k2: np.ndarray  # 15x15 reduced Hamiltonian over PAIRS
    E_nn: float
    n_electrons: int = N_ELECTRONS
    mos: MolecularOrbitals | None = field(default=None, compare=False)

    @property
    def antisymmetrized(self) -> np.ndarray:
        return self.v2 - self.v2.transpose(0, 1, 3, 2)


def spin_orbital_integrals(integrals: IntegralSet, mos: MolecularOrbitals):
    cols = mos.spin_orbital_coefficients()
    same = GPC_SPIN[:, None] == GPC_SPIN[None, :]
    h1 = (cols.T @ integrals.hcore @ cols) * same
    chem = np.einsum("pqrs,pi,qj,rk,sl->ijkl", integrals.ERI, cols, cols, cols, cols, optimize=True)
    # <ij|kl> = (ik|jl), nonzero only if spin(i)=spin(k) and spin(j)=spin(l)
    v2 = chem.transpose(0, 2, 1, 3) * (same[:, None, :, None] & same[None, :, None, :])
    return h1, v2


_PI = np.array([p for p, _ in PAIRS])
_PJ = np.array([q for _, q in PAIRS])


def reduced_hamiltonian_matrix(h1, v2, n_electrons: int = N_ELECTRONS) -> np.ndarray:
    i, j = _PI[:, None], _PJ[:, None]
    k, l = _PI[None, :], _PJ[None, :]
    eye = np.eye(h1.shape[0])
    one = (h1[i, k] * eye[j, l] + h1[j, l] * eye[i, k] - h1[i, l] * eye[j, k] - h1[j, k] * eye[i, l])
    two = v2[i, j, k, l] - v2[i, j, l, k]
    k2 = one / (n_electrons - 1) + two
    return 0.5 * (k2 + k2.T)


def build_reduced_hamiltonian(
    integrals: IntegralSet, mos: MolecularOrbitals, check: bool = True, tol: float = 1e-10
) -> ReducedHamiltonian:
    if integrals.nbasis != 3 or mos.c_alpha.shape != (3, 3):
        raise ValueError("the GPC reduced Hamiltonian needs exactly three spatial orbitals")
    if check:
        err = mos.orthonormality_error(integrals.S)
        if err > tol:
            raise OrthonormalityError(f"orbitals are not S-orthonormal (max deviation {err:.2e})")
    h1, v2 = spin_orbital_integrals(integrals, mos)
    return ReducedHamiltonian(h1, v2, reduced_hamiltonian_matrix(h1, v2), integrals.E_nn, mos=mos)


def _as_matrix(d2) -> np.ndarray:
    return np.asarray(getattr(d2, "matrix", d2), dtype=float)


def electronic_energy(rh: ReducedHamiltonian, d2) -> float:
    """Tr(K2 D2) over the 15-pair basis, no nuclear repulsion and no trace check."""
    return float(np.sum(rh.k2 * _as_matrix(d2)))


def energy(rh: ReducedHamiltonian, d2, tol: float = 1e-8) -> float:
    """Total energy Tr(K2 D2) + E_nn; D2 must be normalized to N(N-1)/2 (or be zero)."""
    D = _as_matrix(d2)
    tr = np.trace(D)
    expected = rh.n_electrons * (rh.n_electrons - 1) / 2
    if abs(tr - expected) > tol and abs(tr) > tol:
        raise NormalizationError(f"2-RDM trace {tr:.10f} differs from {expected}")
    return float(np.sum(rh.k2 * D)) + rh.E_nn
