"""
Pinned-state reduced density matrices.

A pinned three-electron state is

    psi = p_a * alpha |A> + p_b * beta |B> + gamma |C>

with determinants A = (1,2,3), B = (1,4,5), C = (2,4,6) in 1-based GPC
labels, alpha^2 = 1 - n5 - n6, beta^2 = n5 and gamma^2 = n6.  Its 2-RDM has a
3x3 alpha-alpha block, a 6x6 alpha-beta block and a vanishing beta-beta
block; `TwoRDM` stores the embedding into the full 15-pair basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hamiltonian import ALPHA_ORBITALS, BETA_ORBITALS, N_ELECTRONS, PAIR_INDEX, PAIRS, MolecularOrbitals
from .mitigation import polytope_membership

# 0-based GPC pairs of each spin block, in the conventional ordering
AA_PAIRS = ((0, 1), (0, 3), (1, 3))
AB_PAIRS = ((0, 2), (0, 4), (1, 2), (1, 5), (3, 4), (3, 5))
BB_PAIRS = ((2, 4), (2, 5), (4, 5))
PINNED_DETERMINANTS = ((0, 1, 2), (0, 3, 4), (1, 3, 5))


class PolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class OccupationVector:
    n: np.ndarray  # (n1, ..., n6)

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        n.setflags(write=False)
        object.__setattr__(self, "n", n)

    @property
    def n4(self) -> float:
        return float(self.n[3])

    @property
    def n5(self) -> float:
        return float(self.n[4])

    @property
    def n6(self) -> float:
        return float(self.n[5])

    @property
    def pinned(self) -> np.ndarray:
        return self.n[3:].copy()

    @property
    def amplitudes_squared(self) -> np.ndarray:
        """(alpha^2, beta^2, gamma^2) of the pinned expansion."""
        return np.array([1.0 - self.n5 - self.n6, self.n5, self.n6])


def complete_occupations(n4, n5, n6, tol: float = 1e-10) -> OccupationVector:
    """Fill in n1..n3 from the complement relations; the input must lie in the polytope."""
    member = polytope_membership(n4, n5, n6, tol)
    if not member:
        raise PolytopeError(f"({n4}, {n5}, {n6}) violates {', '.join(member.violated)}")
    return OccupationVector([1.0 - n6, 1.0 - n5, 1.0 - n4, n4, n5, n6])


class SignAssignment(NamedTuple):
    p_alpha: int = 1
    p_beta: int = 1
    p_gamma: int = 1


def phi(theta):
    """Fold an angle onto a branch of width pi/2 with alternating sign.

    phi(theta) = (-1)^x * r with r = (theta + pi/4) mod (pi/2) and
    x = (theta - pi/4 - r) / (pi/2); x is an integer, so only its parity
    matters.
    """
    theta = np.asarray(theta, dtype=float)
    r = np.mod(theta + np.pi / 4, np.pi / 2)
    x = np.rint((theta - np.pi / 4 - r) / (np.pi / 2)).astype(int)
    out = np.where(x % 2 == 0, r, -r)
    return float(out) if out.ndim == 0 else out


def _sign_rule(f_neg, f_other):
    # fired when one folded angle is negative
    if f_other >= -f_neg and f_other >= 0:
        return SignAssignment(-1, -1, 1)  # gamma carries the relative minus sign
    return SignAssignment(1, -1, 1)  # beta negative


def sign_map(theta1: float, theta2: float, half_angle: bool = True) -> SignAssignment:
    """Amplitude signs for circuit angles (theta1, theta2); symmetric under swap.

    With ``half_angle`` the folding acts on theta/2, the angle that appears
    in the circuit amplitudes.
    """
    scale = 0.5 if half_angle else 1.0
    f1, f2 = phi(scale * theta1), phi(scale * theta2)
    if f1 < 0:
        return _sign_rule(f1, f2)
    if f2 < 0:
        return _sign_rule(f2, f1)
    return SignAssignment()


@dataclass(frozen=True)
class TwoRDM:
    matrix: np.ndarray  # 15x15 over hamiltonian.PAIRS, D[(i,j),(k,l)] = <a+_i a+_j a_l a_k>

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(PAIRS), len(PAIRS)):
            raise ValueError("a TwoRDM is a 15x15 matrix over the GPC pair basis")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def block(self, pairs) -> np.ndarray:
        idx = [PAIR_INDEX[p] for p in pairs]
        return self.matrix[np.ix_(idx, idx)]

    @property
    def alpha_alpha(self) -> np.ndarray:
        return self.block(AA_PAIRS)

    @property
    def alpha_beta(self) -> np.ndarray:
        return self.block(AB_PAIRS)

    @property
    def beta_beta(self) -> np.ndarray:
        return self.block(BB_PAIRS)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def tensor(self) -> np.ndarray:
        return expand_pairs(self.matrix)


def expand_pairs(d2) -> np.ndarray:
    """Antisymmetric 6^4 tensor G[i,j,k,l] = <a+_i a+_j a_l a_k> from the pair matrix."""
    d2 = np.asarray(d2, dtype=float)
    G = np.zeros((6, 6, 6, 6))
    for a, (i, j) in enumerate(PAIRS):
        for b, (k, l) in enumerate(PAIRS):
            v = d2[a, b]
            G[i, j, k, l] = v
            G[j, i, k, l] = -v
            G[i, j, l, k] = -v
            G[j, i, l, k] = v
    return G


def _put(m, bra, ket, value):
    a, b = PAIR_INDEX[bra], PAIR_INDEX[ket]
    m[a, b] = m[b, a] = value


def reconstruct_2rdm(occ: OccupationVector, signs: SignAssignment = SignAssignment(), tol: float = 1e-10) -> TwoRDM:
    """2-RDM of the pinned state with the given occupations and amplitude signs."""
    a2, b2, g2 = occ.amplitudes_squared
    if a2 < -tol:
        raise PolytopeError(f"1 - n5 - n6 = {a2:.3e} is negative")
    a2, b2, g2 = max(a2, 0.0), max(b2, 0.0), max(g2, 0.0)
    pa, pb, pg = signs.p_alpha, signs.p_beta, signs.p_gamma
    m = np.zeros((len(PAIRS), len(PAIRS)))
    for pair, w in zip(AA_PAIRS, (a2, b2, g2)):
        _put(m, pair, pair, w)
    for pair, w in zip(AB_PAIRS, (a2, b2, a2, g2, b2, g2)):
        _put(m, pair, pair, w)
    _put(m, (1, 5), (0, 4), pb * pg * np.sqrt(b2 * g2))
    _put(m, (3, 4), (1, 2), pa * pb * np.sqrt(a2 * b2))
    _put(m, (3, 5), (0, 2), -pa * pg * np.sqrt(a2 * g2))
    return TwoRDM(m)


def contract_to_1rdm(d2, n_electrons: int = N_ELECTRONS) -> np.ndarray:
    """Spin-orbital 1-RDM, D1[i,k] = sum_j G[i,j,k,j] / (N - 1)."""
    G = expand_pairs(getattr(d2, "matrix", d2))
    return np.einsum("ijkj->ik", G) / (n_electrons - 1)


def spatial_density_ao(d1_spin, mos: MolecularOrbitals) -> np.ndarray:
    """Spin-summed 1-RDM in the AO basis."""
    d1 = np.asarray(d1_spin, dtype=float)
    da = d1[np.ix_(ALPHA_ORBITALS, ALPHA_ORBITALS)]
    db = d1[np.ix_(BETA_ORBITALS, BETA_ORBITALS)]
    return mos.c_alpha @ da @ mos.c_alpha.T + mos.c_beta @ db @ mos.c_beta.T


def mott_tau(d1_spin, mos: MolecularOrbitals, X: np.ndarray) -> float:
    """Sum of squared off-diagonal elements of the spatial 1-RDM in the Loewdin AO basis.

    ``X`` is the Loewdin orthogonalizer S^(-1/2); the Loewdin-basis density is
    S^(1/2) D_AO S^(1/2) with S^(1/2) = X^(-1).
    """
    s_half = np.linalg.inv(X)
    dl = s_half @ spatial_density_ao(d1_spin, mos) @ s_half
    off = dl - np.diag(np.diag(dl))
    return float(np.sum(off**2))
