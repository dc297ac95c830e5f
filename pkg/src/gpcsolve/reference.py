"""
Classical reference methods: ROHF orbitals and a 9-determinant full CI.

Determinants are sorted tuples of GPC spin-orbital indices (two from the
alpha set {0, 1, 3}, one from the beta set {2, 4, 5}), i.e. the ket
a+_{i1} a+_{i2} a+_{i3} |0> with i1 < i2 < i3.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .hamiltonian import (
    ALPHA_ORBITALS,
    BETA_ORBITALS,
    GPC_ORBITALS,
    PAIRS,
    MolecularOrbitals,
    ReducedHamiltonian,
    givens_matrix,
)
from .integrals import IntegralSet, lowdin_orthogonalizer

DETERMINANTS = tuple(
    tuple(sorted(a + (b,))) for a in combinations(ALPHA_ORBITALS, 2) for b in BETA_ORBITALS
)
HF_DETERMINANT = (0, 1, 2)


class SCFConvergenceError(RuntimeError):
    pass


# --- ROHF -------------------------------------------------------------------

def _jk(eri, D):
    J = np.einsum("pqrs,rs->pq", eri, D)
    K = np.einsum("prqs,rs->pq", eri, D)
    return J, K


def rohf(
    integrals: IntegralSet,
    n_alpha: int = 2,
    n_beta: int = 1,
    max_iter: int = 500,
    damping: float = 0.3,
    level_shift: float = 0.5,
    tol: float = 1e-10,
    perturbations=(0.0, 0.1, -0.1, 0.3, -0.3),
) -> tuple[MolecularOrbitals, float]:
    """Restricted open-shell HF with Roothaan's single effective Fock operator.

    The SCF is started from the core-Hamiltonian orbitals and from copies of
    them rotated by a small angle in every plane (symmetry-breaking guesses);
    the lowest converged solution is returned, orbitals ordered closed, open,
    virtual.
    """
    if n_alpha + n_beta != 3 or integrals.nbasis != 3:
        raise ValueError("rohf is specialised to 2 alpha + 1 beta electrons in 3 orbitals")
    X = lowdin_orthogonalizer(integrals.S)
    _, v = np.linalg.eigh(X.T @ integrals.hcore @ X)
    core = X @ v
    best = None
    for delta in perturbations:
        try:
            C, e = _rohf_scf(integrals, core @ givens_matrix((delta, delta, delta)), n_alpha, n_beta,
                             max_iter, damping, level_shift, tol)
        except SCFConvergenceError:
            continue
        if best is None or e < best[1] - 1e-10:
            best = (C, e)
    if best is None:
        raise SCFConvergenceError(f"ROHF did not converge in {max_iter} iterations")
    return MolecularOrbitals.restricted(best[0], "rohf"), best[1]


def _rohf_scf(integrals, C, n_alpha, n_beta, max_iter, damping, level_shift, tol):
    S, h, eri = integrals.S, integrals.hcore, integrals.ERI
    X = lowdin_orthogonalizer(S)
    nc, no = n_beta, n_alpha - n_beta
    c_, o_, v_ = slice(0, nc), slice(nc, nc + no), slice(nc + no, None)

    e_old, F_old = None, None
    for _ in range(max_iter):
        Da = C[:, :n_alpha] @ C[:, :n_alpha].T
        Db = C[:, :n_beta] @ C[:, :n_beta].T
        J = _jk(eri, Da + Db)[0]
        Ka, Kb = _jk(eri, Da)[1], _jk(eri, Db)[1]
        Fa, Fb = h + J - Ka, h + J - Kb
        e = 0.5 * (np.sum((h + Fa) * Da) + np.sum((h + Fb) * Db)) + integrals.E_nn

        fa, fb = C.T @ Fa @ C, C.T @ Fb @ C
        R = 0.5 * (fa + fb)
        R[c_, o_] = fb[c_, o_]
        R[o_, c_] = fb[o_, c_]
        R[o_, v_] = fa[o_, v_]
        R[v_, o_] = fa[v_, o_]
        grad = max(np.max(np.abs(R[c_, nc:])), np.max(np.abs(R[o_, v_])))
        if e_old is not None and abs(e - e_old) < tol and grad < 1e-7:
            return C, float(e)

        R[o_, o_] += 0.5 * level_shift * np.eye(no)
        R[v_, v_] += level_shift * np.eye(R.shape[0] - nc - no)
        F = S @ C @ R @ C.T @ S
        if F_old is not None:
            F = (1.0 - damping) * F + damping * F_old
        F_old, e_old = F, e
        _, v = np.linalg.eigh(X.T @ F @ X)
        C = _max_overlap_order(C, X @ v, S)
    raise SCFConvergenceError(f"ROHF did not converge in {max_iter} iterations")


def _max_overlap_order(C_old, C_new, S):
    ov = np.abs(C_old.T @ S @ C_new)
    order, free = [], list(range(C_new.shape[1]))
    for k in range(C_old.shape[1]):
        j = max(free, key=lambda m: ov[k, m])
        order.append(j)
        free.remove(j)
    return C_new[:, order]


def determinant_energy(rh: ReducedHamiltonian, det=HF_DETERMINANT) -> float:
    occ = list(det)
    e = sum(rh.h1[i, i] for i in occ)
    A = rh.antisymmetrized
    e += sum(A[i, j, i, j] for i, j in combinations(occ, 2))
    return float(e) + rh.E_nn


# --- Slater-Condon FCI ------------------------------------------------------

def _parity(seq) -> int:
    seq = list(seq)
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv % 2 else 1


def _align(bra, ket):
    """Maximum-coincidence ordering: returns (holes, particles, common, phase)."""
    common = [o for o in ket if o in bra]
    holes = [o for o in ket if o not in bra]
    parts = [o for o in bra if o not in ket]
    phase = _parity(common + holes) * _parity(common + parts)
    return holes, parts, common, phase


def hamiltonian_matrix(rh: ReducedHamiltonian, dets=DETERMINANTS) -> np.ndarray:
    h, A = rh.h1, rh.antisymmetrized
    n = len(dets)
    H = np.zeros((n, n))
    for I, bra in enumerate(dets):
        for J, ket in enumerate(dets):
            holes, parts, common, phase = _align(bra, ket)
            if len(holes) == 0:
                H[I, J] = determinant_energy(rh, ket) - rh.E_nn
            elif len(holes) == 1:
                (i,), (a,) = holes, parts
                H[I, J] = phase * (h[a, i] + sum(A[a, k, i, k] for k in common))
            elif len(holes) == 2:
                H[I, J] = phase * A[parts[0], parts[1], holes[0], holes[1]]
    return H


# --- second-quantized helpers for RDMs ----------------------------------------

def _annihilate(i, det):
    if det is None or i not in det:
        return None, 0
    k = det.index(i)
    return det[:k] + det[k + 1:], (-1) ** k


def _create(i, det):
    if det is None or i in det:
        return None, 0
    k = sum(1 for o in det if o < i)
    return det[:k] + (i,) + det[k:], (-1) ** k


def apply_operators(ops, det):
    """Apply a product of ('+', i) / ('-', i) operators, rightmost first."""
    sign = 1
    for kind, i in reversed(ops):
        det, s = (_create if kind == "+" else _annihilate)(i, det)
        if det is None:
            return None, 0
        sign *= s
    return det, sign


def ci_one_rdm(ci, dets=DETERMINANTS) -> np.ndarray:
    index = {d: k for k, d in enumerate(dets)}
    D = np.zeros((6, 6))
    for J, ket in enumerate(dets):
        if ci[J] == 0:
            continue
        for p in range(6):
            for q in range(6):
                d, s = apply_operators([("+", p), ("-", q)], ket)
                if d in index:
                    D[p, q] += ci[index[d]] * s * ci[J]
    return D


def ci_two_rdm(ci, dets=DETERMINANTS) -> np.ndarray:
    """15x15 matrix D[(i,j),(k,l)] = <a+_i a+_j a_l a_k> over pairs i<j, k<l."""
    index = {d: k for k, d in enumerate(dets)}
    D = np.zeros((len(PAIRS), len(PAIRS)))
    for J, ket in enumerate(dets):
        if ci[J] == 0:
            continue
        for c, (k, l) in enumerate(PAIRS):
            for r, (i, j) in enumerate(PAIRS):
                d, s = apply_operators([("+", i), ("+", j), ("-", l), ("-", k)], ket)
                if d in index:
                    D[r, c] += ci[index[d]] * s * ci[J]
    return D


def spin_squared(ci, overlap_ab=None, dets=DETERMINANTS) -> float:
    """<S^2> for a 2-alpha/1-beta CI vector.

    ``overlap_ab[p, q]`` is the spatial overlap between alpha MO p and beta MO q
    (identity for restricted orbitals).
    """
    O = np.eye(3) if overlap_ab is None else np.asarray(overlap_ab)
    alpha_of = {p: k for k, (p, s) in enumerate(GPC_ORBITALS) if s == 0}
    beta_of = {p: k for k, (p, s) in enumerate(GPC_ORBITALS) if s == 1}
    amp = 0.0  # S+ maps onto the single all-alpha determinant
    for J, ket in enumerate(dets):
        for p in range(3):
            for q in range(3):
                d, s = apply_operators([("+", alpha_of[p]), ("-", beta_of[q])], ket)
                if d is not None:
                    amp += O[p, q] * s * ci[J]
    return 0.75 + amp**2


# --- FCI driver ---------------------------------------------------------------

@dataclass(frozen=True)
class FciResult:
    energy: float
    ci_vector: np.ndarray
    one_rdm: np.ndarray
    two_rdm: np.ndarray
    natural_occupations: np.ndarray  # all six, sorted descending
    natural_orbitals: tuple  # (alpha, beta) eigenvectors in the MO basis, descending occupation
    spin_squared: float

    @property
    def pinning_defect(self) -> float:
        return pinning_defect(self.natural_occupations)


def pinning_defect(occupations) -> float:
    """Left side of the Borland-Dennis inequality, n5 + n6 - n4, for sorted occupations."""
    n = getattr(occupations, "natural_occupations", occupations)
    n = np.sort(np.asarray(n, dtype=float))[::-1]
    return float(n[4] + n[5] - n[3])


def _sorted_eigh(M, previous=None):
    w, v = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    if previous is not None:
        # reorder (near-)degenerate groups by overlap with the previous vectors
        k = 0
        while k < len(w):
            g = k
            while g + 1 < len(w) and abs(w[g + 1] - w[k]) < 1e-8:
                g += 1
            if g > k:
                block = list(range(k, g + 1))
                ov = np.abs(previous[:, block].T @ v[:, block])
                perm = [block[int(np.argmax(ov[m]))] for m in range(len(block))]
                if sorted(perm) == block:
                    v[:, block] = v[:, perm]
            k = g + 1
    return w, v


def fci(rh: ReducedHamiltonian, previous: FciResult | None = None, overlap_ab=None) -> FciResult:
    """Lowest eigenpair of the 9x9 CI matrix plus its RDMs and natural occupations.

    ``overlap_ab`` (alpha-beta spatial MO overlap) only matters for <S^2> when
    the orbitals are spin-unrestricted.
    """
    H = hamiltonian_matrix(rh)
    w, v = np.linalg.eigh(H)
    ci = v[:, 0]
    ci = ci * np.sign(ci[np.argmax(np.abs(ci))])
    d1 = ci_one_rdm(ci)
    d2 = ci_two_rdm(ci)
    a_idx, b_idx = list(ALPHA_ORBITALS), list(BETA_ORBITALS)
    prev_a = prev_b = None
    if previous is not None:
        prev_a, prev_b = previous.natural_orbitals
    wa, va = _sorted_eigh(d1[np.ix_(a_idx, a_idx)], prev_a)
    wb, vb = _sorted_eigh(d1[np.ix_(b_idx, b_idx)], prev_b)
    occ = np.sort(np.concatenate([wa, wb]))[::-1]
    return FciResult(
        energy=float(w[0]) + rh.E_nn,
        ci_vector=ci,
        one_rdm=d1,
        two_rdm=d2,
        natural_occupations=np.clip(occ, 0.0, 1.0),
        natural_orbitals=(va, vb),
        spin_squared=spin_squared(ci, overlap_ab),
    )
