"""
One- and two-electron integrals over contracted s-type Gaussians.

Only hydrogen chains in a minimal basis are needed, so every basis function is
an s-shell and all integrals have closed forms in terms of the Boys function
F_0.  Lengths are in bohr and energies in hartree throughout; angstrom only
appears in `Geometry.linear_h3`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import erf

BOHR_PER_ANGSTROM = 1.8897259886
BOYS_SERIES_CUTOFF = 1e-10


class SingularGeometryError(ValueError):
    pass


class LinearDependenceError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    charges: tuple[int, ...]
    coords: np.ndarray  # (n_atoms, 3), bohr

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1, 3)
        if len(self.charges) != len(coords):
            raise ValueError("one charge per atom is required")
        if any(z != 1 for z in self.charges):
            raise ValueError("only hydrogen atoms are supported")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_atoms(cls, atoms):
        """Build from an iterable of ``(charge, (x, y, z))`` in bohr."""
        atoms = list(atoms)
        return cls(tuple(int(z) for z, _ in atoms), np.array([xyz for _, xyz in atoms], dtype=float))

    @classmethod
    def linear_h3(cls, r_angstrom: float) -> "Geometry":
        """Symmetric linear H3 with both outer atoms at distance R (angstrom) from the centre."""
        r = r_angstrom * BOHR_PER_ANGSTROM
        return cls((1, 1, 1), np.array([[-r, 0.0, 0.0], [0.0, 0.0, 0.0], [r, 0.0, 0.0]]))

    @property
    def natoms(self) -> int:
        return len(self.charges)

    def translated(self, shift) -> "Geometry":
        return Geometry(self.charges, self.coords + np.asarray(shift, dtype=float))

    def reversed(self) -> "Geometry":
        return Geometry(self.charges[::-1], self.coords[::-1].copy())


@dataclass(frozen=True)
class Shell:
    exponents: np.ndarray
    coefficients: np.ndarray  # includes primitive normalization; shell self-overlap is 1

    @classmethod
    def normalized(cls, exponents, coefficients) -> "Shell":
        a = np.asarray(exponents, dtype=float)
        d = np.asarray(coefficients, dtype=float) * (2.0 * a / math.pi) ** 0.75
        p = a[:, None] + a[None, :]
        self_overlap = np.einsum("i,j,ij->", d, d, (math.pi / p) ** 1.5)
        return cls(a, d / math.sqrt(self_overlap))


@dataclass(frozen=True)
class BasisSet:
    name: str
    shells: dict  # element symbol -> list[Shell]

    def functions(self, geometry: Geometry):
        """List of (centre, shell) pairs in atom order."""
        out = []
        for z, centre in zip(geometry.charges, geometry.coords):
            symbol = {1: "H"}[z]
            for shell in self.shells[symbol]:
                out.append((centre, shell))
        return out


def load_basis(path=None) -> BasisSet:
    """Read a basis-set JSON file; defaults to the bundled STO-3G hydrogen entry."""
    if path is None:
        text = resources.files("gpcsolve").joinpath("data/sto-3g_H.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    shells = []
    for entry in data["shells"]:
        if entry["type"].lower() != "s":
            raise ValueError(f"unsupported shell type {entry['type']!r}; only s shells are implemented")
        prims = np.asarray(entry["primitives"], dtype=float)
        shells.append(Shell.normalized(prims[:, 0], prims[:, 1]))
    return BasisSet(data.get("name", "custom"), {data["element"]: shells})


def boys_f0(t):
    """Zeroth-order Boys function F_0(t) = int_0^1 exp(-t u^2) du.

    Accepts scalars or arrays.  Below ``BOYS_SERIES_CUTOFF`` a short Taylor
    series replaces the closed form.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise ValueError("Boys function argument must be finite and non-negative")
    small = t_arr < BOYS_SERIES_CUTOFF
    safe = np.where(small, 1.0, t_arr)
    out = np.where(
        small,
        1.0 - t_arr / 3.0 + t_arr**2 / 10.0,
        0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe)),
    )
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IntegralSet:
    S: np.ndarray
    T_kin: np.ndarray
    V_nuc: np.ndarray
    ERI: np.ndarray  # chemists' notation (pq|rs)
    E_nn: float

    @property
    def hcore(self) -> np.ndarray:
        return self.T_kin + self.V_nuc

    @property
    def nbasis(self) -> int:
        return self.S.shape[0]


def _primitive_table(functions):
    # Flatten to primitive arrays tagged by basis-function index.
    idx, alpha, coef, centre = [], [], [], []
    for mu, (c, shell) in enumerate(functions):
        for a, d in zip(shell.exponents, shell.coefficients):
            idx.append(mu)
            alpha.append(a)
            coef.append(d)
            centre.append(c)
    return np.array(idx), np.array(alpha), np.array(coef), np.array(centre).reshape(-1, 3)


def build_integrals(geometry: Geometry, basis: BasisSet | None = None) -> IntegralSet:
    if geometry.natoms < 1:
        raise ValueError("at least one atom is required")
    basis = basis or load_basis()
    coords = geometry.coords
    charges = np.asarray(geometry.charges, dtype=float)
    if geometry.natoms > 1:
        dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
        iu = np.triu_indices(geometry.natoms, 1)
        if np.min(dist[iu]) < 1e-8:
            raise SingularGeometryError("two atoms occupy the same position")
        e_nn = float(np.sum(charges[iu[0]] * charges[iu[1]] / dist[iu]))
    else:
        e_nn = 0.0

    functions = basis.functions(geometry)
    n = len(functions)
    fidx, a, d, A = _primitive_table(functions)
    m = len(a)

    # Gaussian product quantities for every primitive pair.
    p = a[:, None] + a[None, :]
    mu = a[:, None] * a[None, :] / p
    AB2 = np.sum((A[:, None, :] - A[None, :, :]) ** 2, axis=-1)
    P = (a[:, None, None] * A[:, None, :] + a[None, :, None] * A[None, :, :]) / p[..., None]
    K = np.exp(-mu * AB2)
    dd = d[:, None] * d[None, :]

    s_prim = (np.pi / p) ** 1.5 * K
    t_prim = mu * (3.0 - 2.0 * mu * AB2) * s_prim
    v_prim = np.zeros((m, m))
    for z, C in zip(charges, coords):
        PC2 = np.sum((P - C) ** 2, axis=-1)
        v_prim -= z * 2.0 * np.pi / p * K * boys_f0(p * PC2)

    # two-electron primitives: (ij|kl)
    pq = p[:, :, None, None] * p[None, None, :, :]
    ppq = p[:, :, None, None] + p[None, None, :, :]
    PQ2 = np.sum((P[:, :, None, None, :] - P[None, None, :, :, :]) ** 2, axis=-1)
    g_prim = (
        2.0 * np.pi**2.5 / (pq * np.sqrt(ppq))
        * K[:, :, None, None] * K[None, None, :, :]
        * boys_f0(pq / ppq * PQ2)
    )

    # contract primitives onto basis functions
    B = np.zeros((n, m))
    B[fidx, np.arange(m)] = 1.0
    S = B @ (dd * s_prim) @ B.T
    T = B @ (dd * t_prim) @ B.T
    V = B @ (dd * v_prim) @ B.T
    G = np.einsum(
        "ijkl,Pi,Qj,Rk,Sl->PQRS",
        dd[:, :, None, None] * dd[None, None, :, :] * g_prim, B, B, B, B, optimize=True,
    )

    sym = lambda M: 0.5 * (M + M.T)
    return IntegralSet(S=sym(S), T_kin=sym(T), V_nuc=sym(V), ERI=G, E_nn=e_nn)


def lowdin_orthogonalizer(S: np.ndarray, min_eigenvalue: float = 1e-8) -> np.ndarray:
    """Symmetric orthogonalizer X = S^(-1/2)."""
    S = np.asarray(S, dtype=float)
    w, v = np.linalg.eigh(S)
    if w[0] < min_eigenvalue:
        raise LinearDependenceError(f"overlap matrix nearly singular (smallest eigenvalue {w[0]:.3e})")
    return (v * w**-0.5) @ v.T


def overlap_sqrt(S: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(np.asarray(S, dtype=float))
    return (v * np.sqrt(w)) @ v.T
