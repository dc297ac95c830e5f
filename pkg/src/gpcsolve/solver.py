"""
Hybrid loop: a Nelder-Mead search over the circuit angles (quantum stage)
alternating with a Nelder-Mead search over Givens orbital rotations
(classical stage), plus dissociation-curve scans built on it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .hamiltonian import (
    GivensAngles,
    MolecularOrbitals,
    ReducedHamiltonian,
    apply_givens,
    build_reduced_hamiltonian,
    energy,
)
from .integrals import Geometry, IntegralSet, build_integrals, lowdin_orthogonalizer
from .mitigation import MitigationMap, calibrate, mitigate
from .qdevice import DEFAULT_SHOTS, THETA_DOMAIN, EmulatedDevice, NoiseModel
from .rdm import (
    PINNED_DETERMINANTS,
    OccupationVector,
    SignAssignment,
    TwoRDM,
    complete_occupations,
    contract_to_1rdm,
    mott_tau,
    reconstruct_2rdm,
    sign_map,
)
from .reference import DETERMINANTS, HF_DETERMINANT, fci, hamiltonian_matrix, rohf

DEFAULT_SIMPLEX = ((0.3, 2.0), (0.6, 2.0), (0.3, 2.4))
NM_COEFFS = (1.0, 2.0, 0.5, 0.5)  # reflection, expansion, contraction, shrink


class OptimizerAbort(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


# --- Nelder-Mead -------------------------------------------------------------

@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    nevals: int
    converged: bool
    history: list  # (x, f) per evaluation, in order
    best_history: list  # best f after each evaluation


def nelder_mead(
    f: Callable,
    simplex,
    radius: float = np.pi / 1800,
    max_evals: int = 400,
    bounds=None,
    fspread: float | None = None,
    coeffs=NM_COEFFS,
) -> NMResult:
    """Minimize ``f`` from an explicit initial simplex.

    Stops when every vertex lies within ``radius`` of the simplex centroid,
    or (if given) when the spread of vertex values drops below ``fspread``,
    or after ``max_evals`` evaluations.  Trial points are clipped into
    ``bounds`` (a sequence of (lo, hi)) before evaluation.  Ties are broken by
    insertion order, so the run is deterministic for a deterministic ``f``.
    """
    rho, chi, gamma, sigma = coeffs
    lo = hi = None
    if bounds is not None:
        lo, hi = np.array(bounds, dtype=float).T
    history, best_history = [], []
    counter = [0]

    def clip(x):
        x = np.asarray(x, dtype=float)
        return np.clip(x, lo, hi) if lo is not None else x

    def evaluate(x):
        x = clip(x)
        val = float(f(x))
        history.append((x.copy(), val))
        best_history.append(min(val, best_history[-1]) if best_history else val)
        if not np.isfinite(val):
            raise OptimizerAbort(f"objective returned {val} at {x}", history)
        counter[0] += 1
        return (val, counter[0], x)

    verts = [evaluate(x) for x in simplex]

    def done():
        xs = np.array([v[2] for v in verts])
        if np.max(np.linalg.norm(xs - xs.mean(axis=0), axis=1)) < radius:
            return True
        return fspread is not None and verts[-1][0] - verts[0][0] < fspread

    converged = False
    while True:
        verts.sort(key=lambda v: (v[0], v[1]))
        if done():
            converged = True
            break
        if len(history) >= max_evals:
            break
        xs = np.array([v[2] for v in verts])
        c = xs[:-1].mean(axis=0)
        worst = verts[-1]
        r = evaluate(c + rho * (c - worst[2]))
        if r[0] < verts[0][0]:
            e = evaluate(c + chi * (r[2] - c))
            verts[-1] = e if e[0] < r[0] else r
        elif r[0] < verts[-2][0]:
            verts[-1] = r
        else:
            if r[0] < worst[0]:
                k = evaluate(c + gamma * (r[2] - c))
                accept = k[0] <= r[0]
            else:
                k = evaluate(c + gamma * (worst[2] - c))
                accept = k[0] < worst[0]
            if accept:
                verts[-1] = k
            else:
                best = verts[0]
                verts = [best] + [evaluate(best[2] + sigma * (v[2] - best[2])) for v in verts[1:]]
    best = verts[0]
    return NMResult(best[2], best[0], len(history), converged, history, best_history)


# --- configuration and traces --------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    mode: str = "exact"  # exact | sampled | noisy
    shots: int | None = DEFAULT_SHOTS
    noise: NoiseModel | None = None
    seed: int = 0
    simplex_radius: float = 0.1 * np.pi / 180
    macro_threshold: float | None = None  # None: 1e-6 in exact mode, 1e-4 otherwise
    max_macro: int | None = None  # None: 20 in exact mode, 10 otherwise
    orbital_tol: float = 1e-9
    grid_order: int = 2
    mitigation: bool = True
    restricted_orbitals: bool = False
    initial_simplex: tuple = DEFAULT_SIMPLEX
    warm_step: float = 0.1
    extrapolate: bool = True
    max_extrapolation: float = 4.0
    max_quantum_evals: int = 300
    max_orbital_evals: int = 3000
    sampling_method: str = "trajectory"

    def __post_init__(self):
        if self.mode not in ("exact", "sampled", "noisy"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "noisy" and self.noise is None:
            raise ValueError("noisy mode needs a noise model")
        if self.mode != "exact" and self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")
        if min(self.simplex_radius, self.threshold, self.orbital_tol) <= 0 or self.macro_limit < 1:
            raise ValueError("solver thresholds must be positive")

    @property
    def threshold(self) -> float:
        if self.macro_threshold is not None:
            return self.macro_threshold
        return 1e-6 if self.mode == "exact" else 1e-4

    @property
    def macro_limit(self) -> int:
        if self.max_macro is not None:
            return self.max_macro
        return 20 if self.mode == "exact" else 10

    @property
    def effective_shots(self) -> int | None:
        return None if self.mode == "exact" else self.shots

    @property
    def effective_noise(self) -> NoiseModel | None:
        return self.noise if self.mode == "noisy" else None


@dataclass
class Evaluation:
    stage: str  # "quantum" | "orbital"
    macro: int
    x: list
    energy: float
    raw: list | None = None  # measured (p1, p2, p3)
    pinned: list | None = None  # mitigated (n4, n5, n6)


@dataclass
class SolverTrace:
    evaluations: list = field(default_factory=list)
    best_history: list = field(default_factory=list)  # best energy after each evaluation
    macro_boundaries: list = field(default_factory=list)  # evaluation count at the end of each macro
    macro_energies: list = field(default_factory=list)  # (E_quantum, E_orbital, best so far)

    def add(self, ev: Evaluation):
        self.evaluations.append(ev)
        prev = self.best_history[-1] if self.best_history else np.inf
        self.best_history.append(min(prev, ev.energy))

    def to_dict(self) -> dict:
        return {
            "evaluations": [asdict(e) for e in self.evaluations],
            "best_history": self.best_history,
            "macro_boundaries": self.macro_boundaries,
            "macro_energies": self.macro_energies,
        }


@dataclass
class QuantumResult:
    energy: float
    occupations: OccupationVector
    signs: SignAssignment
    d2: TwoRDM
    raw: np.ndarray


@dataclass
class HybridContext:
    """Everything the quantum stage needs at one geometry."""

    rh: ReducedHamiltonian
    device: EmulatedDevice
    mitigation_map: MitigationMap | None
    shots: int | None
    rng: np.random.Generator


def quantum_energy(theta, ctx: HybridContext) -> QuantumResult:
    """Prepare, measure, mitigate, reconstruct and evaluate the energy at ``theta``."""
    seed = None if ctx.shots is None else int(ctx.rng.integers(2**63))
    record = ctx.device.measure(tuple(theta), shots=ctx.shots, seed=seed)
    n4, n5, n6 = mitigate(ctx.mitigation_map, record)
    occ = complete_occupations(n4, n5, n6)
    signs = sign_map(*theta)
    d2 = reconstruct_2rdm(occ, signs)
    return QuantumResult(energy(ctx.rh, d2), occ, signs, d2, np.asarray(record.occupations))


def align_phases(integrals: IntegralSet, mos: MolecularOrbitals) -> MolecularOrbitals:
    """Flip beta orbital signs so that <A|H|B> >= 0 and <A|H|C> <= 0.

    With these couplings the default amplitude signs (+, -, +) lower the
    energy away from the Hartree-Fock determinant.
    """
    rh = build_reduced_hamiltonian(integrals, mos, check=False)
    H = hamiltonian_matrix(rh)
    ia, ib, ic = (DETERMINANTS.index(d) for d in PINNED_DETERMINANTS)
    cb = mos.c_beta.copy()
    if H[ia, ib] < 0:
        cb[:, 1] *= -1  # spin orbital 5 occurs only in B
    if H[ia, ic] > 0:
        cb[:, 2] *= -1  # spin orbital 6 occurs only in C
    return MolecularOrbitals(mos.c_alpha.copy(), cb, mos.label)


def orbital_stage(
    d2,
    mos: MolecularOrbitals,
    integrals: IntegralSet,
    restricted: bool = False,
    tol: float = 1e-9,
    max_evals: int = 3000,
    step: float = 0.1,
    record: Callable | None = None,
):
    """Minimize Tr(K(angles) D2) + E_nn over Givens angles with D2 held fixed.

    Nelder-Mead is restarted from its own result until a restart gains less
    than ``tol``.  Returns (rotated orbitals, energy, angles).
    """
    nvar = 3 if restricted else 6
    e_in = energy(build_reduced_hamiltonian(integrals, mos, check=False), d2)

    def objective(x):
        rotated = apply_givens(mos, GivensAngles.from_vector(x, restricted))
        e = energy(build_reduced_hamiltonian(integrals, rotated, check=False), d2)
        if record is not None:
            record(x, e)
        return e

    x, e = np.zeros(nvar), e_in
    used = 0
    while used < max_evals:
        simplex = [x] + [x + step * np.eye(nvar)[i] for i in range(nvar)]
        res = nelder_mead(objective, simplex, radius=1e-10, max_evals=max_evals - used, fspread=tol)
        used += res.nevals
        gain = e - res.fun
        if res.fun < e:
            x, e = res.x, res.fun
        if gain < tol:
            break
        step = max(0.5 * step, 1e-3)
    rotated = apply_givens(mos, GivensAngles.from_vector(x, restricted))
    return rotated.reorthonormalized(integrals.S), e, x


@dataclass
class MacroResult:
    energy: float
    d2: TwoRDM
    occupations: OccupationVector
    signs: SignAssignment
    theta: np.ndarray
    mos: MolecularOrbitals
    trace: SolverTrace
    converged: bool
    macro_iterations: int


def _device_for(config: SolverConfig) -> EmulatedDevice:
    return EmulatedDevice(config.effective_noise, config.sampling_method)


def build_mitigation_map(config: SolverConfig, seed=None) -> MitigationMap | None:
    if not config.mitigation:
        return None
    return calibrate(_device_for(config), shots=config.effective_shots, seed=seed, grid_order=config.grid_order)


def macro_loop(
    config: SolverConfig,
    geometry: Geometry | None = None,
    *,
    integrals: IntegralSet | None = None,
    mos: MolecularOrbitals | None = None,
    theta0=None,
    mitigation_map: MitigationMap | None = None,
    seed=None,
) -> MacroResult:
    """Alternate quantum and orbital stages until they agree within the macro threshold."""
    if integrals is None:
        integrals = build_integrals(geometry)
    if mos is None:
        mos, _ = rohf(integrals)
    seq = np.random.SeedSequence(config.seed if seed is None else seed)
    calib_seq, run_seq = seq.spawn(2)
    if mitigation_map is None and config.mitigation:
        mitigation_map = build_mitigation_map(config, calib_seq)
    device = _device_for(config)
    rng = np.random.default_rng(run_seq)
    trace = SolverTrace()

    theta = None if theta0 is None else np.asarray(theta0, dtype=float)
    best = None
    converged = False
    gains = []  # energy decrease credited to each macro iteration
    prev_step = None  # (orbital angles, theta change) of the previous macro
    it = 0
    for it in range(1, config.macro_limit + 1):
        mos = align_phases(integrals, mos)
        ctx = HybridContext(build_reduced_hamiltonian(integrals, mos), device, mitigation_map,
                            config.effective_shots, rng)
        results = {}

        def objective(x):
            q = quantum_energy(x, ctx)
            results[len(trace.evaluations)] = q
            trace.add(Evaluation("quantum", it, list(map(float, x)), q.energy,
                                 list(map(float, q.raw)), list(map(float, q.occupations.pinned))))
            return q.energy

        if theta is None:
            simplex = [np.array(p) for p in config.initial_simplex]
        else:
            s = config.warm_step
            simplex = [theta, theta + [s, 0.0], theta + [0.0, s]]
        start = len(trace.evaluations)
        res = nelder_mead(objective, simplex, config.simplex_radius, config.max_quantum_evals, THETA_DOMAIN)
        k_best = start + min(range(res.nevals), key=lambda k: (res.history[k][1], k))
        q = results[k_best]
        d_theta = res.x - (theta if theta is not None else res.x)
        theta = res.x

        def record(x, e):
            trace.add(Evaluation("orbital", it, list(map(float, x)), float(e)))

        new_mos, e_orb, angles = orbital_stage(q.d2, mos, integrals, config.restricted_orbitals,
                                               config.orbital_tol, config.max_orbital_evals, record=record)
        gains.append((q.energy if best is None else best.energy) - e_orb)
        if best is None or e_orb < best.energy:
            best = MacroResult(e_orb, q.d2, q.occupations, q.signs, theta.copy(), new_mos, trace, False, it)
        mos = new_mos
        trace.macro_boundaries.append(len(trace.evaluations))
        trace.macro_energies.append((q.energy, e_orb, best.energy))
        if abs(q.energy - e_orb) < config.threshold and _remaining(gains) < config.threshold:
            converged = True
            break

        if config.extrapolate and prev_step is not None:
            ratio, cos = _step_ratio(angles, prev_step[0])
            if cos > 0.8 and 0.0 < ratio < 1.0:
                f = min(ratio / (1.0 - ratio), config.max_extrapolation)
                mos = apply_givens(mos, GivensAngles.from_vector(f * angles, config.restricted_orbitals))
                mos = mos.reorthonormalized(integrals.S)
                lo, hi = np.array(THETA_DOMAIN).T
                theta = np.clip(theta + f * d_theta, lo, hi)
                angles = None  # next step starts a fresh pair
        prev_step = None if angles is None else (angles, d_theta)
        if best.energy < e_orb - config.threshold:
            # an extrapolated step overshot: resume from the best point
            mos, theta, prev_step = best.mos, best.theta.copy(), None
    best.converged = converged
    best.macro_iterations = it
    return best


def _step_ratio(step, prev):
    n1, n0 = np.linalg.norm(step), np.linalg.norm(prev)
    if n0 == 0 or n1 == 0:
        return 0.0, 0.0
    return n1 / n0, float(step @ prev) / (n1 * n0)


def _remaining(gains) -> float:
    """Geometric-series estimate of the energy still to be gained."""
    if len(gains) < 2:
        return np.inf
    g1, g0 = gains[-1], gains[-2]
    if g1 <= 0:
        return 0.0
    r = g1 / g0 if g0 > 0 else np.inf
    return g1 * r / (1.0 - r) if r < 1.0 else np.inf


# --- scans -----------------------------------------------------------------------

@dataclass
class ScanRecord:
    R: float
    E_hybrid: float
    E_fci: float
    E_rohf: float
    error_mH: float
    tau_hybrid: float
    tau_fci: float
    tau_hf: float
    n4: float
    n5: float
    n6: float
    macro_iters: int
    converged: bool
    seed: list
    theta: list
    error: str | None = None
    trace: dict | None = None


def hf_tau(integrals: IntegralSet, mos: MolecularOrbitals) -> float:
    d1 = np.diag([1.0 if i in HF_DETERMINANT else 0.0 for i in range(6)])
    return mott_tau(d1, mos, lowdin_orthogonalizer(integrals.S))


def _scan_point(config, R, index, mos_guess, theta0, keep_trace):
    seed = [int(config.seed), int(index)]
    integrals = build_integrals(Geometry.linear_h3(R))
    X = lowdin_orthogonalizer(integrals.S)
    mos_rohf, e_rohf = rohf(integrals)
    ref = fci(build_reduced_hamiltonian(integrals, mos_rohf))
    tau_fci = mott_tau(ref.one_rdm, mos_rohf, X)
    start = mos_rohf if mos_guess is None else mos_guess.reorthonormalized(integrals.S)
    res = macro_loop(config, integrals=integrals, mos=start, theta0=theta0, seed=seed)
    d1 = contract_to_1rdm(res.d2)
    rec = ScanRecord(
        R=float(R), E_hybrid=res.energy, E_fci=ref.energy, E_rohf=e_rohf,
        error_mH=(res.energy - ref.energy) * 1e3,
        tau_hybrid=mott_tau(d1, res.mos, X), tau_fci=tau_fci, tau_hf=hf_tau(integrals, mos_rohf),
        n4=res.occupations.n4, n5=res.occupations.n5, n6=res.occupations.n6,
        macro_iters=res.macro_iterations, converged=res.converged, seed=seed,
        theta=[float(t) for t in res.theta], trace=res.trace.to_dict() if keep_trace else None,
    )
    return rec, res


def _failed(config, R, index, exc) -> ScanRecord:
    nan = float("nan")
    return ScanRecord(float(R), nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, 0, False,
                      [int(config.seed), int(index)], [], error=f"{type(exc).__name__}: {exc}")


def scan(config: SolverConfig, R_values, threads: int | None = None, keep_trace: bool = False) -> list:
    """Run the hybrid solver at each bond distance R (angstrom).

    Sequential scans warm-start the angles and orbitals from the previous
    point.  With more than one thread (argument or GPCSOLVE_THREADS) points
    run independently from ROHF orbitals; per-point seeds are the same
    either way.  Failures are recorded and the scan continues.
    """
    R_values = [float(r) for r in R_values]
    if any(r <= 0.3 for r in R_values):
        raise ValueError("R must exceed 0.3 Å")
    if threads is None:
        threads = int(os.environ.get("GPCSOLVE_THREADS", "1") or 1)
    if threads > 1:
        def run(args):
            i, R = args
            try:
                return _scan_point(config, R, i, None, None, keep_trace)[0]
            except Exception as exc:  # recorded per point
                return _failed(config, R, i, exc)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, enumerate(R_values)))

    records, mos, theta = [], None, None
    for i, R in enumerate(R_values):
        try:
            rec, res = _scan_point(config, R, i, mos, theta, keep_trace)
            mos, theta = res.mos, res.theta
        except Exception as exc:
            rec = _failed(config, R, i, exc)
        records.append(rec)
    return records
