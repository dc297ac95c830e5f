"""
Three-qubit device emulator.

The state-preparation circuit is, in time order,

    Ry(theta1) on q1,  CNOT q1 -> q3,  Ry(theta2) on q2,  CNOT q2 -> q1

Computational basis states are indexed as 4*q1 + 2*q2 + q3, so the label
|q1 q2 q3> reads left to right.  Gate noise is depolarizing (single-qubit
after each Ry, two-qubit after each CNOT) and readout error is a symmetric
bit flip per qubit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

N_QUBITS = 3
DEFAULT_SHOTS = 2048
# Calibrated parameter domain (theta1 range, theta2 range); its image under the
# circuit covers the pinned face of the polytope exactly once.
THETA_DOMAIN = ((0.0, np.pi / 2), (np.pi / 2, np.pi))
# (control, target) of the two CNOTs, logical qubits 1..3
CIRCUIT_CNOTS = ((1, 3), (2, 1))

_I2 = np.eye(2)
_PAULIS = np.array([_I2, [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


class CalibrationSchemaError(ValueError):
    pass


class CircuitParams(NamedTuple):
    theta1: float
    theta2: float


def _bit(q: int) -> int:
    return N_QUBITS - q  # shift of logical qubit q (1-based) in the basis index


def _embed(gate, q: int) -> np.ndarray:
    ops = [_I2] * N_QUBITS
    ops[q - 1] = gate
    return np.kron(np.kron(ops[0], ops[1]), ops[2])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def cnot(control: int, target: int) -> np.ndarray:
    U = np.zeros((8, 8))
    for x in range(8):
        y = x ^ (1 << _bit(target)) if (x >> _bit(control)) & 1 else x
        U[y, x] = 1.0
    return U


def circuit(params) -> list:
    """Gate list [(8x8 unitary, acting qubits)] in application order."""
    t1, t2 = params
    return [
        (_embed(ry(t1), 1), (1,)),
        (cnot(*CIRCUIT_CNOTS[0]), CIRCUIT_CNOTS[0]),
        (_embed(ry(t2), 2), (2,)),
        (cnot(*CIRCUIT_CNOTS[1]), CIRCUIT_CNOTS[1]),
    ]


def prepare_state(params) -> np.ndarray:
    """Ideal statevector (8 complex amplitudes) from the closed-form circuit output."""
    a, b = params[0] / 2, params[1] / 2
    psi = np.zeros(8, dtype=complex)
    psi[0b000] = np.cos(a) * np.cos(b)
    psi[0b110] = np.cos(a) * np.sin(b)
    psi[0b101] = np.sin(a) * np.cos(b)
    psi[0b011] = np.sin(a) * np.sin(b)
    return psi


def ideal_occupations(theta1, theta2) -> np.ndarray:
    """Noiseless (p1, p2, p3) as a function of the circuit angles; broadcasts."""
    ca, sa = np.cos(np.asarray(theta1) / 2) ** 2, np.sin(np.asarray(theta1) / 2) ** 2
    cb, sb = np.cos(np.asarray(theta2) / 2) ** 2, np.sin(np.asarray(theta2) / 2) ** 2
    return np.stack(np.broadcast_arrays(ca * sb + sa * cb, sb, sa), axis=-1)


def occupations_from_probabilities(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    idx = np.arange(8)
    return np.array([probs[((idx >> _bit(q)) & 1) == 1].sum() for q in (1, 2, 3)])


@dataclass(frozen=True)
class NoiseModel:
    """Error probabilities per logical qubit (index 0 is qubit 1) and per CNOT."""

    readout_flip: tuple = (0.0, 0.0, 0.0)
    single_gate_error: tuple = (0.0, 0.0, 0.0)
    cnot_error: dict = field(default_factory=lambda: {c: 0.0 for c in CIRCUIT_CNOTS})
    date: str | None = None

    def __post_init__(self):
        probs = list(self.readout_flip) + list(self.single_gate_error) + list(self.cnot_error.values())
        if len(self.readout_flip) != N_QUBITS or len(self.single_gate_error) != N_QUBITS:
            raise ValueError("one readout and one gate error per qubit are required")
        if any(not 0.0 <= p <= 0.5 for p in probs):
            raise ValueError("error probabilities must lie in [0, 0.5]")
        missing = [c for c in CIRCUIT_CNOTS if c not in self.cnot_error]
        if missing:
            raise ValueError(f"no CNOT error for pairs {missing}")

    @property
    def has_gate_noise(self) -> bool:
        return any(self.single_gate_error) or any(self.cnot_error[c] for c in CIRCUIT_CNOTS)

    def gate_error(self, qubits) -> float:
        return self.single_gate_error[qubits[0] - 1] if len(qubits) == 1 else self.cnot_error[tuple(qubits)]


def _pauli_strings(qubits) -> np.ndarray:
    """All 4^k Pauli operators on the given qubits as 8x8 matrices, identity first."""
    mats = []
    for code in range(4 ** len(qubits)):
        ops = [_I2.astype(complex)] * N_QUBITS
        for pos, q in enumerate(qubits):
            ops[q - 1] = _PAULIS[(code >> (2 * pos)) & 3]
        mats.append(np.kron(np.kron(ops[0], ops[1]), ops[2]))
    return np.array(mats)


_PAULI_CACHE = {}


def _paulis(qubits):
    key = tuple(qubits)
    if key not in _PAULI_CACHE:
        _PAULI_CACHE[key] = _pauli_strings(key)
    return _PAULI_CACHE[key]


def _readout_matrix(noise: NoiseModel | None) -> np.ndarray:
    M = np.eye(1)
    for q in range(N_QUBITS):
        f = 0.0 if noise is None else noise.readout_flip[q]
        M = np.kron(M, np.array([[1 - f, f], [f, 1 - f]]))
    return M


def density_matrix(params, noise: NoiseModel | None = None) -> np.ndarray:
    """8x8 density matrix after the noisy circuit (before readout)."""
    rho = np.zeros((8, 8), dtype=complex)
    rho[0, 0] = 1.0
    for U, qubits in circuit(params):
        rho = U @ rho @ U.conj().T
        p = 0.0 if noise is None else noise.gate_error(qubits)
        if p > 0:
            P = _paulis(qubits)
            twirl = np.einsum("kij,jl,kml->im", P[1:], rho, P[1:].conj())
            rho = (1 - p) * rho + p / (len(P) - 1) * twirl
    return rho


def outcome_probabilities(params, noise: NoiseModel | None = None) -> np.ndarray:
    """Exact distribution of reported 3-bit outcomes, readout error included."""
    probs = np.clip(np.real(np.diag(density_matrix(params, noise))), 0.0, None)
    return _readout_matrix(noise) @ probs


class MeasurementRecord(NamedTuple):
    counts: dict | None  # bitstring 'q1q2q3' -> count; None for exact expectations
    shots: int | None
    seed: object
    occupations: np.ndarray  # (p1, p2, p3)
    params: tuple | None = None


def _counts_dict(outcomes_hist) -> dict:
    return {format(k, "03b"): int(c) for k, c in enumerate(outcomes_hist) if c}


def _sample_trajectories(params, noise, shots, rng) -> np.ndarray:
    psi = np.zeros((shots, 8), dtype=complex)
    psi[:, 0] = 1.0
    for U, qubits in circuit(params):
        psi = psi @ U.T
        p = 0.0 if noise is None else noise.gate_error(qubits)
        if p > 0:
            P = _paulis(qubits)
            hit = rng.random(shots) < p
            which = rng.integers(1, len(P), size=shots)
            k = np.where(hit, which, 0)
            psi = np.einsum("sij,sj->si", P[k], psi)
    probs = np.abs(psi) ** 2
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(shots)[:, None] * cdf[:, -1:]
    outcome = np.minimum((u > cdf).sum(axis=1), 7)
    if noise is not None:
        for q in (1, 2, 3):
            flip = rng.random(shots) < noise.readout_flip[q - 1]
            outcome = outcome ^ (flip.astype(int) << _bit(q))
    return np.bincount(outcome, minlength=8)


def measure(
    target,
    shots: int | None = DEFAULT_SHOTS,
    noise: NoiseModel | None = None,
    seed=None,
    method: str = "trajectory",
) -> MeasurementRecord:
    """Computational-basis measurement of the circuit at ``target`` = (theta1, theta2).

    ``target`` may also be an explicit 8-amplitude statevector, in which case
    only readout noise can be applied.  ``shots=None`` returns exact
    expectation values.  ``method`` is ``"trajectory"`` (per-shot Pauli
    insertion) or ``"density"`` (multinomial draw from the exact noisy
    distribution); both sample the same outcome distribution.
    """
    if shots is not None and (int(shots) != shots or shots < 1):
        raise ValueError("shots must be a positive integer or None")
    target_arr = np.asarray(target)
    if target_arr.shape == (8,):
        if noise is not None and noise.has_gate_noise:
            raise ValueError("gate noise needs circuit parameters, not a statevector")
        probs = _readout_matrix(noise) @ (np.abs(target_arr) ** 2)
        params = None
        if shots is not None and method == "trajectory":
            method = "density"  # no gates to trajectory-sample
    else:
        params = CircuitParams(float(target_arr[0]), float(target_arr[1]))
        probs = None

    if shots is None:
        if probs is None:
            probs = outcome_probabilities(params, noise)
        return MeasurementRecord(None, None, seed, occupations_from_probabilities(probs), params)

    rng = np.random.default_rng(seed)
    if method == "density":
        if probs is None:
            probs = outcome_probabilities(params, noise)
        hist = rng.multinomial(int(shots), probs / probs.sum())
    elif method == "trajectory":
        hist = _sample_trajectories(params, noise, int(shots), rng)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return MeasurementRecord(_counts_dict(hist), int(shots), seed,
                             occupations_from_probabilities(hist / shots), params)


@dataclass(frozen=True)
class EmulatedDevice:
    noise: NoiseModel | None = None
    method: str = "trajectory"

    def measure(self, params, shots: int | None = DEFAULT_SHOTS, seed=None) -> MeasurementRecord:
        return measure(params, shots=shots, noise=self.noise, seed=seed, method=self.method)


# --- calibration tables ----------------------------------------------------

BUNDLED_CALIBRATIONS = {"ibmqx4": "data/ibmqx4_calibration.csv"}


def _read_calibration_text(source) -> str:
    key = str(source)
    if key in BUNDLED_CALIBRATIONS:
        return resources.files("gpcsolve").joinpath(BUNDLED_CALIBRATIONS[key]).read_text()
    return Path(source).read_text()


def load_calibration(source="ibmqx4", date=1) -> NoiseModel:
    """Build a NoiseModel from one date column of a calibration CSV.

    Layout::

        qubit_map,<device qubit for logical 1>,<... 2>,<... 3>
        kind,target,<date 1>,<date 2>,...
        readout,Q0,...        (units of 1e-3)
        gate,Q0,...
        cnot,Q1-Q0,...        (control-target)

    ``source`` is a path or the name of a bundled table.  A CNOT whose
    direction is absent falls back to the reverse-direction entry.
    """
    rows = [r for r in csv.reader(io.StringIO(_read_calibration_text(source))) if r and any(r)]
    if len(rows) < 2 or rows[0][0] != "qubit_map" or rows[1][:2] != ["kind", "target"]:
        raise CalibrationSchemaError("calibration file must start with qubit_map and kind,target header rows")
    device_qubits = [q.strip() for q in rows[0][1:1 + N_QUBITS]]
    if len(device_qubits) != N_QUBITS:
        raise CalibrationSchemaError("qubit_map must name three device qubits")
    dates = [d.strip() for d in rows[1][2:]]
    if str(date) not in dates:
        raise CalibrationSchemaError(f"date column {date!r} not found (have {dates})")
    col = 2 + dates.index(str(date))
    table = {}
    for r in rows[2:]:
        try:
            table[(r[0].strip(), r[1].strip())] = float(r[col]) * 1e-3
        except (IndexError, ValueError) as exc:
            raise CalibrationSchemaError(f"malformed calibration row {r}") from exc

    def lookup(kind, target):
        if (kind, target) not in table:
            raise CalibrationSchemaError(f"missing {kind} row for {target}")
        return table[(kind, target)]

    readout = tuple(lookup("readout", q) for q in device_qubits)
    gate = tuple(lookup("gate", q) for q in device_qubits)
    logical = {q: i + 1 for i, q in enumerate(device_qubits)}
    cnots = {}
    for kind, target in table:
        if kind == "cnot":
            c, _, t = target.partition("-")
            if c in logical and t in logical:
                cnots[(logical[c], logical[t])] = table[(kind, target)]
    for c, t in CIRCUIT_CNOTS:
        if (c, t) in cnots:
            continue
        fwd = f"{device_qubits[c - 1]}-{device_qubits[t - 1]}"
        rev = f"{device_qubits[t - 1]}-{device_qubits[c - 1]}"
        if ("cnot", rev) not in table:
            raise CalibrationSchemaError(f"missing cnot row for {fwd} (or {rev})")
        cnots[(c, t)] = table[("cnot", rev)]
    return NoiseModel(readout, gate, cnots, date=str(date))
