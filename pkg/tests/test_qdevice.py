import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gpcsolve.qdevice import (
    CIRCUIT_CNOTS,
    CalibrationSchemaError,
    EmulatedDevice,
    NoiseModel,
    density_matrix,
    ideal_occupations,
    load_calibration,
    measure,
    outcome_probabilities,
    prepare_state,
)

from oracles import circuit_state

angle = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)
UNREACHABLE = [0b001, 0b010, 0b100, 0b111]


def basis(bits):
    v = np.zeros(8)
    v[int(bits, 2)] = 1.0
    return v


@pytest.mark.parametrize("theta, bits", [((0.0, 0.0), "000"), ((np.pi, 0.0), "101"), ((np.pi, np.pi), "011"),
                                         ((0.0, np.pi), "110")])
def test_corner_states(theta, bits):
    assert_allclose(prepare_state(theta), basis(bits), atol=1e-15)
    assert_allclose(circuit_state(*theta), basis(bits), atol=1e-15)


@given(angle, angle)
@settings(max_examples=200, deadline=None)
def test_state_matches_gate_product(t1, t2):
    psi = prepare_state((t1, t2))
    assert np.max(np.abs(psi - circuit_state(t1, t2))) < 1e-12
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    assert all(psi[k] == 0 for k in UNREACHABLE)


@given(angle, angle)
@settings(max_examples=100, deadline=None)
def test_ideal_occupations_formula(t1, t2):
    a, b = t1 / 2, t2 / 2
    expected = [np.cos(a) ** 2 * np.sin(b) ** 2 + np.sin(a) ** 2 * np.cos(b) ** 2, np.sin(b) ** 2, np.sin(a) ** 2]
    assert_allclose(ideal_occupations(t1, t2), expected, atol=1e-14)
    probs = np.abs(circuit_state(t1, t2)) ** 2
    idx = np.arange(8)
    from_state = [probs[(idx >> s) & 1 == 1].sum() for s in (2, 1, 0)]
    assert_allclose(ideal_occupations(t1, t2), from_state, atol=1e-12)


def test_ideal_occupations_broadcast():
    t = np.linspace(0, np.pi, 5)
    out = ideal_occupations(t, t[::-1])
    assert out.shape == (5, 3)


def test_deterministic_state_counts():
    rec = measure(basis("000"), shots=2048, seed=1)
    assert rec.counts == {"000": 2048}
    assert rec.shots == 2048
    assert_allclose(rec.occupations, 0.0)


def test_counts_sum_and_range():
    rec = measure((1.1, 2.3), shots=999, seed=4)
    assert sum(rec.counts.values()) == 999
    assert np.all((rec.occupations >= 0) & (rec.occupations <= 1))


@pytest.mark.parametrize("method", ["trajectory", "density"])
def test_sampled_occupations_within_four_sigma(method):
    shots = 10**6
    rec = measure((np.pi / 2, np.pi / 2), shots=shots, seed=2024, method=method)
    p = ideal_occupations(np.pi / 2, np.pi / 2)
    sigma = np.sqrt(p * (1 - p) / shots)
    assert np.all(np.abs(rec.occupations - p) < 4 * sigma)


def test_readout_flip_on_deterministic_zero():
    noise = NoiseModel(readout_flip=(0.0, 0.02, 0.0))
    rec = measure(basis("101"), shots=None, noise=noise)
    assert_allclose(rec.occupations, [1.0, 0.02, 1.0], atol=1e-15)


def test_exact_mode_has_no_counts():
    rec = measure((0.4, 1.7), shots=None)
    assert rec.counts is None and rec.shots is None
    assert_allclose(rec.occupations, ideal_occupations(0.4, 1.7), atol=1e-14)


@pytest.mark.parametrize("shots", [0, -5, 2.5])
def test_bad_shot_counts(shots):
    with pytest.raises(ValueError):
        measure((0.1, 0.2), shots=shots)


def test_statevector_with_gate_noise_rejected():
    noise = NoiseModel(single_gate_error=(0.01, 0.0, 0.0))
    with pytest.raises(ValueError):
        measure(basis("000"), shots=10, noise=noise)


def test_unknown_method():
    with pytest.raises(ValueError):
        measure((0.1, 0.2), shots=10, method="magic")


@pytest.mark.parametrize("method", ["trajectory", "density"])
def test_seed_determinism(method):
    noise = load_calibration("ibmqx4", 1)
    a = measure((0.7, 2.1), shots=2048, noise=noise, seed=99, method=method)
    b = measure((0.7, 2.1), shots=2048, noise=noise, seed=99, method=method)
    assert a.counts == b.counts
    assert_allclose(a.occupations, b.occupations, atol=0)


def test_zero_noise_equals_noiseless():
    zero = NoiseModel()
    for method in ("trajectory", "density"):
        a = measure((0.9, 2.0), shots=4096, noise=zero, seed=3, method=method)
        b = measure((0.9, 2.0), shots=4096, noise=None, seed=3, method=method)
        assert a.counts == b.counts
    assert_allclose(density_matrix((0.9, 2.0), zero), density_matrix((0.9, 2.0)), atol=0)


def test_density_matrix_is_a_state():
    noise = load_calibration("ibmqx4", 3)
    rho = density_matrix((1.2, 2.5), noise)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert_allclose(rho, rho.conj().T, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_single_qubit_depolarizing_channel():
    # Ry(pi) then full depolarizing weight p on qubit 1: <Z> shrinks by 1 - 4p/3
    p = 0.3
    noise = NoiseModel(single_gate_error=(p, 0.0, 0.0))
    rho = density_matrix((np.pi, 0.0), noise)
    # the CNOT copies qubit 1 onto qubit 3, so check the qubit-1 marginal
    probs = np.real(np.diag(rho))
    p1 = probs[4:].sum()
    assert abs(p1 - (1 - 2 * p / 3)) < 1e-12


def test_trajectory_and_density_agree_statistically():
    noise = NoiseModel(readout_flip=(0.05, 0.1, 0.02), single_gate_error=(0.1, 0.2, 0.0),
                       cnot_error={(1, 3): 0.2, (2, 1): 0.15})
    probs = outcome_probabilities((1.0, 2.2), noise)
    shots = 200_000
    hist = np.zeros(8)
    rec = measure((1.0, 2.2), shots=shots, noise=noise, seed=5, method="trajectory")
    for k, c in rec.counts.items():
        hist[int(k, 2)] = c
    sigma = np.sqrt(probs * (1 - probs) / shots)
    assert np.all(np.abs(hist / shots - probs) < 5 * sigma + 1e-12)


def test_emulated_device_wraps_measure():
    dev = EmulatedDevice(NoiseModel(readout_flip=(0.1, 0.0, 0.0)), "density")
    a = dev.measure((0.5, 2.0), shots=500, seed=8)
    b = measure((0.5, 2.0), shots=500, noise=dev.noise, seed=8, method="density")
    assert a.counts == b.counts
    assert a.params == (0.5, 2.0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(readout_flip=(0.6, 0.0, 0.0))
    with pytest.raises(ValueError):
        NoiseModel(cnot_error={(1, 3): 0.01})
    with pytest.raises(ValueError):
        NoiseModel(readout_flip=(0.0, 0.0))


def test_bundled_calibration_date_one():
    nm = load_calibration("ibmqx4", 1)
    assert nm.readout_flip == pytest.approx((0.016, 0.065, 0.064))
    assert nm.single_gate_error == pytest.approx((0.00103, 0.0018, 0.00077))
    assert nm.cnot_error[(2, 3)] == pytest.approx(0.0292)
    assert nm.cnot_error[(1, 3)] == pytest.approx(0.0305)
    # Q1 -> Q2 is not tabulated, so the Q2-Q1 entry is used
    assert nm.cnot_error[(2, 1)] == pytest.approx(0.0299)
    assert all(c in nm.cnot_error for c in CIRCUIT_CNOTS)
    assert nm.date == "1"


@pytest.mark.parametrize("date", [2, "6"])
def test_other_date_columns(date):
    nm = load_calibration("ibmqx4", date)
    assert all(0 < p < 0.5 for p in nm.readout_flip)


HEADER = "qubit_map,Q2,Q1,Q0\nkind,target,1\n"


def test_all_zero_file_behaves_noiselessly(tmp_path):
    rows = [f"readout,{q},0" for q in ("Q0", "Q1", "Q2")] + [f"gate,{q},0" for q in ("Q0", "Q1", "Q2")]
    rows += ["cnot,Q1-Q0,0", "cnot,Q2-Q0,0", "cnot,Q2-Q1,0"]
    path = tmp_path / "zero.csv"
    path.write_text(HEADER + "\n".join(rows) + "\n")
    nm = load_calibration(path, 1)
    assert not nm.has_gate_noise
    a = measure((0.8, 2.6), shots=3000, noise=nm, seed=12)
    b = measure((0.8, 2.6), shots=3000, noise=None, seed=12)
    assert a.counts == b.counts


@pytest.mark.parametrize("text", [
    "kind,target,1\n",
    HEADER + "readout,Q0,64\n",
    HEADER + "readout,Q0,x\n",
])
def test_schema_errors(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(CalibrationSchemaError):
        load_calibration(path, 1)


def test_missing_date_column():
    with pytest.raises(CalibrationSchemaError):
        load_calibration("ibmqx4", 9)
