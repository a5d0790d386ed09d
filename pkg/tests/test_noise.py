import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from walkqed.circuit import Circuit, Topology, build_static_detection, build_walking_detection, op
from walkqed.experiment import run_density
from walkqed.gates import CPHASE, CZ, RX, RXXYY, RZ, H, matrix_of
from walkqed.linalg import basis_state, kraus_completeness_error
from walkqed.noise import (
    DepolConvention,
    NoiseModel,
    average_gate_fidelity,
    depolarizing_channel,
    exchange_infidelity,
    gate_fidelity_report,
    insert_noise,
    xeb_fidelity_from_depolarization,
    zz_phase_infidelity,
)
from walkqed.transpile import transpile

HALF_PI = math.pi / 2


def test_model_validation_and_reference_values():
    m = NoiseModel.reference()
    assert m.as_vector().tolist() == [-0.027, 0.37, 0.0178, 0.0178]
    assert NoiseModel().is_zero and not m.is_zero
    with pytest.raises(ValueError):
        NoiseModel(p1=1.2)
    with pytest.raises(ValueError):
        NoiseModel(theta=float("inf"))
    with pytest.raises(ValueError):
        NoiseModel(depol_dimension_convention="Other")


def test_model_json_round_trip():
    m = NoiseModel(0.01, 0.2, 0.03, 0.04, DepolConvention.PAIR)
    assert NoiseModel.from_json(m.to_json()) == m
    with pytest.raises(ValueError, match="unknown"):
        NoiseModel.from_dict({"delta_phi": 0.0, "gamma": 1.0})


def test_insertion_rules():
    c = Circuit.from_ops(3, [op(RX(HALF_PI), 1), op(CZ, 1, 2), op(RZ(0.3), 0)])
    noisy = insert_noise(c, NoiseModel(0.1, 0.2, 0.01, 0.02))
    kinds = [(s.kind, s.qubits) for s in noisy.steps]
    assert kinds == [
        ("gate", (1,)),
        ("gate", (0,)),
        ("cphase", (0, 1)),
        ("cphase", (1, 2)),
        ("depol", (1,)),
        ("gate", (1, 2)),
        ("rxxyy", (1, 2)),
        ("depol", (1, 2)),
    ]
    depol = [s.p for s in noisy.steps if s.kind == "depol"]
    assert depol == [0.01, 0.02]
    # RZ is virtual: no noise follows it
    assert {s.position for s in noisy.insertions} == {0, 2}


def test_edge_qubit_gets_one_cphase():
    c = Circuit.from_ops(3, [op(RX(HALF_PI), 0)])
    noisy = insert_noise(c, NoiseModel(0.1, 0, 0, 0))
    assert [s.qubits for s in noisy.insertions if s.kind == "cphase"] == [(0, 1)]


def test_insert_noise_requires_native_circuit():
    with pytest.raises(ValueError, match="transpiled"):
        insert_noise(Circuit.from_ops(1, [op(H, 0)]), NoiseModel(), Topology.chain(1))


def test_zero_noise_keeps_the_unitary():
    c = transpile(build_walking_detection(0.8))
    noisy = insert_noise(c, NoiseModel())
    assert np.allclose(noisy.unitary_part(), oracles.unitary(c))


@pytest.mark.parametrize("scheme", [build_static_detection, build_walking_detection])
def test_engine_matches_kraus_oracle(scheme):
    model = NoiseModel(-0.05, 0.4, 0.03, 0.05)
    native = transpile(scheme(1.1))
    rng = np.random.default_rng(4)
    rho = oracles.random_density(8, rng)
    fast = run_density(insert_noise(native, model), rho)
    slow = oracles.noisy_density(native, model, rho)
    assert np.max(np.abs(fast - slow)) <= 1e-12


@given(st.floats(0, 1), st.integers(1, 2))
def test_depolarizing_channel_action(p, n):
    kraus = depolarizing_channel(p, n)
    assert kraus_completeness_error(kraus) <= 1e-12
    d = 2**n
    rho = basis_state("0" * n)
    out = sum(k @ rho @ k.conj().T for k in kraus)
    assert np.allclose(out, (1 - p) * rho + p * np.eye(d) / d)


def test_literal_convention_swaps_roles():
    rho = basis_state("0")
    out = sum(k @ rho @ k.conj().T for k in depolarizing_channel(0.9, 1, literal=True))
    assert np.allclose(out, 0.9 * rho + 0.1 * np.eye(2) / 2)


def test_fidelity_conversion():
    assert xeb_fidelity_from_depolarization(0.0, 4) == 1.0
    assert abs(xeb_fidelity_from_depolarization(0.0178, 2) - (1 - 0.0089)) < 1e-15
    with pytest.raises(ValueError):
        xeb_fidelity_from_depolarization(0.1, 1)
    with pytest.raises(ValueError):
        xeb_fidelity_from_depolarization(-0.1, 2)


@given(st.floats(-math.pi, math.pi))
def test_zz_closed_form_matches_overlap(dphi):
    oracle = 1 - average_gate_fidelity(matrix_of(CPHASE(dphi)), np.eye(4))
    assert abs(zz_phase_infidelity(dphi) - oracle) <= 1e-12


@given(st.floats(-2 * math.pi, 2 * math.pi))
def test_exchange_closed_form_matches_overlap(theta):
    oracle = 1 - average_gate_fidelity(matrix_of(RXXYY(theta)), np.eye(4))
    assert abs(exchange_infidelity(theta) - oracle) <= 1e-12


def test_average_gate_fidelity_basics():
    u = matrix_of(RXXYY(0.3))
    assert abs(average_gate_fidelity(u, u) - 1) < 1e-12
    with pytest.raises(ValueError):
        average_gate_fidelity(np.eye(2), np.eye(4))


def test_fidelity_report_conventions():
    r = gate_fidelity_report(NoiseModel.reference())
    assert abs(r["single_qubit_depol_fidelity"] - (1 - 0.5 * 0.0178)) < 1e-12
    assert abs(r["cz_depol_fidelity"] - 0.98665) < 1e-12
    assert abs(r["cz_exchange_infidelity"] - exchange_infidelity(0.37)) < 1e-15
    pair = gate_fidelity_report(NoiseModel(-0.027, 0.37, 0.0178, 0.0178, DepolConvention.PAIR))
    assert abs(pair["single_qubit_depol_fidelity"] - 0.98665) < 1e-12
