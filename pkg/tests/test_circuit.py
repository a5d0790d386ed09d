import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from walkqed.circuit import (
    Circuit,
    Operation,
    Topology,
    TopologyError,
    build_static_detection,
    build_tomography_circuit,
    build_walking_detection,
    ideal_logical_state,
    op,
    random_circuit,
    split_prep,
)
from walkqed.gates import CZ, H


def test_operation_validation():
    with pytest.raises(ValueError):
        Operation(CZ, (0,))
    with pytest.raises(ValueError):
        Operation(CZ, (1, 1))


def test_circuit_moment_validation():
    with pytest.raises(ValueError, match="twice"):
        Circuit(2, ((op(H, 0), op(CZ, 0, 1)),))
    with pytest.raises(ValueError, match="outside"):
        Circuit(2, ((op(H, 2),),))


def test_from_ops_packs_early():
    c = Circuit.from_ops(3, [op(H, 0), op(H, 2), op(CZ, 0, 1), op(H, 2)])
    assert len(c.moments) == 2
    assert len(c) == 4


def test_topology():
    chain = Topology.chain(3)
    assert chain.adjacent(0, 1) and chain.adjacent(2, 1) and not chain.adjacent(0, 2)
    assert chain.neighbors(1) == [0, 2]
    assert chain.incident_edges(0) == [(0, 1)]
    with pytest.raises(TopologyError):
        Circuit.from_ops(3, [op(CZ, 0, 2)]).check_topology(chain)
    with pytest.raises(TopologyError):
        Circuit.from_ops(2, [op(CZ, 0, 1)]).check_topology(chain)


@given(st.integers(0, 2**32 - 1), st.integers(0, 12))
def test_json_round_trip(seed, depth):
    c = random_circuit(3, depth, np.random.default_rng(seed))
    back = Circuit.from_json(c.to_json())
    assert back == c
    assert json.loads(back.to_json()) == json.loads(c.to_json())


def test_json_errors():
    with pytest.raises(ValueError, match="malformed"):
        Circuit.from_dict({"moments": []})
    with pytest.raises(ValueError):
        Circuit.from_dict({"qubits": 2, "moments": [[{"gate": "NOPE", "qubits": [0]}]]})


def _state(circuit):
    u = oracles.unitary(circuit)
    return u[:, 0]


@pytest.mark.parametrize("eps", [0.0, 0.5, math.pi / 2, 2.0, math.pi])
def test_static_detection_statevector(eps):
    # RX(eps) on the second data qubit, parity copied to the ancilla
    psi = _state(build_static_detection(eps))
    c, s = math.cos(eps / 2), math.sin(eps / 2)
    expected = np.zeros(8, dtype=complex)
    expected[0b000] = c
    expected[0b011] = -1j * s
    assert np.allclose(psi, expected)


@pytest.mark.parametrize("eps", [0.0, 0.9, math.pi])
def test_walking_detection_statevector(eps):
    psi = _state(build_walking_detection(eps))
    c, s = math.cos(eps / 2), math.sin(eps / 2)
    expected = np.zeros(8, dtype=complex)
    expected[0b000] = c
    expected[0b011] = -1j * s  # logical on qubit 1 flipped, ancilla on qubit 2 flags
    assert np.allclose(psi, expected)


def test_error_on_first():
    s = build_static_detection(0.3, "first")
    w = build_walking_detection(0.3, "first")
    assert s.metadata["error_qubit"] == 0 and w.metadata["error_qubit"] == 1
    with pytest.raises(ValueError):
        build_static_detection(0.3, "third")


@pytest.mark.parametrize("theta,phi", [(0.0, 0.0), (math.pi / 2, 3 * math.pi / 2), (1.57, 1.26), (2.5, 4.0)])
def test_tomography_prep_and_decode(theta, phi):
    # with the Z basis the circuit ends with the logical state decoded on qubit 0
    c = build_tomography_circuit(theta, phi, "Z")
    prep, cycle = split_prep(c)
    assert len(prep.moments) == c.metadata["prep_moments"]
    assert "prep_moments" not in cycle.metadata
    psi = _state(c)
    alpha, beta = ideal_logical_state(theta, phi)
    amps = psi.reshape(2, 2, 2)  # (q0, q1, q2)
    # ancilla (q2) clean, q1 disentangled in |0>
    assert np.allclose(amps[:, :, 1], 0)
    assert np.allclose(amps[:, 1, :], 0)
    ratio = amps[0, 0, 0] / alpha if abs(alpha) > 1e-9 else amps[1, 0, 0] / beta
    assert np.allclose([amps[0, 0, 0], amps[1, 0, 0]], ratio * np.array([alpha, beta]))


def test_tomography_basis_validation():
    with pytest.raises(ValueError):
        build_tomography_circuit(0.1, 0.2, "W")


def test_random_circuit_respects_chain():
    rng = np.random.default_rng(0)
    for _ in range(20):
        random_circuit(3, 10, rng).check_topology(Topology.chain(3))
