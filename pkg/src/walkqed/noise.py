"""Circuit-level noise: ZZ crosstalk, exchange error and depolarization.

Insertion rules on a transpiled circuit:

* after every ``RX(pi/2)`` on qubit ``q``: ``CPHASE(delta_phi)`` on each chain
  edge touching ``q``, then single-qubit depolarization ``p1`` on ``q``;
* after every ``CZ`` on ``(a, b)``: ``RXXYY(theta)`` on ``(a, b)``, then
  two-qubit depolarization ``p2`` on ``(a, b)``;
* virtual ``RZ`` gates are noiseless.

Within a moment the gates act first, then the noise of that moment in gate
order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .circuit import Circuit, Topology
from .gates import CPHASE, RXXYY, GateKind, is_native, matrix_of
from .linalg import depolarizing_kraus, embed


class DepolConvention(str, Enum):
    # d = 2 for single-qubit and d = 4 for two-qubit depolarization
    PER_GATE = "PerGateSubspace"
    # d = 4 everywhere when converting p to a gate fidelity
    PAIR = "PairSubspace"


@dataclass(frozen=True)
class NoiseModel:
    delta_phi: float = 0.0
    theta: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    depol_dimension_convention: DepolConvention = DepolConvention.PER_GATE

    def __post_init__(self):
        for name in ("delta_phi", "theta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, float(v))
        for name in ("p1", "p2"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(
            self, "depol_dimension_convention", DepolConvention(self.depol_dimension_convention)
        )

    @classmethod
    def reference(cls) -> "NoiseModel":
        """The fitted device values: delta_phi=-0.027, theta=0.37, p1=p2=0.0178."""
        return cls(-0.027, 0.37, 0.0178, 0.0178)

    @property
    def is_zero(self) -> bool:
        return self.delta_phi == 0 and self.theta == 0 and self.p1 == 0 and self.p2 == 0

    def as_vector(self) -> np.ndarray:
        return np.array([self.delta_phi, self.theta, self.p1, self.p2])

    @classmethod
    def from_vector(cls, x, convention=DepolConvention.PER_GATE) -> "NoiseModel":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]), convention)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depol_dimension_convention"] = self.depol_dimension_convention.value
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        allowed = {"delta_phi", "theta", "p1", "p2", "depol_dimension_convention"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown noise-model fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class NoisyOp:
    """One step of a noisy circuit: a unitary gate or a depolarizing channel."""

    kind: str  # "gate", "cphase", "rxxyy" or "depol"
    qubits: tuple[int, ...]
    gate: GateKind | None = None
    p: float = 0.0
    position: int = -1  # index of the base gate this noise follows, -1 for gates


@dataclass(frozen=True)
class NoisyCircuit:
    base: Circuit
    steps: tuple[NoisyOp, ...] = field(default=())

    @property
    def insertions(self) -> list[NoisyOp]:
        return [s for s in self.steps if s.kind != "gate"]

    def unitary_part(self) -> np.ndarray:
        """Product of all unitary steps; depolarizing steps are skipped."""
        n = self.base.qubit_count
        u = np.eye(2**n, dtype=complex)
        for s in self.steps:
            if s.kind != "depol":
                u = embed(matrix_of(s.gate), s.qubits, n) @ u
        return u


def depolarizing_channel(p: float, n_qubits: int, literal: bool = False) -> list[np.ndarray]:
    """Kraus operators of ``rho -> (1 - p) rho + p I/d`` with ``d = 2**n_qubits``.

    ``literal=True`` returns the map with the roles of ``p`` and ``1 - p``
    exchanged, ``rho -> p rho + (1 - p) I/d``; it is kept for comparison only.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return depolarizing_kraus(1.0 - p if literal else p, n_qubits)


def insert_noise(circuit: Circuit, model: NoiseModel, topology: Topology | None = None) -> NoisyCircuit:
    topology = topology or Topology.chain(circuit.qubit_count)
    circuit.check_topology(topology)
    steps: list[NoisyOp] = []
    index = 0
    for moment in circuit.moments:
        pending: list[NoisyOp] = []
        for o in moment:
            if not is_native(o.gate):
                raise ValueError(f"insert_noise needs a transpiled circuit, found {o.gate}")
            steps.append(NoisyOp("gate", o.qubits, o.gate))
            if o.gate.name == "RX":
                (q,) = o.qubits
                for edge in topology.incident_edges(q):
                    pending.append(NoisyOp("cphase", edge, CPHASE(model.delta_phi), position=index))
                pending.append(NoisyOp("depol", (q,), p=model.p1, position=index))
            elif o.gate.name == "CZ":
                pending.append(NoisyOp("rxxyy", o.qubits, RXXYY(model.theta), position=index))
                pending.append(NoisyOp("depol", o.qubits, p=model.p2, position=index))
            index += 1
        steps.extend(pending)
    return NoisyCircuit(circuit, tuple(steps))


def xeb_fidelity_from_depolarization(p: float, d: int) -> float:
    """Gate fidelity ``1 - (d - 1)/d * p`` of a depolarizing error ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    return 1.0 - (d - 1) / d * p


def average_gate_fidelity(u: np.ndarray, u_target: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    u_target = np.asarray(u_target, dtype=complex)
    if u.shape != u_target.shape or u.shape[0] != u.shape[1]:
        raise ValueError(f"shape mismatch {u.shape} vs {u_target.shape}")
    d = u.shape[0]
    return float((np.trace(u.conj().T @ u).real + abs(np.trace(u_target.conj().T @ u)) ** 2) / (d * (d + 1)))


def zz_phase_infidelity(delta_phi: float) -> float:
    """Closed-form ``1 - F`` of ``CPHASE(delta_phi)`` against the identity."""
    if not math.isfinite(delta_phi):
        raise ValueError("angle must be finite")
    return 0.3 * (1.0 - math.cos(delta_phi))


def exchange_infidelity(theta: float) -> float:
    """Closed-form ``1 - F`` of ``RXXYY(theta)`` against the identity."""
    if not math.isfinite(theta):
        raise ValueError("angle must be finite")
    c = math.cos(theta / 2)
    return (12.0 - 8.0 * c - 4.0 * c * c) / 20.0


def gate_fidelity_report(model: NoiseModel) -> dict[str, float]:
    """Per-gate error budget implied by ``model``.

    Depolarization is converted with ``d = 2`` (single-qubit) and ``d = 4``
    (CZ) under the per-gate convention, or ``d = 4`` for both under the pair
    convention.
    """
    d1 = 2 if model.depol_dimension_convention is DepolConvention.PER_GATE else 4
    depol_1q = 1.0 - xeb_fidelity_from_depolarization(model.p1, d1)
    depol_2q = 1.0 - xeb_fidelity_from_depolarization(model.p2, 4)
    zz = zz_phase_infidelity(model.delta_phi)
    xy = exchange_infidelity(model.theta)
    return {
        "single_qubit_depol_fidelity": 1.0 - depol_1q,
        "single_qubit_zz_infidelity": zz,
        "single_qubit_total_fidelity": 1.0 - depol_1q - zz,
        "cz_depol_fidelity": 1.0 - depol_2q,
        "cz_exchange_infidelity": xy,
        "cz_total_fidelity": 1.0 - depol_2q - xy,
    }
