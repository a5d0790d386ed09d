"""Circuit IR over a linear chain, plus builders for the detection circuits.

Qubits are numbered 0..n-1 along the chain; the physical labels Q1, Q2, Q3
of a three-qubit device are qubits 0, 1, 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .gates import CNOT, GateKind, H, RX, RZ, SWAP


class TopologyError(ValueError):
    """A two-qubit gate acts on qubits that are not coupled."""


@dataclass(frozen=True)
class Operation:
    gate: GateKind
    qubits: tuple[int, ...]

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(qubits) != self.gate.num_qubits:
            raise ValueError(f"{self.gate} acts on {self.gate.num_qubits} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {qubits}")

    def __str__(self):
        return f"{self.gate}{list(self.qubits)}"


@dataclass(frozen=True)
class Topology:
    qubit_count: int
    edges: frozenset

    @classmethod
    def chain(cls, n: int) -> "Topology":
        return cls(n, frozenset(frozenset((i, i + 1)) for i in range(n - 1)))

    def adjacent(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        return sorted(p for e in self.edges if q in e for p in e if p != q)

    def incident_edges(self, q: int) -> list[tuple[int, int]]:
        return [(min(q, p), max(q, p)) for p in self.neighbors(q)]


@dataclass(frozen=True)
class Circuit:
    """Ordered moments of gate applications on ``qubit_count`` qubits."""

    qubit_count: int
    moments: tuple[tuple[Operation, ...], ...] = ()
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        moments = tuple(tuple(m) for m in self.moments)
        object.__setattr__(self, "moments", moments)
        for moment in moments:
            seen: set[int] = set()
            for op in moment:
                for q in op.qubits:
                    if not 0 <= q < self.qubit_count:
                        raise ValueError(f"qubit {q} outside register of {self.qubit_count}")
                    if q in seen:
                        raise ValueError(f"qubit {q} used twice in one moment")
                    seen.add(q)

    @classmethod
    def from_ops(cls, n: int, ops: Iterable[Operation], metadata: dict | None = None) -> "Circuit":
        """Pack ``ops`` into moments as early as possible, keeping order per qubit."""
        moments: list[list[Operation]] = []
        free = [0] * n
        for op in ops:
            t = max(free[q] for q in op.qubits)
            if t == len(moments):
                moments.append([])
            moments[t].append(op)
            for q in op.qubits:
                free[q] = t + 1
        return cls(n, tuple(tuple(m) for m in moments), dict(metadata or {}))

    def ops(self) -> Iterator[Operation]:
        for moment in self.moments:
            yield from moment

    def __len__(self):
        return sum(len(m) for m in self.moments)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.qubit_count != self.qubit_count:
            raise ValueError("register sizes differ")
        return Circuit(self.qubit_count, self.moments + other.moments, {**other.metadata, **self.metadata})

    def check_topology(self, topology: Topology) -> None:
        if topology.qubit_count != self.qubit_count:
            raise TopologyError(
                f"circuit has {self.qubit_count} qubits, topology has {topology.qubit_count}"
            )
        for op in self.ops():
            if len(op.qubits) == 2 and not topology.adjacent(*op.qubits):
                raise TopologyError(f"{op} acts on non-adjacent qubits")

    # JSON wire format

    def to_dict(self) -> dict:
        moments = []
        for moment in self.moments:
            items = []
            for op in moment:
                item = {"gate": op.gate.name, "qubits": list(op.qubits)}
                if op.gate.angle is not None:
                    item["angle"] = op.gate.angle
                items.append(item)
            moments.append(items)
        out = {"qubits": self.qubit_count, "moments": moments}
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            n = int(data["qubits"])
            moments = []
            for moment in data["moments"]:
                ops = []
                for item in moment:
                    gate = GateKind(item["gate"], item.get("angle"))
                    ops.append(Operation(gate, tuple(item["qubits"])))
                moments.append(tuple(ops))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed circuit JSON: {exc!r}") from exc
        return cls(n, tuple(moments), dict(data.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def op(gate: GateKind, *qubits: int) -> Operation:
    return Operation(gate, qubits)


# Builders. Every builder records which qubit carries the syndrome
# ("ancilla") and which carries the logical Z readout ("logical") at the end.

ERROR_TARGETS = ("first", "second")


def build_static_detection(epsilon: float, error_on: str = "second") -> Circuit:
    """Fixed-ancilla parity check: data on Q1, Q3; ancilla on Q2.

    An ``RX(epsilon)`` error hits one data qubit of ``|00>`` before the two
    CNOTs copy the Z1 Z3 parity onto the ancilla.
    """
    if error_on not in ERROR_TARGETS:
        raise ValueError(f"error_on must be one of {ERROR_TARGETS}")
    err = 2 if error_on == "second" else 0
    ops = [op(RX(epsilon), err), op(CNOT, 0, 1), op(CNOT, 2, 1)]
    meta = {"scheme": "static", "ancilla": 1, "logical": 2, "data": [0, 2], "error_qubit": err}
    return Circuit.from_ops(3, ops, meta)


def _walking_cycle() -> list[Operation]:
    # ancilla walks Q1 -> Q2 -> Q3 while the data slide from (Q2, Q3) to (Q1, Q2)
    return [op(CNOT, 1, 0), op(SWAP, 0, 1), op(CNOT, 2, 1), op(SWAP, 1, 2)]


def build_walking_detection(epsilon: float, error_on: str = "second") -> Circuit:
    """Walking-ancilla parity check on a 3-chain.

    The ancilla starts on Q1 and ends on Q3. The data start on (Q2, Q3) and
    end on (Q1, Q2); the logical readout is the data qubit checked second,
    which finishes on Q2.
    """
    if error_on not in ERROR_TARGETS:
        raise ValueError(f"error_on must be one of {ERROR_TARGETS}")
    err = 2 if error_on == "second" else 1
    ops = [op(RX(epsilon), err)] + _walking_cycle()
    meta = {"scheme": "walking", "ancilla": 2, "logical": 1, "data": [0, 1], "error_qubit": err}
    return Circuit.from_ops(3, ops, meta)


BASIS_CHANGE = {
    "X": [H],
    # RX(pi/2)^dagger Z RX(pi/2) = Y
    "Y": [RX(math.pi / 2)],
    "Z": [],
}


def build_tomography_prep(theta: float, phi: float) -> Circuit:
    """Single-qubit preparation of cos(theta/2)|0> + e^{i phi} sin(theta/2)|1> on Q2."""
    # RX(theta)|0> = cos|0> - i sin|1>; the RZ adds relative phase phi + pi/2
    ops = [op(RX(theta), 1), op(RZ(phi + math.pi / 2), 1)]
    return Circuit.from_ops(3, ops)


def build_tomography_cycle(basis: str) -> Circuit:
    """Encode, walking detection, decode into Q1, rotate ``basis`` onto Z."""
    basis = basis.upper()
    if basis not in BASIS_CHANGE:
        raise ValueError(f"basis must be X, Y or Z, got {basis!r}")
    ops = [op(CNOT, 1, 2)] + _walking_cycle() + [op(CNOT, 0, 1)]
    ops += [op(g, 0) for g in BASIS_CHANGE[basis]]
    meta = {"scheme": "walking", "ancilla": 2, "logical": 0, "basis": basis}
    return Circuit.from_ops(3, ops, meta)


def build_tomography_circuit(theta: float, phi: float, basis: str) -> Circuit:
    """Full logical-state tomography circuit for one measurement basis.

    ``metadata["prep_moments"]`` marks where the single-qubit preparation
    ends; the engine uses it to reuse the fixed remainder across states.
    """
    prep = build_tomography_prep(theta, phi)
    cycle = build_tomography_cycle(basis)
    full = prep + cycle
    meta = dict(cycle.metadata)
    meta["prep_moments"] = len(prep.moments)
    meta["theta"], meta["phi"] = float(theta), float(phi)
    return Circuit(3, full.moments, meta)


def split_prep(circuit: Circuit) -> tuple[Circuit, Circuit]:
    k = int(circuit.metadata.get("prep_moments", 0))
    meta = {key: v for key, v in circuit.metadata.items() if key != "prep_moments"}
    return (
        Circuit(circuit.qubit_count, circuit.moments[:k]),
        Circuit(circuit.qubit_count, circuit.moments[k:], meta),
    )


def ideal_logical_state(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def random_circuit(n: int, depth: int, rng, gate_set: Sequence[str] | None = None) -> Circuit:
    """Random circuit over the textbook gate set with chain-adjacent 2q gates."""
    gate_set = list(gate_set or ["H", "X", "RX", "RZ", "CNOT", "CZ", "SWAP", "ISWAP"])
    ops = []
    for _ in range(depth):
        name = gate_set[rng.integers(len(gate_set))]
        if name in ("RX", "RZ"):
            gate = GateKind(name, float(rng.uniform(-math.pi, math.pi)))
        else:
            gate = GateKind(name)
        if gate.num_qubits == 1:
            ops.append(op(gate, int(rng.integers(n))))
        else:
            a = int(rng.integers(n - 1))
            pair = (a, a + 1) if rng.integers(2) else (a + 1, a)
            ops.append(op(gate, *pair))
    return Circuit.from_ops(n, ops)
