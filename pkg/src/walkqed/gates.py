"""Gate kinds and their unitaries.

``RX(a) = exp(-i a X / 2)`` and ``RZ(a) = exp(-i a Z / 2)``; with these
conventions ``H`` equals ``RZ(pi/2) RX(pi/2) RZ(pi/2)`` up to a global phase.
Global phases are kept as-is in every matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

ANGLE_TOL = 1e-12

ONE_QUBIT = frozenset({"RX", "RZ", "H", "X"})
TWO_QUBIT = frozenset({"CZ", "CNOT", "SWAP", "ISWAP", "CPHASE", "RXXYY"})
PARAMETRIC = frozenset({"RX", "RZ", "CPHASE", "RXXYY"})
GATE_NAMES = ONE_QUBIT | TWO_QUBIT


@dataclass(frozen=True)
class GateKind:
    """A gate name plus its rotation angle (radians) when it takes one."""

    name: str
    angle: Optional[float] = None

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise ValueError(f"unknown gate {self.name!r}")
        if self.name in PARAMETRIC:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.name} needs a finite angle, got {self.angle!r}")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{self.name} takes no angle")

    @property
    def num_qubits(self) -> int:
        return 1 if self.name in ONE_QUBIT else 2

    def __str__(self):
        return self.name if self.angle is None else f"{self.name}({self.angle:.6g})"


def RX(angle):
    return GateKind("RX", angle)


def RZ(angle):
    return GateKind("RZ", angle)


def CPHASE(angle):
    return GateKind("CPHASE", angle)


def RXXYY(angle):
    return GateKind("RXXYY", angle)


H = GateKind("H")
X = GateKind("X")
CZ = GateKind("CZ")
CNOT = GateKind("CNOT")
SWAP = GateKind("SWAP")
ISWAP = GateKind("ISWAP")


def _rx(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _rz(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def _rxxyy(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, 1]],
        dtype=complex,
    )


_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    # control is the first qubit listed
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "ISWAP": np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def matrix_of(gate: GateKind) -> np.ndarray:
    """Unitary of ``gate`` in the computational basis of its own qubits."""
    if gate.name == "RX":
        return _rx(gate.angle)
    if gate.name == "RZ":
        return _rz(gate.angle)
    if gate.name == "CPHASE":
        return np.diag([1, 1, 1, np.exp(1j * gate.angle)])
    if gate.name == "RXXYY":
        return _rxxyy(gate.angle)
    return _FIXED[gate.name].copy()


def is_native(gate: GateKind) -> bool:
    """True for the device gate set: RX(pi/2), RZ(any angle) and CZ."""
    if gate.name == "RZ" or gate.name == "CZ":
        return True
    if gate.name == "RX":
        return abs(gate.angle - math.pi / 2) < ANGLE_TOL
    return False
