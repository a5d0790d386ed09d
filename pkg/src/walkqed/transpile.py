"""Rewriting circuits into the native gate set {RX(pi/2), RZ, CZ}.

The pass runs in four steps:

1. topology check (no routing; two-qubit gates must already be adjacent),
2. fusion of ``CNOT(a, b)`` immediately followed by ``SWAP(a, b)``,
3. rule-based decomposition until only native gates remain,
4. merging of consecutive virtual RZ gates, then as-late-as-possible packing.

Rules live in :data:`RULES` so they can be inspected (and, in tests,
swapped for a broken one to exercise the verifier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circuit import Circuit, Operation, Topology, TopologyError, op
from .gates import CNOT, CZ, H, ISWAP, RX, RZ, GateKind, is_native, matrix_of
from .linalg import MAX_QUBITS, embed, is_unitary

HALF_PI = math.pi / 2
ZERO_ANGLE_TOL = 1e-12


class TranspileError(ValueError):
    pass


def _rule_h(o: Operation) -> list[Operation]:
    (q,) = o.qubits
    return [op(RZ(HALF_PI), q), op(RX(HALF_PI), q), op(RZ(HALF_PI), q)]


def _rule_x(o: Operation) -> list[Operation]:
    (q,) = o.qubits
    return [op(RX(HALF_PI), q), op(RX(HALF_PI), q)]


def _rule_rx(o: Operation) -> list[Operation]:
    # RX(a) = H RZ(a) H
    (q,) = o.qubits
    return [op(H, q), op(RZ(o.gate.angle), q), op(H, q)]


def _rule_cnot(o: Operation) -> list[Operation]:
    c, t = o.qubits
    return [op(H, t), op(CZ, c, t), op(H, t)]


def _rule_swap(o: Operation) -> list[Operation]:
    a, b = o.qubits
    return [op(CNOT, a, b), op(CNOT, b, a), op(CNOT, a, b)]


def _rule_iswap(o: Operation) -> list[Operation]:
    # iSWAP = (S x S)(H x I) CNOT(a,b) CNOT(b,a) (I x H), with S = RZ(pi/2) up to phase
    a, b = o.qubits
    return [
        op(H, b),
        op(CNOT, b, a),
        op(CNOT, a, b),
        op(H, a),
        op(RZ(HALF_PI), a),
        op(RZ(HALF_PI), b),
    ]


RULES: dict[str, Callable[[Operation], list[Operation]]] = {
    "H": _rule_h,
    "X": _rule_x,
    "RX": _rule_rx,
    "CNOT": _rule_cnot,
    "SWAP": _rule_swap,
    "ISWAP": _rule_iswap,
}


def fuse_cnot_swap(a: int, b: int, mode: str = "cz") -> list[Operation]:
    """Replacement for ``CNOT(a -> b)`` followed by ``SWAP(a, b)``.

    ``mode="cz"`` gives ``CNOT(b -> a) CNOT(a -> b)``, i.e. two CZ gates once
    decomposed. ``mode="iswap"`` gives a single ``ISWAP`` dressed with
    single-qubit gates.
    """
    if mode == "cz":
        return [op(CNOT, b, a), op(CNOT, a, b)]
    if mode == "iswap":
        # SWAP . CNOT(a,b) = (H x I)(Sdg x Sdg) iSWAP (I x H)
        return [
            op(H, b),
            op(ISWAP, a, b),
            op(RZ(-HALF_PI), a),
            op(RZ(-HALF_PI), b),
            op(H, a),
        ]
    raise ValueError(f"unknown fusion mode {mode!r}")


def _fuse(ops: list[Operation], mode: str) -> list[Operation]:
    out: list[Operation] = []
    last: dict[int, int] = {}  # qubit -> index in out of the last op touching it
    for o in ops:
        if o.gate.name == "SWAP":
            a, b = o.qubits
            i = last.get(a)
            if i is not None and i == last.get(b) and out[i].gate.name == "CNOT":
                c, t = out[i].qubits
                repl = fuse_cnot_swap(c, t, mode)
                out[i : i + 1] = []
                # indices after i shift down by one; rebuild the map
                out.extend(repl)
                last = {}
                for j, prev in enumerate(out):
                    for q in prev.qubits:
                        last[q] = j
                continue
        out.append(o)
        for q in o.qubits:
            last[q] = len(out) - 1
    return out


def _decompose(ops: list[Operation], keep: frozenset) -> list[Operation]:
    out: list[Operation] = []
    stack = list(reversed(ops))
    while stack:
        o = stack.pop()
        if is_native(o.gate) or o.gate.name in keep:
            out.append(o)
            continue
        rule = RULES.get(o.gate.name)
        if rule is None:
            raise TranspileError(f"no decomposition rule for {o.gate}")
        stack.extend(reversed(rule(o)))
    return out


def _wrap(angle: float) -> float:
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


def merge_rz(ops: list[Operation]) -> list[Operation]:
    """Merge runs of RZ on the same qubit; drop those that cancel to zero."""
    out: list[Operation | None] = []
    pending: dict[int, int] = {}  # qubit -> index of an open RZ in out
    for o in ops:
        if o.gate.name == "RZ":
            (q,) = o.qubits
            i = pending.get(q)
            if i is not None:
                merged = out[i].gate.angle + o.gate.angle
                out[i] = op(RZ(merged), q)
            else:
                pending[q] = len(out)
                out.append(o)
            continue
        for q in o.qubits:
            pending.pop(q, None)
        out.append(o)
    result = []
    for o in out:
        if o.gate.name == "RZ":
            angle = _wrap(o.gate.angle)
            if abs(angle) < ZERO_ANGLE_TOL:
                continue
            o = op(RZ(angle), *o.qubits)
        result.append(o)
    return result


def pack_alap(n: int, ops: list[Operation], metadata: dict | None = None) -> Circuit:
    """Place each op in the latest moment allowed by the ops after it."""
    slot: list[int] = [0] * len(ops)
    limit = [0] * n  # moments counted backwards from the end
    for i in range(len(ops) - 1, -1, -1):
        t = max(limit[q] for q in ops[i].qubits)
        slot[i] = t
        for q in ops[i].qubits:
            limit[q] = t + 1
    depth = max(limit) if ops else 0
    moments: list[list[Operation]] = [[] for _ in range(depth)]
    for i, o in enumerate(ops):
        moments[depth - 1 - slot[i]].append(o)
    return Circuit(n, tuple(tuple(m) for m in moments), dict(metadata or {}))


def transpile(circuit: Circuit, topology: Topology | None = None, fusion: str = "cz") -> Circuit:
    """Rewrite ``circuit`` into native gates on a chain (or ``topology``).

    With ``fusion="iswap"`` each CNOT+SWAP pair becomes one ``ISWAP`` that is
    left undecomposed, so the output is native apart from those gates.
    """
    topology = topology or Topology.chain(circuit.qubit_count)
    circuit.check_topology(topology)
    ops = _fuse(list(circuit.ops()), fusion)
    keep = frozenset({"ISWAP"}) if fusion == "iswap" else frozenset()
    ops = _decompose(ops, keep)
    ops = merge_rz(ops)
    out = pack_alap(circuit.qubit_count, ops, circuit.metadata)
    out.check_topology(topology)
    return out


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    n = circuit.qubit_count
    if n > MAX_QUBITS:
        raise ValueError(f"register of {n} qubits exceeds the dense limit of {MAX_QUBITS}")
    u = np.eye(2**n, dtype=complex)
    for o in circuit.ops():
        u = embed(matrix_of(o.gate), o.qubits, n) @ u
    return u


@dataclass(frozen=True)
class EquivalenceReport:
    max_entry_deviation: float
    global_phase: complex
    verdict: bool
    makhlin_invariants: tuple | None = None


def equivalent_up_to_global_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> EquivalenceReport:
    """Compare ``u`` with ``lambda v`` for the unit phase ``lambda`` that aligns them."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[idx]) == 0 or abs(u[idx]) == 0:
        phase = 1.0 + 0j
    else:
        ratio = u[idx] / v[idx]
        phase = ratio / abs(ratio)
    dev = float(np.max(np.abs(u - phase * v)))
    invariants = None
    if u.shape == (4, 4) and is_unitary(u) and is_unitary(v):
        invariants = (makhlin_invariants(u), makhlin_invariants(v))
    return EquivalenceReport(dev, complex(phase), dev < tol, invariants)


_MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex
) / math.sqrt(2)


def makhlin_invariants(u: np.ndarray) -> tuple[complex, float]:
    """Local invariants ``(G1, G2)`` of a two-qubit unitary.

    Two gates are equal up to single-qubit operations before and after
    exactly when their invariants agree.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError("Makhlin invariants need a 4x4 matrix")
    if not is_unitary(u):
        raise ValueError("Makhlin invariants need a unitary matrix")
    um = _MAGIC.conj().T @ u @ _MAGIC
    m = um.T @ um
    det = np.linalg.det(u)
    tr = np.trace(m)
    g1 = tr**2 / (16 * det)
    g2 = (tr**2 - np.trace(m @ m)) / (4 * det)
    return complex(g1), float(g2.real)


def metrics(circuit: Circuit) -> dict[str, int]:
    """Gate counts and depths; RZ gates are free and do not add depth."""
    cz = sum(1 for o in circuit.ops() if o.gate.name == "CZ")
    rx = sum(1 for o in circuit.ops() if o.gate.name == "RX")
    level = [0] * circuit.qubit_count
    level2 = [0] * circuit.qubit_count
    for o in circuit.ops():
        if o.gate.name == "RZ":
            continue
        t = max(level[q] for q in o.qubits) + 1
        t2 = max(level2[q] for q in o.qubits) + (1 if len(o.qubits) == 2 else 0)
        for q in o.qubits:
            level[q] = t
            level2[q] = t2
    return {
        "cz_count": cz,
        "rx_count": rx,
        "moment_depth": max(level, default=0),
        "two_qubit_depth": max(level2, default=0),
    }
