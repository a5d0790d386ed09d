"""Dense density-matrix primitives for small qubit registers.

Matrices are plain complex ``numpy`` arrays. Qubit 0 is the most significant
bit of the computational-basis index, so ``|q0 q1 ... q(n-1)>`` maps to the
integer whose binary digits read left to right.

All functions accept an optional leading batch dimension on ``rho`` (shape
``(..., d, d)``); the engine uses it to push several input states through
the same circuit at once.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 4
UNITARY_TOL = 1e-10
KRAUS_TOL = 1e-10
IMAG_TOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product of the operands, leftmost factor on qubit 0."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def basis_state(bits: str | Sequence[int]) -> np.ndarray:
    """Density matrix of a computational basis state, e.g. ``"010"``."""
    bits = [int(b) for b in bits]
    d = 2 ** len(bits)
    idx = int("".join(map(str, bits)), 2) if bits else 0
    rho = np.zeros((d, d), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < tol)


def _check_targets(targets: Sequence[int], n: int) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target index in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")
    return targets


@lru_cache(maxsize=512)
def _axis_order(targets: tuple[int, ...], n: int) -> tuple[int, ...]:
    # Axis permutation taking a (targets..., rest...) operator to qubit order.
    order = list(targets) + [q for q in range(n) if q not in targets]
    inv = np.argsort(order)
    return tuple(int(i) for i in inv) + tuple(int(i) + n for i in inv)


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift a ``2^k x 2^k`` operator on ``targets`` to the full register."""
    op = np.asarray(op, dtype=complex)
    targets = _check_targets(targets, n)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target(s)")
    if k == n and targets == tuple(range(n)):
        return op
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    full = full.reshape([2] * (2 * n)).transpose(_axis_order(targets, n))
    return full.reshape(2**n, 2**n)


def apply_unitary(rho: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[-1])
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("operator is not unitary")
    full = embed(u, targets, n)
    return full @ rho @ full.conj().T


def kraus_completeness_error(kraus: Sequence[np.ndarray]) -> float:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    total = sum(k.conj().T @ k for k in kraus)
    return float(np.max(np.abs(total - np.eye(kraus[0].shape[0]))))


def apply_kraus(rho: np.ndarray, kraus: Sequence[np.ndarray], targets: Sequence[int]) -> np.ndarray:
    """Apply the channel ``rho -> sum_k K rho K^dagger`` on ``targets``."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[-1])
    if not kraus:
        raise ValueError("empty Kraus set")
    err = kraus_completeness_error(kraus)
    if err > KRAUS_TOL:
        raise ValueError(f"Kraus operators violate completeness (deviation {err:.3g})")
    out = np.zeros_like(rho)
    for k in kraus:
        full = embed(k, targets, n)
        out = out + full @ rho @ full.conj().T
    return out


@lru_cache(maxsize=512)
def _ptrace_subscripts(keep: tuple[int, ...], n: int) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out_row = "".join(row[q] for q in keep)
    out_col = "".join(col[q] for q in keep)
    return f"...{''.join(row)}{''.join(col)}->...{out_row}{out_col}"


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced state on ``keep`` (output factors follow the order given)."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[-1])
    if len(keep) == 0:
        raise ValueError("keep must name at least one qubit")
    keep = _check_targets(keep, n)
    batch = rho.shape[:-2]
    t = rho.reshape(batch + (2,) * (2 * n))
    red = np.einsum(_ptrace_subscripts(keep, n), t)
    dk = 2 ** len(keep)
    return red.reshape(batch + (dk, dk))


def depolarize(rho: np.ndarray, p: float, targets: Sequence[int]) -> np.ndarray:
    """``(1 - p) rho + p (I/d tensor Tr_targets rho)`` acting on ``targets``.

    This is the direct-map form of the depolarizing channel; it agrees with
    the Pauli Kraus form returned by :func:`depolarizing_kraus`.
    """
    rho = np.asarray(rho, dtype=complex)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if p == 0.0:
        return rho
    n = num_qubits(rho.shape[-1])
    targets = _check_targets(targets, n)
    k = len(targets)
    rest = tuple(q for q in range(n) if q not in targets)
    batch = rho.shape[:-2]
    lo = min(targets)
    if sorted(targets) == list(range(lo, lo + k)):
        # contiguous block: view rho as (a, t, b) x (a, t, b) and trace the middle
        a, t, b = 2**lo, 2**k, 2 ** (n - lo - k)
        r = rho.reshape(batch + (a, t, b, a, t, b))
        red = np.einsum("...aibcid->...abcd", r) / t
        mixed = np.zeros_like(r)
        for i in range(t):
            mixed[..., :, i, :, :, i, :] = red
        mixed = mixed.reshape(rho.shape)
    elif rest:
        reduced = partial_trace(rho, rest)
        mixed = np.kron(np.eye(2**k) / 2**k, reduced)
        d = 2**n
        mixed = mixed.reshape(batch + (2,) * (2 * n))
        nb = len(batch)
        axes = tuple(range(nb)) + tuple(nb + a for a in _axis_order(targets, n))
        mixed = mixed.transpose(axes).reshape(batch + (d, d))
    else:
        tr = np.trace(rho, axis1=-2, axis2=-1)
        mixed = tr[..., None, None] * np.eye(2**n) / 2**n
    return (1.0 - p) * rho + p * mixed


def depolarizing_kraus(p: float, n_qubits: int) -> list[np.ndarray]:
    """Pauli Kraus operators of the ``n_qubits`` depolarizing channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    d2 = 4**n_qubits
    labels = [""]
    for _ in range(n_qubits):
        labels = [s + c for s in labels for c in "IXYZ"]
    ops = []
    for label in labels:
        weight = 1.0 - p + p / d2 if set(label) == {"I"} else p / d2
        ops.append(np.sqrt(weight) * pauli_matrix(label))
    return ops


def pauli_matrix(label: str) -> np.ndarray:
    label = label.upper()
    if not label or any(c not in PAULI for c in label):
        raise ValueError(f"invalid Pauli string {label!r}")
    return kron(*(PAULI[c] for c in label))


def z_basis_distribution(rho: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Outcome probabilities of a Z measurement on ``targets``.

    Bitstrings are indexed with the first listed target as the most
    significant bit.
    """
    red = partial_trace(rho, targets)
    probs = np.real(np.diagonal(red, axis1=-2, axis2=-1))
    # round-off can leave -1e-17 on an empty outcome
    return np.where((probs < 0) & (probs > -1e-12), 0.0, probs)


def expectation(rho: np.ndarray, pauli: str) -> float:
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[-1])
    if len(pauli) != n:
        raise ValueError(f"Pauli string length {len(pauli)} != register size {n}")
    val = np.trace(rho @ pauli_matrix(pauli))
    if abs(val.imag) > IMAG_TOL:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}; rho is not Hermitian")
    return float(val.real)


def pure_state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex).ravel()
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise ValueError("state dimensions do not match")
    return float(np.real(psi.conj() @ rho @ psi))


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10, eig_tol: float = 1e-9) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    num_qubits(rho.shape[0])
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"trace {tr} != 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -eig_tol:
        raise ValueError(f"negative eigenvalue {lo:.3g}")
