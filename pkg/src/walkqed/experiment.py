"""Error-injection sweeps and logical-state tomography with post-selection.

Both experiments run on transpiled circuits when a :class:`NoiseModel` is
given and on the textbook circuits otherwise (the two agree exactly when the
noise is off). Joint probabilities are ordered ``[p00, p01, p10, p11]`` with
the ancilla bit first and the data bit second.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .circuit import (
    Circuit,
    Topology,
    build_static_detection,
    build_tomography_cycle,
    build_tomography_prep,
    build_walking_detection,
    ideal_logical_state,
)
from .gates import GateKind, matrix_of
from .linalg import (
    PAULI,
    basis_state,
    depolarize,
    embed,
    pure_state_fidelity,
    z_basis_distribution,
)
from .noise import NoiseModel, NoisyCircuit, NoisyOp, insert_noise
from .transpile import transpile

BASES = ("X", "Y", "Z")
BRANCHES = ("all", "plus", "minus")
SWEEP_COLUMNS = ["epsilon", "p00", "p01", "p10", "p11", "z_anc", "z_log_raw", "z_log_corrected"]
TOMO_COLUMNS = ["theta", "phi", "branch", "x_l", "y_l", "z_l", "fidelity", "weight", "dropout"]

# Logical states shown with per-state fidelities: |0_L>, |-i_L>, and two
# states near |+_L>.
REFERENCE_STATES = ((0.0, 0.0), (math.pi / 2, 3 * math.pi / 2), (1.57, 1.26), (1.57, 1.88))

# Single-qubit readout fidelities of Q1, Q2, Q3.
DEVICE_READOUT_FIDELITIES = (0.88, 0.83, 0.93)


# Density-matrix execution


@lru_cache(maxsize=4096)
def _embedded(gate: GateKind, qubits: tuple[int, ...], n: int) -> np.ndarray:
    u = embed(matrix_of(gate), qubits, n)
    u.setflags(write=False)
    return u


def _program(noisy: NoisyCircuit) -> list[tuple]:
    """Fuse runs of unitary steps into single full-register matrices."""
    n = noisy.base.qubit_count
    prog: list[tuple] = []
    u = None
    for s in noisy.steps:
        if s.kind == "depol":
            if s.p == 0.0:
                continue
            if u is not None:
                prog.append(("u", u))
                u = None
            prog.append(("depol", s.p, s.qubits))
        else:
            m = _embedded(s.gate, s.qubits, n)
            u = m if u is None else m @ u
    if u is not None:
        prog.append(("u", u))
    return prog


def run_density(noisy: NoisyCircuit, rho: np.ndarray) -> np.ndarray:
    """Evolve ``rho`` (optionally batched) through ``noisy``."""
    for step in _program(noisy):
        if step[0] == "u":
            u = step[1]
            rho = u @ rho @ u.conj().T
        else:
            rho = depolarize(rho, step[1], step[2])
    return rho


def _layout(noisy: NoisyCircuit) -> tuple:
    return tuple(
        (s.kind, s.qubits, s.p if s.kind == "depol" else s.gate.name) for s in noisy.steps
    )


def run_density_batch(circuits: Sequence[NoisyCircuit], rho: np.ndarray) -> np.ndarray:
    """Run circuits that share one layout (differing only in angles) side by side."""
    if len({_layout(c) for c in circuits}) != 1:
        raise ValueError("circuits in a batch must share the same layout")
    progs = [_program(c) for c in circuits]
    rho = np.broadcast_to(rho, (len(circuits),) + rho.shape[-2:])
    for j, step in enumerate(progs[0]):
        if step[0] == "u":
            u = np.stack([p[j][1] for p in progs])
            rho = u @ rho @ np.conj(np.swapaxes(u, -1, -2))
        else:
            rho = depolarize(rho, step[1], step[2])
    return rho


def run_effects(noisy: NoisyCircuit, effects: np.ndarray) -> np.ndarray:
    """Pull measurement operators back through ``noisy`` (Heisenberg picture).

    For every input state ``rho``, ``Tr(E' rho) = Tr(E run_density(rho))``.
    The depolarizing map is self-adjoint, so only the unitaries are inverted.
    """
    for step in reversed(_program(noisy)):
        if step[0] == "u":
            u = step[1]
            effects = u.conj().T @ effects @ u
        else:
            effects = depolarize(effects, step[1], step[2])
    return effects


@lru_cache(maxsize=4096)
def _transpiled(circuit: Circuit, topology: Topology | None) -> Circuit:
    return transpile(circuit, topology)


def _noisy(circuit: Circuit, noise: NoiseModel | None, topology: Topology | None) -> NoisyCircuit:
    if noise is None:
        return insert_noise_free(circuit)
    return insert_noise(_transpiled(circuit, topology), noise, topology)


def insert_noise_free(circuit: Circuit) -> NoisyCircuit:
    return NoisyCircuit(circuit, tuple(NoisyOp("gate", o.qubits, o.gate) for o in circuit.ops()))


def final_state(circuit: Circuit, noise: NoiseModel | None = None, topology: Topology | None = None) -> np.ndarray:
    rho0 = basis_state("0" * circuit.qubit_count)
    return run_density(_noisy(circuit, noise, topology), rho0)


# Readout: sampling and confusion matrices


def sample_shots(probs: Sequence[float], n: int, seed: int) -> np.ndarray:
    """Empirical frequencies of ``n`` draws; identical for identical seeds."""
    if n < 1:
        raise ValueError(f"shot count must be >= 1, got {n}")
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(n, p)
    return counts / n


def symmetric_confusion(fidelity: float) -> np.ndarray:
    """Row-stochastic ``P(measured | prepared)`` with equal error both ways."""
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError(f"readout fidelity must lie in [0, 1], got {fidelity}")
    e = 1.0 - fidelity
    return np.array([[fidelity, e], [e, fidelity]])


def _check_confusion(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (2, 2) or np.any(c < 0) or np.max(np.abs(c.sum(axis=1) - 1)) > 1e-12:
        raise ValueError("confusion matrix must be 2x2, non-negative and row-stochastic")
    return c


def _joint_confusion(confusions: Sequence[np.ndarray]) -> np.ndarray:
    a = np.ones((1, 1))
    for c in confusions:
        a = np.kron(a, _check_confusion(c))
    return a


def apply_readout_error(probs: Sequence[float], confusions: Sequence[np.ndarray]) -> np.ndarray:
    """Forward model: distribution seen through per-qubit assignment errors."""
    probs = np.asarray(probs, dtype=float)
    a = _joint_confusion(confusions)
    if a.shape[0] != probs.size:
        raise ValueError("distribution size does not match the confusion matrices")
    return probs @ a


def spam_correct(raw: Sequence[float], confusions: Sequence[np.ndarray]) -> np.ndarray:
    """Invert the tensor-product confusion matrix, clip negatives, renormalize."""
    raw = np.asarray(raw, dtype=float)
    a = _joint_confusion(confusions)
    if a.shape[0] != raw.size:
        raise ValueError("distribution size does not match the confusion matrices")
    if abs(np.linalg.det(a)) < 1e-12:
        raise ValueError("confusion matrix is singular")
    est = np.linalg.solve(a.T, raw)
    est = np.clip(est, 0.0, None)
    return est / est.sum()


@dataclass(frozen=True)
class Readout:
    """Optional measurement stage: assignment errors, shots and correction."""

    shots: int | None = None
    confusions: tuple | None = None  # per measured qubit, in measurement order
    correct: bool = True

    def observe(self, probs: np.ndarray, seed: int) -> np.ndarray:
        p = np.asarray(probs, dtype=float)
        if self.confusions is not None:
            p = apply_readout_error(p, self.confusions)
        if self.shots is not None:
            p = sample_shots(p, self.shots, seed)
        if self.confusions is not None and self.correct:
            p = spam_correct(p, self.confusions)
        return p


# Error-injection sweep


@dataclass(frozen=True)
class DetectionRecord:
    epsilon: float
    joint_probs: tuple[float, float, float, float]
    anc_expectation: float
    raw_logical: float
    corrected_logical: float

    def row(self) -> list[float]:
        return [self.epsilon, *self.joint_probs, self.anc_expectation, self.raw_logical, self.corrected_logical]


def corrected_logical(joint_probs: Sequence[float], literal: bool = False) -> float:
    """Parity-corrected logical Z, ``<Z_A Z_L> = p00 + p11 - p01 - p10``.

    ``literal=True`` returns ``1 - (p00 + p11)`` instead.
    """
    p00, p01, p10, p11 = (float(x) for x in joint_probs)
    if literal:
        return 1.0 - (p00 + p11)
    return p00 + p11 - p01 - p10


def detection_record(epsilon: float, joint: Sequence[float], literal: bool = False) -> DetectionRecord:
    p00, p01, p10, p11 = (float(x) for x in joint)
    return DetectionRecord(
        float(epsilon),
        (p00, p01, p10, p11),
        p00 + p01 - p10 - p11,
        p00 - p01 + p10 - p11,
        corrected_logical((p00, p01, p10, p11), literal),
    )


SCHEMES = {"static": build_static_detection, "walking": build_walking_detection}


def run_error_sweep(
    scheme: str,
    epsilons: Iterable[float],
    noise: NoiseModel | None = None,
    shots: int | None = None,
    seed: int = 0,
    *,
    error_on: str = "second",
    readout: Readout | None = None,
    literal: bool = False,
    topology: Topology | None = None,
) -> list[DetectionRecord]:
    """One :class:`DetectionRecord` per injected error angle.

    Grid point ``i`` samples with seed ``seed + i``.
    """
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {sorted(SCHEMES)}")
    epsilons = [float(e) for e in epsilons]
    if not epsilons:
        raise ValueError("epsilon grid is empty")
    if readout is None:
        readout = Readout(shots=shots)
    elif shots is not None:
        raise ValueError("pass shots either directly or inside readout, not both")
    records = []
    for i, eps in enumerate(epsilons):
        circuit = SCHEMES[scheme](eps, error_on)
        rho = final_state(circuit, noise, topology)
        anc, log = circuit.metadata["ancilla"], circuit.metadata["logical"]
        joint = z_basis_distribution(rho, [anc, log])
        joint = readout.observe(joint, seed + i)
        records.append(detection_record(eps, joint, literal))
    return records


# Logical-state tomography


@dataclass(frozen=True)
class LogicalStateSpec:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    def ideal_state(self) -> np.ndarray:
        return ideal_logical_state(self.theta, self.phi)


@dataclass(frozen=True)
class BranchResult:
    expectations: dict  # {"X": <X_L>, "Y": <Y_L>, "Z": <Z_L>}
    rho: np.ndarray
    fidelity: float
    weight: float


@dataclass(frozen=True)
class TomographyResult:
    spec: LogicalStateSpec
    branches: dict = field(default_factory=dict)  # "all" / "plus" / "minus" -> BranchResult
    dropout: float = 0.0

    def rows(self) -> list[list]:
        out = []
        for name in BRANCHES:
            b = self.branches[name]
            e = b.expectations
            out.append([self.spec.theta, self.spec.phi, name, e["X"], e["Y"], e["Z"], b.fidelity, b.weight, self.dropout])
        return out


def bloch_to_rho(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * (PAULI["I"] + x * PAULI["X"] + y * PAULI["Y"] + z * PAULI["Z"])


def project_psd(rho: np.ndarray) -> np.ndarray:
    """Nearest unit-trace PSD matrix by eigenvalue clipping."""
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return (v * w) @ v.conj().T


@lru_cache(maxsize=64)
def z_projectors(n: int, measured: tuple[int, ...]) -> np.ndarray:
    """Projectors onto each outcome of a Z measurement of ``measured``.

    Outcome ``k`` reads its bits with the first measured qubit most significant.
    """
    k = len(measured)
    out = np.zeros((2**k, 2**n, 2**n), dtype=complex)
    for idx in range(2**n):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        outcome = 0
        for q in measured:
            outcome = 2 * outcome + bits[q]
        out[outcome, idx, idx] = 1.0
    out.setflags(write=False)
    return out


_PREP_MIXED = np.kron(np.kron(basis_state("0"), np.eye(2) / 2), basis_state("0"))


@lru_cache(maxsize=4096)
def _ideal_prep(theta: float, phi: float, topology: Topology) -> tuple[np.ndarray, int]:
    native = _transpiled(build_tomography_prep(theta, phi), topology)
    if {q for o in native.ops() for q in o.qubits} != {1}:
        raise ValueError("preparation must act on Q2 only")
    u = np.eye(8, dtype=complex)
    for o in native.ops():
        u = _embedded(o.gate, o.qubits, 3) @ u
    psi = u[:, 0].copy()
    psi.setflags(write=False)
    return psi, sum(1 for o in native.ops() if o.gate.name == "RX")


class TomographySimulator:
    """Joint (syndrome, decoded-qubit) statistics of the tomography circuits.

    The fixed part of each basis circuit (encode, walking cycle, decode,
    basis change) is reduced once to four effect operators; every logical
    state then costs one short preparation run and four traces.
    """

    def __init__(self, noise: NoiseModel | None = None, topology: Topology | None = None):
        self.noise = noise
        self.topology = topology or Topology.chain(3)
        self._effects: dict[str, np.ndarray] = {}

    def _circuit(self, circuit: Circuit) -> NoisyCircuit:
        return _noisy(circuit, self.noise, self.topology)

    def effects(self, basis: str) -> np.ndarray:
        basis = basis.upper()
        if basis not in self._effects:
            cycle = build_tomography_cycle(basis)
            proj = z_projectors(3, (cycle.metadata["ancilla"], cycle.metadata["logical"]))
            self._effects[basis] = run_effects(self._circuit(cycle), proj)
        return self._effects[basis]

    def prepared_state(self, theta: float, phi: float) -> np.ndarray:
        prep = build_tomography_prep(theta, phi)
        return run_density(self._circuit(prep), basis_state("000"))

    def joint_probs(self, theta: float, phi: float, basis: str, rho_prep: np.ndarray | None = None) -> np.ndarray:
        """``P[a, m]`` for syndrome bit ``a`` and decoded-qubit bit ``m``."""
        if rho_prep is None:
            rho_prep = self.prepared_state(theta, phi)
        eff = self.effects(basis)
        probs = np.real(np.einsum("kij,ji->k", eff, rho_prep))
        return np.clip(probs, 0.0, None).reshape(2, 2)

    def prepared_states(self, angles: Sequence[tuple[float, float]]) -> np.ndarray:
        """Batched :meth:`prepared_state`.

        The preparation touches one qubit while its neighbours sit in ``|0>``,
        so the ZZ noise is inert and single-qubit depolarization commutes with
        the gates: each state is the ideal one, depolarized once with
        ``1 - (1 - p1)**k`` for ``k`` noisy RX pulses.
        """
        p1 = self.noise.p1 if self.noise is not None else 0.0
        out = np.empty((len(angles), 8, 8), dtype=complex)
        for i, (t, p) in enumerate(angles):
            psi, k = _ideal_prep(float(t), float(p), self.topology)
            keep = (1.0 - p1) ** k
            out[i] = keep * np.outer(psi, psi.conj()) + (1.0 - keep) * _PREP_MIXED
        return out

    def expectations(self, points: Sequence[tuple[float, float, str]], branch: str = "all") -> np.ndarray:
        """Logical Pauli expectations at ``(theta, phi, basis)`` points."""
        keys = list(dict.fromkeys((float(t), float(p)) for t, p, _ in points))
        states = dict(zip(keys, self.prepared_states(keys)))
        out = np.empty(len(points))
        for i, (theta, phi, basis) in enumerate(points):
            p = self.joint_probs(theta, phi, basis, states[(float(theta), float(phi))])
            out[i] = _branch_expectation(p, branch)
        return out


def _branch_expectation(p: np.ndarray, branch: str) -> float:
    if branch == "all":
        q = p.sum(axis=0)
    else:
        q = p[0 if branch == "plus" else 1]
    total = q.sum()
    if total <= 0:
        return math.nan
    return float((q[0] - q[1]) / total)


def run_tomography(
    spec: LogicalStateSpec,
    noise: NoiseModel | None = None,
    shots: int | None = None,
    seed: int = 0,
    *,
    readout: Readout | None = None,
    psd_project: bool = False,
    simulator: TomographySimulator | None = None,
) -> TomographyResult:
    """Three-basis tomography of the decoded logical qubit, split by syndrome.

    Basis ``X``, ``Y``, ``Z`` sample with seeds ``seed``, ``seed + 1``,
    ``seed + 2``. Branch weights are averaged over the three basis runs.
    """
    if not isinstance(spec, LogicalStateSpec):
        spec = LogicalStateSpec(*spec)
    sim = simulator or TomographySimulator(noise)
    if readout is None:
        readout = Readout(shots=shots)
    elif shots is not None:
        raise ValueError("pass shots either directly or inside readout, not both")
    rho_prep = sim.prepared_state(spec.theta, spec.phi)
    joint = {}
    for i, basis in enumerate(BASES):
        p = sim.joint_probs(spec.theta, spec.phi, basis, rho_prep)
        # measured bit order: ancilla (Q3) then decoded qubit (Q1)
        joint[basis] = readout.observe(p.ravel(), seed + i).reshape(2, 2)
    w_plus = float(np.mean([joint[b][0].sum() for b in BASES]))
    weights = {"all": 1.0, "plus": w_plus, "minus": 1.0 - w_plus}
    target = spec.ideal_state()
    branches = {}
    for name in BRANCHES:
        e = {b: _branch_expectation(joint[b], name) for b in BASES}
        if any(math.isnan(v) for v in e.values()):
            rho = np.full((2, 2), np.nan, dtype=complex)
            fid = math.nan
        else:
            rho = bloch_to_rho(e["X"], e["Y"], e["Z"])
            if psd_project:
                rho = project_psd(rho)
            fid = pure_state_fidelity(rho, target)
        branches[name] = BranchResult(e, rho, fid, weights[name])
    return TomographyResult(spec, branches, weights["minus"])


# CSV output


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def sweep_csv(records: Sequence[DetectionRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in records:
        w.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()


def tomography_csv(results: Sequence[TomographyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TOMO_COLUMNS)
    for res in results:
        for row in res.rows():
            w.writerow([_fmt(v) for v in row])
    return buf.getvalue()
