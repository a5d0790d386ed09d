"""Command-line front end: ``walkqed {sweep,tomo,fit,transpile,verify}``.

Exit codes: 0 success, 1 computational or verification failure, 2 usage or
configuration error. CSV commands require ``--out``; JSON commands print to
stdout when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .circuit import (
    Circuit,
    Topology,
    TopologyError,
    build_static_detection,
    build_tomography_circuit,
    build_walking_detection,
    random_circuit,
)
from .estimator import FitDataset, NoiseModelEstimator
from .experiment import (
    REFERENCE_STATES,
    SCHEMES,
    LogicalStateSpec,
    Readout,
    TomographySimulator,
    run_error_sweep,
    run_tomography,
    sweep_csv,
    symmetric_confusion,
    tomography_csv,
)
from .gates import CNOT, ISWAP, SWAP, is_native, matrix_of
from .linalg import embed, z_basis_distribution
from .noise import NoiseModel
from .transpile import (
    TranspileError,
    circuit_unitary,
    equivalent_up_to_global_phase,
    fuse_cnot_swap,
    makhlin_invariants,
    metrics,
    transpile,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    """Bad user input; maps to exit code 2."""


# configuration helpers


def _data_text(name: str) -> str:
    return resources.files("walkqed").joinpath("data", name).read_text()


def load_profile(name: str) -> dict:
    if name != "paper":
        raise ConfigError(f"unknown profile {name!r}; available: paper")
    return json.loads(_data_text("device_profile.json"))


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path!r} is not valid JSON: {exc}") from exc


def resolve_noise(args) -> NoiseModel | None:
    if args.noise is not None:
        if args.noise.lower() == "none":
            return None
        try:
            return NoiseModel.from_dict(_read_json(args.noise, "noise model"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid noise model: {exc}") from exc
    if args.profile:
        return NoiseModel.from_dict(load_profile(args.profile)["noise"])
    return None


def _readout_fidelities(args) -> list[float] | None:
    return load_profile(args.profile)["readout_fidelities"] if args.profile else None


def _check_positive(name: str, value, allow_none=True):
    if value is None and allow_none:
        return
    if value is None or value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out!r}: {exc.strerror}") from exc


def _require_out(args) -> None:
    if not args.out:
        raise ConfigError("--out is required for this command")
    parent = Path(args.out).resolve().parent
    if not parent.is_dir():
        raise ConfigError(f"output directory {str(parent)!r} does not exist")


# commands


def cmd_sweep(args) -> int:
    _require_out(args)
    _check_positive("--points", args.points, allow_none=False)
    _check_positive("--shots", args.shots)
    noise = resolve_noise(args)
    fids = _readout_fidelities(args)
    readout = None
    if fids is not None:
        meta = SCHEMES[args.scheme](0.0, args.error_on).metadata
        conf = tuple(symmetric_confusion(fids[q]) for q in (meta["ancilla"], meta["logical"]))
        readout = Readout(shots=args.shots, confusions=conf)
    eps = np.linspace(0.0, math.pi, args.points)
    records = run_error_sweep(
        args.scheme,
        eps,
        noise,
        None if readout else args.shots,
        args.seed,
        error_on=args.error_on,
        readout=readout,
    )
    _emit(sweep_csv(records), args.out)
    return EXIT_OK


def _tomo_specs(grid: str, points: int) -> list[LogicalStateSpec]:
    if grid == "reference":
        return [LogicalStateSpec(t, p) for t, p in REFERENCE_STATES]
    if grid == "theta":
        return [LogicalStateSpec(float(t), 0.0) for t in np.linspace(0.0, math.pi, points)]
    phis = np.linspace(0.0, 2 * math.pi, points, endpoint=False)
    return [LogicalStateSpec(math.pi / 2, float(p)) for p in phis]


def cmd_tomo(args) -> int:
    _require_out(args)
    _check_positive("--points", args.points, allow_none=False)
    _check_positive("--shots", args.shots)
    noise = resolve_noise(args)
    fids = _readout_fidelities(args)
    # measured qubits: ancilla on Q3, decoded logical on Q1
    conf = tuple(symmetric_confusion(fids[q]) for q in (2, 0)) if fids else None
    readout = Readout(shots=args.shots, confusions=conf)
    sim = TomographySimulator(noise)
    results = [
        run_tomography(spec, seed=args.seed + 3 * i, readout=readout, simulator=sim)
        for i, spec in enumerate(_tomo_specs(args.grid, args.points))
    ]
    _emit(tomography_csv(results), args.out)
    return EXIT_OK


def load_dataset(path: str | None) -> FitDataset:
    if path is None:
        return FitDataset.from_json(_data_text("synthetic_dataset.json"))
    raw = _read_json(path, "dataset")
    if not isinstance(raw, dict):
        raise ConfigError(f"dataset {path!r} must be a JSON object")
    try:
        return FitDataset.from_dict(raw)
    except ValueError as exc:
        raise ConfigError(f"dataset {path!r}: {exc}") from exc


def cmd_fit(args) -> int:
    _check_positive("--budget", args.budget, allow_none=False)
    data = load_dataset(args.data)
    est = NoiseModelEstimator(seed=args.seed, budget=args.budget, tie_depolarization=args.tie)
    result = est.fit_dataset(data).result()
    _emit(result.to_json(indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_transpile(args) -> int:
    if (args.circuit is None) == (args.builder is None):
        raise ConfigError("give exactly one of a circuit JSON path or --builder")
    if args.builder:
        circuit = SCHEMES[args.builder](0.0)
    else:
        raw = _read_json(args.circuit, "circuit")
        try:
            circuit = Circuit.from_dict(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid circuit: {exc}") from exc
    try:
        native = transpile(circuit, Topology.chain(circuit.qubit_count), fusion=args.fusion)
    except TopologyError as exc:
        raise ConfigError(f"topology violation: {exc}") from exc
    except TranspileError as exc:
        raise ConfigError(str(exc)) from exc
    payload = {"circuit": native.to_dict(), "metrics": metrics(native)}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK


# verification suite


def _qubit_permutation(pi: tuple[int, ...]) -> np.ndarray:
    """Matrix sending qubit ``q`` of the input to position ``pi[q]``."""
    n = len(pi)
    p = np.zeros((2**n, 2**n))
    for bits in itertools.product((0, 1), repeat=n):
        out = [0] * n
        for q, b in enumerate(bits):
            out[pi[q]] = b
        p[int("".join(map(str, out)), 2), int("".join(map(str, bits)), 2)] = 1.0
    return p


# static layout (first, ancilla, second) -> walking input / output layouts
WALK_IN = _qubit_permutation((1, 0, 2))
WALK_OUT = _qubit_permutation((0, 2, 1))


def _check(deviation: float, tol: float, **extra) -> dict:
    return {"passed": bool(deviation < tol), "max_deviation": float(deviation), **extra}


def check_transpile_soundness(tol: float, seed: int, random_count: int = 200) -> dict:
    circuits = []
    for eps in np.linspace(0.0, math.pi, 5):
        for side in ("first", "second"):
            circuits.append(build_static_detection(float(eps), side))
            circuits.append(build_walking_detection(float(eps), side))
    for basis in "XYZ":
        circuits.append(build_tomography_circuit(1.1, 2.3, basis))
    rng = np.random.default_rng(seed)
    circuits += [random_circuit(3, 8, rng) for _ in range(random_count)]
    worst = 0.0
    for c in circuits:
        native = transpile(c)
        if not all(is_native(o.gate) for o in native.ops()):
            return {"passed": False, "max_deviation": math.inf, "reason": "non-native gate left"}
        rep = equivalent_up_to_global_phase(circuit_unitary(native), circuit_unitary(c), tol)
        worst = max(worst, rep.max_entry_deviation)
    return _check(worst, tol, circuits=len(circuits))


def check_scheme_equivalence(tol: float) -> dict:
    worst_u = worst_p = 0.0
    for eps in np.linspace(0.0, math.pi, 21):
        for side in ("first", "second"):
            s, w = build_static_detection(float(eps), side), build_walking_detection(float(eps), side)
            us, uw = circuit_unitary(s), circuit_unitary(w)
            worst_u = max(worst_u, float(np.max(np.abs(uw - WALK_OUT @ us @ WALK_IN.T))))
            # noiseless joint (ancilla, logical) distributions through the native circuits
            joint = []
            for c in (s, w):
                u = circuit_unitary(transpile(c))
                rho = np.outer(u[:, 0], u[:, 0].conj())
                joint.append(z_basis_distribution(rho, [c.metadata["ancilla"], c.metadata["logical"]]))
            worst_p = max(worst_p, float(np.max(np.abs(joint[0] - joint[1]))))
    return _check(max(worst_u, worst_p), tol, unitary_oracle=worst_u, joint_distribution=worst_p)


def check_makhlin(tol: float) -> dict:
    fused = embed(matrix_of(SWAP), (0, 1), 2) @ embed(matrix_of(CNOT), (0, 1), 2)
    g_fused = makhlin_invariants(fused)
    g_iswap = makhlin_invariants(matrix_of(ISWAP))
    inv_dev = max(abs(g_fused[0] - g_iswap[0]), abs(g_fused[1] - g_iswap[1]))
    worst = 0.0
    for mode in ("cz", "iswap"):
        c = Circuit.from_ops(2, fuse_cnot_swap(0, 1, mode))
        native = transpile(c, fusion=mode)
        rep = equivalent_up_to_global_phase(circuit_unitary(native), fused, tol)
        worst = max(worst, rep.max_entry_deviation)
    cz_count = metrics(transpile(Circuit.from_ops(2, fuse_cnot_swap(0, 1, "cz"))))["cz_count"]
    result = _check(max(inv_dev, worst), tol, invariant_deviation=inv_dev, realization_deviation=worst)
    result["two_cz_realization"] = cz_count == 2
    result["passed"] = result["passed"] and cz_count == 2
    return result


def run_verify(tol: float, seed: int = 0) -> dict:
    checks = {
        "transpile_soundness": check_transpile_soundness(tol, seed),
        "scheme_equivalence": check_scheme_equivalence(tol),
        "makhlin_fusion": check_makhlin(tol),
    }
    failed = [k for k, v in checks.items() if not v["passed"]]
    return {"tolerance": tol, "checks": checks, "passed": not failed, "failed": failed}


def cmd_verify(args) -> int:
    if not (args.tolerance > 0 and math.isfinite(args.tolerance)):
        raise ConfigError("--tolerance must be a positive number")
    report = run_verify(args.tolerance, args.seed)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walkqed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, noise=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file")
        if noise:
            p.add_argument("--noise", help="noise-model JSON path, or 'none'")
            p.add_argument("--profile", choices=["paper"], help="bundled device profile")
            p.add_argument("--shots", type=int, help="shots per setting (default: exact)")

    p = sub.add_parser("sweep", help="error-injection sweep, CSV output")
    common(p)
    p.add_argument("--scheme", choices=sorted(SCHEMES), default="walking")
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--error-on", choices=["first", "second"], default="second")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tomo", help="logical state tomography, CSV output")
    common(p)
    p.add_argument("--grid", choices=["reference", "theta", "phi"], default="reference")
    p.add_argument("--points", type=int, default=25)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("fit", help="fit noise parameters to a dataset, JSON output")
    common(p, noise=False)
    p.add_argument("--data", help="dataset JSON (default: bundled synthetic set)")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--tie", action="store_true", help="share one depolarizing probability")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transpile", help="transpile a circuit JSON to native gates")
    common(p, noise=False)
    p.add_argument("circuit", nargs="?", help="circuit JSON path")
    p.add_argument("--builder", choices=sorted(SCHEMES))
    p.add_argument("--fusion", choices=["cz", "iswap"], default="cz")
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("verify", help="run the equivalence suite, JSON report")
    common(p, noise=False)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"walkqed {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level exit-code contract
        print(f"walkqed {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
