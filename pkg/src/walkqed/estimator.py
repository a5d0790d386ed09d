"""Noise-parameter estimation from logical tomography data.

:class:`NoiseModelEstimator` follows the scikit-learn regressor protocol.
Each row of ``X`` is one measurement setting ``(theta, phi, basis)`` with
the basis coded 0/1/2 for X/Y/Z, and ``y`` holds the measured logical
expectation. ``fit`` searches the four noise parameters (ZZ phase, exchange
angle, p1, p2) with dual annealing, a temperature-scheduled global search
followed by local polishing; ``predict`` simulates the expectations under
the fitted model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import dual_annealing, least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .experiment import BASES, TomographySimulator, sample_shots
from .noise import NoiseModel

PARAM_NAMES = ("delta_phi", "theta", "p1", "p2")
DEFAULT_BOUNDS = {"delta_phi": (-0.2, 0.2), "theta": (0.0, 1.0), "p1": (0.0, 0.1), "p2": (0.0, 0.1)}


@dataclass
class FitDataset:
    """Measured logical expectations on the two standard cross-sections.

    ``x_values[i]`` is ``<X_L>`` at ``theta = pi/2, phi = phi_grid[i]`` and
    ``z_values[j]`` is ``<Z_L>`` at ``theta = theta_grid[j], phi = 0``.
    ``grid`` optionally adds arbitrary ``(theta, phi, basis, value)`` rows.
    """

    phi_grid: np.ndarray
    x_values: np.ndarray
    theta_grid: np.ndarray
    z_values: np.ndarray
    shots: int | None = None
    seed: int | None = None
    grid: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("phi_grid", "x_values", "theta_grid", "z_values"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.phi_grid.size == 0 or self.theta_grid.size == 0:
            raise ValueError("grids must be non-empty")
        if self.phi_grid.shape != self.x_values.shape or self.theta_grid.shape != self.z_values.shape:
            raise ValueError("each grid needs one value per point")
        self.grid = [(float(t), float(p), str(b).upper(), float(v)) for t, p, b, v in self.grid]
        values = np.concatenate([self.x_values, self.z_values, [g[3] for g in self.grid]])
        if np.any(~np.isfinite(values)) or np.any(np.abs(values) > 1 + 1e-9):
            raise ValueError("expectation values must lie in [-1, 1]")

    def points(self) -> list[tuple[float, float, str]]:
        pts = [(math.pi / 2, float(p), "X") for p in self.phi_grid]
        pts += [(float(t), 0.0, "Z") for t in self.theta_grid]
        pts += [(t, p, b) for t, p, b, _ in self.grid]
        return pts

    def values(self) -> np.ndarray:
        return np.concatenate([self.x_values, self.z_values, [g[3] for g in self.grid]])

    def to_xy(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.array([(t, p, BASES.index(b)) for t, p, b in self.points()], dtype=float)
        return X, self.values()

    def to_dict(self) -> dict:
        return {
            "phi_grid": self.phi_grid.tolist(),
            "x_values": self.x_values.tolist(),
            "theta_grid": self.theta_grid.tolist(),
            "z_values": self.z_values.tolist(),
            "shots": self.shots,
            "seed": self.seed,
            "grid": [list(g) for g in self.grid],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "FitDataset":
        try:
            return cls(
                data["phi_grid"],
                data["x_values"],
                data["theta_grid"],
                data["z_values"],
                data.get("shots"),
                data.get("seed"),
                data.get("grid", []),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed dataset: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "FitDataset":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FitResult:
    params: NoiseModel
    residual: float
    evaluations: int
    seed: int
    budget_exhausted: bool = False

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "residual": self.residual,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _points_from_X(X: np.ndarray) -> list[tuple[float, float, str]]:
    codes = X[:, 2]
    if np.any((codes != np.round(codes)) | (codes < 0) | (codes > 2)):
        raise ValueError("basis column must hold 0 (X), 1 (Y) or 2 (Z)")
    return [(float(t), float(p), BASES[int(b)]) for t, p, b in X]


def simulate_expectations(params: NoiseModel, points, branch: str = "all") -> np.ndarray:
    return TomographySimulator(params).expectations(points, branch)


def objective(params: NoiseModel, data: FitDataset, branch: str = "all") -> float:
    """Sum of squared differences between simulated and measured expectations."""
    sim = simulate_expectations(params, data.points(), branch)
    return float(np.sum((sim - data.values()) ** 2))


class _BudgetExhausted(Exception):
    pass


class NoiseModelEstimator(RegressorMixin, BaseEstimator):
    """Fit a :class:`NoiseModel` to logical-expectation data.

    Parameters
    ----------
    bounds : dict, optional
        ``{name: (low, high)}`` for any of delta_phi, theta, p1, p2; missing
        entries use :data:`DEFAULT_BOUNDS`.
    seed : int
        Seed of the annealing chain; equal seeds give identical fits.
    budget : int
        Maximum number of objective evaluations. When it runs out the best
        point seen so far is kept and ``budget_exhausted_`` is set.
    tie_depolarization : bool
        Fit a single depolarizing probability shared by p1 and p2.
    branch : {"all", "plus", "minus"}
        Which syndrome branch ``y`` was measured on.
    local_search : bool
        Polish accepted annealing points with a bounded quasi-Newton search.
    polish : bool
        Finish with a bounded least-squares refinement of the best point.
    anneal_fraction : float
        Share of ``budget`` given to the annealing stage.
    """

    def __init__(
        self,
        bounds=None,
        seed=0,
        budget=2000,
        tie_depolarization=False,
        branch="all",
        local_search=True,
        polish=True,
        anneal_fraction=0.7,
    ):
        self.bounds = bounds
        self.seed = seed
        self.budget = budget
        self.tie_depolarization = tie_depolarization
        self.branch = branch
        self.local_search = local_search
        self.polish = polish
        self.anneal_fraction = anneal_fraction

    def _resolved_bounds(self) -> dict:
        b = dict(DEFAULT_BOUNDS)
        b.update(self.bounds or {})
        unknown = set(b) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown bound names {sorted(unknown)}")
        for name, (lo, hi) in b.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid bounds for {name}: {(lo, hi)}")
        for name in ("p1", "p2"):
            lo, hi = b[name]
            if lo < 0 or hi > 1:
                raise ValueError(f"{name} bounds must lie inside [0, 1]")
        return b

    def _to_model(self, x: np.ndarray) -> NoiseModel:
        if self.tie_depolarization:
            x = (x[0], x[1], x[2], x[2])
        return NoiseModel.from_vector(x)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X.shape[1] != 3:
            raise ValueError("X must have columns (theta, phi, basis)")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0.0 < self.anneal_fraction <= 1.0:
            raise ValueError("anneal_fraction must lie in (0, 1]")
        points = _points_from_X(X)
        b = self._resolved_bounds()
        box = [b["delta_phi"], b["theta"]]
        if self.tie_depolarization:
            lo = max(b["p1"][0], b["p2"][0])
            hi = min(b["p1"][1], b["p2"][1])
            if lo > hi:
                raise ValueError("tied depolarization needs overlapping p1/p2 bounds")
            box.append((lo, hi))
        else:
            box += [b["p1"], b["p2"]]
        box = np.array(box, dtype=float)

        best = {"f": math.inf, "x": box.mean(axis=1)}
        count = [0]
        free = box[:, 1] > box[:, 0]

        def residuals(z):
            if count[0] >= self.budget:
                raise _BudgetExhausted
            count[0] += 1
            x = box[:, 0].copy()
            x[free] = np.clip(z, box[free, 0], box[free, 1])
            r = simulate_expectations(self._to_model(x), points, self.branch) - y
            val = float(r @ r)
            if val < best["f"]:
                best["f"], best["x"] = val, x
            return r

        def sse(z):
            r = residuals(z)
            return float(r @ r)

        # the annealing stage gets most of the budget, the least-squares polish the rest
        anneal_budget = max(1, int(self.budget * self.anneal_fraction))
        try:
            if not free.any():
                residuals(box[free, 0])
            else:
                dual_annealing(
                    sse,
                    box[free],
                    seed=self.seed,
                    maxfun=anneal_budget,
                    no_local_search=not self.local_search,
                )
                if self.polish and count[0] < self.budget:
                    least_squares(
                        residuals,
                        best["x"][free],
                        bounds=(box[free, 0], box[free, 1]),
                        x_scale=box[free, 1] - box[free, 0],
                        max_nfev=self.budget - count[0],
                        xtol=1e-12,
                        ftol=1e-14,
                        gtol=1e-14,
                    )
        except _BudgetExhausted:
            pass

        self.params_ = self._to_model(best["x"])
        self.residual_ = best["f"]
        self.n_evals_ = count[0]
        self.budget_exhausted_ = count[0] >= self.budget
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError("X must have columns (theta, phi, basis)")
        return simulate_expectations(self.params_, _points_from_X(X), self.branch)

    def fit_dataset(self, data: FitDataset) -> "NoiseModelEstimator":
        return self.fit(*data.to_xy())

    def result(self) -> FitResult:
        check_is_fitted(self, "params_")
        return FitResult(self.params_, self.residual_, self.n_evals_, self.seed, self.budget_exhausted_)


def fit(
    data: FitDataset,
    bounds: dict | None = None,
    seed: int = 0,
    budget: int = 2000,
    tie_depolarization: bool = False,
) -> FitResult:
    est = NoiseModelEstimator(bounds=bounds, seed=seed, budget=budget, tie_depolarization=tie_depolarization)
    return est.fit_dataset(data).result()


def bounds_around(params: NoiseModel, fraction: float = 0.5) -> dict:
    """Box of +/- ``fraction`` (relative) around each parameter of ``params``."""
    out = {}
    for name, v in zip(PARAM_NAMES, params.as_vector()):
        lo, hi = sorted((v * (1 - fraction), v * (1 + fraction)))
        out[name] = (lo, hi)
    return out


def generate_synthetic_dataset(
    params: NoiseModel,
    phi_points: int = 13,
    theta_points: int = 13,
    shots: int | None = None,
    seed: int = 0,
) -> FitDataset:
    """Simulated cross-section data; ``phi`` spans ``[0, 2 pi)`` and ``theta`` spans ``[0, pi]``.

    With ``shots``, point ``i`` (phi points first, then theta points) is
    sampled with seed ``seed + i``.
    """
    if phi_points < 2 or theta_points < 2:
        raise ValueError("need at least two points per grid")
    phis = np.linspace(0.0, 2 * math.pi, phi_points, endpoint=False)
    thetas = np.linspace(0.0, math.pi, theta_points)
    data = FitDataset(phis, np.zeros(phi_points), thetas, np.zeros(theta_points), shots, seed)
    exact = simulate_expectations(params, data.points())
    if shots is not None:
        exact = np.array([_sample_expectation(e, shots, seed + i) for i, e in enumerate(exact)])
    data.x_values = exact[:phi_points]
    data.z_values = exact[phi_points:]
    return data


def _sample_expectation(e: float, shots: int, seed: int) -> float:
    p0 = min(max((1.0 + e) / 2.0, 0.0), 1.0)
    freq = sample_shots([p0, 1.0 - p0], shots, seed)
    return float(freq[0] - freq[1])


def recovery_error(fitted: NoiseModel, truth: NoiseModel) -> dict[str, float]:
    return {n: abs(a - b) for n, a, b in zip(PARAM_NAMES, fitted.as_vector(), truth.as_vector())}
