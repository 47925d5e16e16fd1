"""Sequential Bayesian optimisation over a box with a GP surrogate and EI.

The search runs in unit-cube coordinates; parameters are mapped back to
their boxes only when the objective is called or a trial is recorded.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize, stats
from scipy.spatial.distance import cdist, pdist

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        if not self.dims:
            raise ValueError("parameter space has no dimensions")
        for name, lo, hi in self.dims:
            if not lo < hi:
                raise ValueError(f"degenerate box for {name}: [{lo}, {hi}]")

    @classmethod
    def unit(cls, names: Sequence[str]) -> "ParamSpace":
        return cls(tuple((n, 0.0, 1.0) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d[0] for d in self.dims)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d[1] for d in self.dims])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d[2] for d in self.dims])

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        x = self.lower + np.clip(u, 0.0, 1.0) * (self.upper - self.lower)
        return np.clip(x, self.lower, self.upper)

    def to_dict(self, x: np.ndarray) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, x)}


@dataclass(frozen=True)
class Trial:
    params: dict
    objective: float
    phase_index: int
    trial_index: int
    failed: bool = False
    acquisition: float | None = None  # EI at the proposal; None for random-init trials

    def to_dict(self) -> dict:
        return {
            "phase_index": self.phase_index,
            "trial_index": self.trial_index,
            "params": self.params,
            "objective": self.objective,
            "failed": self.failed,
            "acquisition": self.acquisition,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trial":
        return cls(dict(d["params"]), float(d["objective"]), int(d["phase_index"]),
                   int(d["trial_index"]), bool(d.get("failed", False)), d.get("acquisition"))


class GaussianProcess:
    """Zero-mean GP with a unit-variance RBF kernel on standardised targets."""

    def __init__(self, length_scale: float, noise: float = 1e-6):
        self.length_scale = length_scale
        self.noise = noise

    def kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d2 = cdist(a, b, "sqeuclidean")
        return np.exp(-0.5 * d2 / self.length_scale**2)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        self.X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.y_mean = y.mean()
        std = y.std()
        self.y_std = std if std > 0 else 1.0
        z = (y - self.y_mean) / self.y_std
        K = self.kernel(self.X, self.X)
        jitter = self.noise
        # duplicated points make K singular at the nominal noise level
        while True:
            try:
                self.chol = linalg.cho_factor(K + jitter * np.eye(len(K)), lower=True)
                break
            except linalg.LinAlgError:
                jitter *= 10
                if jitter > 1.0:
                    raise
        self.weights = linalg.cho_solve(self.chol, z)
        return self

    def predict(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ks = self.kernel(np.atleast_2d(Xs), self.X)
        mu = Ks @ self.weights
        v = linalg.cho_solve(self.chol, Ks.T)
        var = np.maximum(1.0 - np.einsum("ij,ji->i", Ks, v), 0.0)
        return self.y_mean + self.y_std * mu, self.y_std * np.sqrt(var)


def median_length_scale(X: np.ndarray) -> float:
    if len(X) < 2:
        return 1.0
    d = pdist(X)
    d = d[d > 0]
    return float(np.median(d)) if len(d) else 1.0


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float, xi: float = 0.0) -> np.ndarray:
    """EI for maximisation; exactly non-negative."""
    imp = mu - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, imp / sigma, 0.0)
    ei = np.where(sigma > 0, imp * stats.norm.cdf(z) + sigma * stats.norm.pdf(z), np.maximum(imp, 0.0))
    return np.maximum(ei, 0.0)


def propose(gp: GaussianProcess, best: float, dim: int, rng: np.random.Generator,
            n_candidates: int = 1024, n_starts: int = 5, xi: float = 0.0) -> tuple[np.ndarray, float]:
    """Maximise EI: score random candidates, then polish the best few with L-BFGS-B."""
    cand = rng.random((n_candidates, dim))
    mu, sigma = gp.predict(cand)
    ei = expected_improvement(mu, sigma, best, xi)
    best_u, best_ei = cand[np.argmax(ei)], float(ei.max())

    def neg_ei(u):
        m, s = gp.predict(u[None, :])
        return -float(expected_improvement(m, s, best, xi)[0])

    for start in cand[np.argsort(-ei, kind="stable")[:n_starts]]:
        res = optimize.minimize(neg_ei, start, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim)
        if -res.fun > best_ei:
            best_u, best_ei = np.clip(res.x, 0.0, 1.0), -float(res.fun)
    return best_u, max(best_ei, 0.0)


def bayes_opt_phase(
    objective: Callable[[dict], float],
    space: ParamSpace,
    trials_per_phase: int = 50,
    init_random_trials: int = 10,
    rng: np.random.Generator | int | None = 0,
    phase_index: int = 1,
    n_candidates: int = 1024,
    noise: float = 1e-6,
    xi: float = 0.01,
) -> tuple[dict, list[Trial]]:
    """Maximise ``objective`` (called with a ``{name: value}`` dict) over ``space``.

    The first ``init_random_trials`` points come from a scrambled Halton
    sequence; each later point maximises expected improvement under a GP
    refit on all observations so far. ``xi`` is measured in standardised
    objective units. Returns the best parameters (earliest on ties) and
    all trials in evaluation order.
    """
    if not 1 <= init_random_trials <= trials_per_phase:
        raise ValueError("need 1 <= init_random_trials <= trials_per_phase")
    rng = np.random.default_rng(rng)
    init = stats.qmc.Halton(d=space.dim, scramble=True, seed=rng).random(init_random_trials)

    U: list[np.ndarray] = []
    ys: list[float] = []
    trials: list[Trial] = []

    def evaluate(u: np.ndarray, acq: float | None) -> None:
        params = space.to_dict(space.from_unit(u))
        failed = False
        try:
            y = float(objective(params))
            if not math.isfinite(y):
                raise ValueError(f"non-finite objective {y}")
        except Exception as exc:  # noqa: BLE001 - objective failures are recorded, not raised
            log.warning("objective failed at %s: %s", params, exc)
            y, failed = 0.0, True
        U.append(np.asarray(u, dtype=float))
        ys.append(y)
        trials.append(Trial(params, y, phase_index, len(trials), failed, acq))

    for u in init:
        evaluate(u, None)
    while len(trials) < trials_per_phase:
        X = np.array(U)
        gp = GaussianProcess(median_length_scale(X), noise).fit(X, np.array(ys))
        y_best = max(ys)
        xi_scaled = xi * gp.y_std
        u, acq = propose(gp, y_best, space.dim, rng, n_candidates, xi=xi_scaled)
        evaluate(u, acq)

    best = max(range(len(trials)), key=lambda i: (trials[i].objective, -i))
    return dict(trials[best].params), trials
