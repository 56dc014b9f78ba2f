"""Gaussian-process Bayesian optimization of the diagonal cost weights.

The decision vector theta stacks the diagonals of Q and R.  Fitness is the
discounted sum of squared tracking error plus squared input norm of a
closed-loop run under diag(theta) weights; a zero-mean GP with the
square-exponential kernel exp(-|theta - theta'|^2) models it, and the next
sample minimises the lower-confidence acquisition mu - epsilon * k over a
seeded Latin-hypercube candidate pool.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import qmc

PENALTY_FITNESS = 1e12
GRAM_JITTER = 1e-10
GRAM_JITTER_MAX = 1e-2


class GpSingularError(np.linalg.LinAlgError):
    """The GP Gram matrix stayed singular through the whole jitter ladder."""


@dataclass(frozen=True)
class SearchDomain:
    """Box bounds for theta = (q_1..q_p, r_1..r_m); all entries positive."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if not (lo > 0).all():
            raise ValueError("lower bounds must be positive (diagonal weights must be PD)")
        if not (lo < hi).all():
            raise ValueError("lower bounds must be below upper bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return bool((theta >= self.lower).all() and (theta <= self.upper).all())

    def uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def latin_hypercube(self, seed: int, count: int) -> np.ndarray:
        unit = qmc.LatinHypercube(d=self.dim, seed=seed).random(count)
        return qmc.scale(unit, self.lower, self.upper)


def bounds_observer(p: int = 5, m: int = 7) -> SearchDomain:
    """Preset: Q diagonal in [0.01, 1], R diagonal in [0.01, 0.4]."""
    return SearchDomain(lower=np.concatenate([np.full(p, 0.01), np.full(m, 0.01)]),
                        upper=np.concatenate([np.full(p, 1.0), np.full(m, 0.4)]))


def bounds_datadriven(p: int = 5, m: int = 7) -> SearchDomain:
    """Preset: Q diagonal in [0.1, 1], R diagonal in [0.1, 0.4]."""
    return SearchDomain(lower=np.concatenate([np.full(p, 0.1), np.full(m, 0.1)]),
                        upper=np.concatenate([np.full(p, 1.0), np.full(m, 0.4)]))


BOUNDS_PRESETS = {"bounds-observer": bounds_observer, "bounds-datadriven": bounds_datadriven}


@dataclass(frozen=True)
class AcquisitionConfig:
    epsilon: float = 2.0
    candidate_count: int = 2048
    iterations: int = 100
    init_samples: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be at least 1")
        if self.init_samples < 1 or self.iterations < 0:
            raise ValueError("need at least one initial sample and nonnegative iterations")


def se_kernel(a, b) -> float:
    """Square-exponential kernel exp(-|a - b|^2); 1 iff a == b."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("kernel arguments must have equal dimension")
    return float(np.exp(-np.sum((a - b) ** 2)))


def _kernel_matrix(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    sq = (np.sum(X**2, axis=1)[:, None] + np.sum(Y**2, axis=1)[None, :]
          - 2.0 * X @ Y.T)
    return np.exp(-np.maximum(sq, 0.0))


@dataclass
class GpState:
    """Sampled points, their fitness values and the factored Gram matrix."""

    X: np.ndarray                 # (l, dim)
    F: np.ndarray                 # (l,)
    jitter: float = field(default=GRAM_JITTER, init=False)
    _cho: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.F = np.asarray(self.F, dtype=float).reshape(-1)
        if len(self.X) != len(self.F):
            raise ValueError("point and fitness counts differ")
        if len(self.X) == 0:
            raise ValueError("GpState needs at least one sample")
        self._refactor()

    def _refactor(self):
        K = _kernel_matrix(self.X, self.X)
        jitter = GRAM_JITTER
        while jitter <= GRAM_JITTER_MAX:
            try:
                self._cho = scipy.linalg.cho_factor(K + jitter * np.eye(len(K)))
                self.jitter = jitter
                return
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                jitter *= 10.0
        raise GpSingularError(f"Gram matrix singular up to jitter {GRAM_JITTER_MAX:g}")

    def add(self, theta, value: float) -> None:
        self.X = np.vstack([self.X, np.asarray(theta, dtype=float).reshape(1, -1)])
        self.F = np.append(self.F, float(value))
        self._refactor()

    @property
    def gram(self) -> np.ndarray:
        return _kernel_matrix(self.X, self.X)


def gp_posterior(state: GpState, x):
    """Zero-mean posterior (mu_l(x), k_l(x)); variance clamped at 0.

    Supports a single point (1-D x) or a batch (2-D x, one row per point).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = np.atleast_2d(x)
    k_star = _kernel_matrix(Xq, state.X)                 # (q, l)
    alpha = scipy.linalg.cho_solve(state._cho, state.F)
    mean = k_star @ alpha
    v = scipy.linalg.cho_solve(state._cho, k_star.T)     # (l, q)
    var = 1.0 - np.sum(k_star * v.T, axis=1)
    var = np.maximum(var, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def ucb(state: GpState, x, epsilon: float) -> float:
    """Acquisition mu_l(x) - epsilon * k_l(x); smaller is more promising."""
    mean, var = gp_posterior(state, x)
    return mean - epsilon * var


def propose_next(state: GpState, cfg: AcquisitionConfig, domain: SearchDomain,
                 pool_seed: int = None) -> np.ndarray:
    """Minimise the acquisition over a seeded Latin-hypercube candidate pool."""
    seed = cfg.seed if pool_seed is None else pool_seed
    pool = domain.latin_hypercube(seed, cfg.candidate_count)
    mean, var = gp_posterior(state, pool)
    scores = mean - cfg.epsilon * var
    return pool[int(np.argmin(scores))]


def fitness(evaluator, theta, horizon: int, gamma: float = 0.99,
            penalty: float = PENALTY_FITNESS) -> float:
    """Discounted sum of |y - r|^2 + |u|^2 over the first `horizon` steps.

    `evaluator` maps theta to a closed-loop trace (objects exposing y, r, u
    sequences); any failure to produce a finite trace yields the penalty
    value so the surrounding optimization can continue.
    """
    try:
        trace = evaluator(theta)
    except Exception:
        return penalty
    y = np.asarray(trace.y, dtype=float)
    r = np.asarray(trace.r, dtype=float)
    u = np.asarray(trace.u, dtype=float)
    steps = min(horizon, len(u))
    tt = np.arange(steps)
    vals = (np.sum((y[:steps] - r[:steps]) ** 2, axis=1)
            + np.sum(u[:steps] ** 2, axis=1))
    total = float(np.sum(gamma**tt * vals))
    if not np.isfinite(total) or total > penalty:
        return penalty
    return total


@dataclass(frozen=True)
class BoResult:
    theta_best: np.ndarray
    fitness_best: float
    history: np.ndarray   # (init + iterations, dim + 1): theta columns then fitness


def optimize(objective, domain: SearchDomain, cfg: AcquisitionConfig) -> BoResult:
    """Run the BO loop: uniform initial design, then propose/evaluate/update.

    `objective` maps theta to a scalar fitness (use `fitness` with a bound
    evaluator).  The returned theta_best is the argmin of the posterior mean
    restricted to the evaluated points; deterministic given cfg.seed.
    """
    rng = np.random.default_rng(cfg.seed)
    X = domain.uniform(rng, cfg.init_samples)
    F = np.array([float(objective(theta)) for theta in X])
    state = GpState(X=X, F=F)
    for it in range(cfg.iterations):
        theta = propose_next(state, cfg, domain, pool_seed=cfg.seed * 100_003 + it)
        state.add(theta, float(objective(theta)))
    mean, _ = gp_posterior(state, state.X)
    best = int(np.argmin(mean))
    history = np.column_stack([state.X, state.F])
    return BoResult(theta_best=state.X[best].copy(),
                    fitness_best=float(state.F[best]), history=history)


def save_history_csv(result: BoResult, path) -> None:
    dim = result.history.shape[1] - 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter"] + [f"theta_{i+1}" for i in range(dim)] + ["fitness"])
        for i, row in enumerate(result.history):
            writer.writerow([i] + list(row))
