"""Discrete-time state-space plants, references, quadratic costs and the
state/reference augmentation shared by the model-based and data-driven
tracking controllers.

Conventions: all matrices are dense float64 numpy arrays.  A plant is
x(t+1) = A x(t) + B u(t), y(t) = C x(t) with n states, m inputs and p
outputs.  The reference evolves as r(t+1) = F r(t).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RANK_RTOL = 1e-9          # singular values below RANK_RTOL * sigma_max count as zero
PD_MIN_EIG = 1e-12        # smallest eigenvalue required of a weight matrix


class DimensionError(ValueError):
    """A vector or matrix does not have the dimensions the operation requires."""


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _as_vector(v, size: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != size:
        raise DimensionError(f"{name} must have length {size}, got {v.size}")
    return v


def _check_pd(M: np.ndarray, name: str) -> None:
    if not np.allclose(M, M.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    lam_min = float(np.linalg.eigvalsh(M).min())
    if lam_min <= PD_MIN_EIG:
        raise ValueError(f"{name} must be positive definite (min eigenvalue {lam_min:g})")


@dataclass(frozen=True)
class StateSpaceModel:
    """Plant matrices A (n x n), B (n x m), C (p x n)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        if min(n, B.shape[1], C.shape[0]) < 1:
            raise DimensionError("n, m, p must all be at least 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class ReferenceGenerator:
    """Reference dynamics r(t+1) = F r(t) started from r0."""

    F: np.ndarray
    r0: np.ndarray

    def __post_init__(self):
        F = _as_matrix(self.F, "F")
        if F.shape[0] != F.shape[1]:
            raise DimensionError(f"F must be square, got {F.shape}")
        r0 = _as_vector(self.r0, F.shape[0], "r0")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "r0", r0)

    @property
    def p(self) -> int:
        return self.F.shape[0]

    def trajectory(self, steps: int) -> np.ndarray:
        """Reference samples r(0) .. r(steps) as a (steps+1, p) array."""
        out = np.empty((steps + 1, self.p))
        r = self.r0
        for t in range(steps + 1):
            out[t] = r
            r = self.F @ r
        return out


@dataclass(frozen=True)
class CostWeights:
    """Tracking weight Q (p x p), input weight R (m x m), discount gamma."""

    Q: np.ndarray
    R: np.ndarray
    gamma: float = 0.99

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        _check_pd(Q, "Q")
        _check_pd(R, "R")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def p(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class AugmentedSystem:
    """Block matrices over the stacked state [x; r].

    T = diag(A, F), B1 = [B; 0] and Q1 = [[C'QC, -C'Q], [-QC, Q]].
    """

    T: np.ndarray
    B1: np.ndarray
    Q1: np.ndarray
    n: int
    m: int
    p: int


def step(model: StateSpaceModel, x, u) -> np.ndarray:
    """One plant update: returns A x + B u."""
    x = _as_vector(x, model.n, "x")
    u = _as_vector(u, model.m, "u")
    return model.A @ x + model.B @ u


def output(model: StateSpaceModel, x) -> np.ndarray:
    """Measurement y = C x."""
    x = _as_vector(x, model.n, "x")
    return model.C @ x


def reference_step(gen: ReferenceGenerator, r) -> np.ndarray:
    """One reference update: returns F r."""
    r = _as_vector(r, gen.p, "r")
    return gen.F @ r


def stage_cost(w: CostWeights, y, r, u) -> float:
    """Quadratic stage cost (y - r)' Q (y - r) + u' R u."""
    y = _as_vector(y, w.p, "y")
    r = _as_vector(r, w.p, "r")
    u = _as_vector(u, w.m, "u")
    e = y - r
    return float(e @ w.Q @ e + u @ w.R @ u)


def controllability_matrix(model: StateSpaceModel) -> np.ndarray:
    """[B, AB, ..., A^(n-1) B], shape n x (n*m)."""
    blocks = []
    Ak_B = model.B
    for _ in range(model.n):
        blocks.append(Ak_B)
        Ak_B = model.A @ Ak_B
    return np.hstack(blocks)


def observability_matrix(model: StateSpaceModel) -> np.ndarray:
    """[C; CA; ...; C A^(n-1)], shape (n*p) x n."""
    blocks = []
    C_Ak = model.C
    for _ in range(model.n):
        blocks.append(C_Ak)
        C_Ak = C_Ak @ model.A
    return np.vstack(blocks)


def _rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def is_controllable(model: StateSpaceModel) -> bool:
    return _rank(controllability_matrix(model)) == model.n


def is_observable(model: StateSpaceModel) -> bool:
    return _rank(observability_matrix(model)) == model.n


def augment(model: StateSpaceModel, gen: ReferenceGenerator, w: CostWeights) -> AugmentedSystem:
    """Build T = diag(A, F), B1 = [B; 0] and the augmented weight Q1."""
    n, m, p = model.n, model.m, model.p
    if gen.p != p or w.p != p or w.m != m:
        raise DimensionError("model, reference and weights have inconsistent dimensions")
    T = np.zeros((n + p, n + p))
    T[:n, :n] = model.A
    T[n:, n:] = gen.F
    B1 = np.vstack([model.B, np.zeros((p, m))])
    C, Q = model.C, w.Q
    Q1 = np.block([[C.T @ Q @ C, -C.T @ Q], [-Q @ C, Q]])
    Q1 = 0.5 * (Q1 + Q1.T)
    return AugmentedSystem(T=T, B1=B1, Q1=Q1, n=n, m=m, p=p)


@dataclass
class SimulationTrace:
    """Per-step record of a closed-loop run.

    Append-only; x/xhat are optional diagnostics (data-driven runs never see
    the state).  The running discounted cost is recomputable from the stored
    stage costs.
    """

    gamma: float
    x: list = field(default_factory=list)
    xhat: list = field(default_factory=list)
    y: list = field(default_factory=list)
    yhat: list = field(default_factory=list)
    u: list = field(default_factory=list)
    r: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    cum_cost: list = field(default_factory=list)

    def append(self, *, y, u, r, cost, x=None, xhat=None, yhat=None):
        t = len(self.cost)
        running = (self.cum_cost[-1] if self.cum_cost else 0.0) + self.gamma**t * cost
        self.y.append(np.asarray(y, dtype=float))
        self.u.append(np.asarray(u, dtype=float))
        self.r.append(np.asarray(r, dtype=float))
        self.cost.append(float(cost))
        self.cum_cost.append(running)
        self.x.append(None if x is None else np.asarray(x, dtype=float))
        self.xhat.append(None if xhat is None else np.asarray(xhat, dtype=float))
        self.yhat.append(None if yhat is None else np.asarray(yhat, dtype=float))
        lengths = {len(self.x), len(self.xhat), len(self.y), len(self.yhat),
                   len(self.u), len(self.r), len(self.cost), len(self.cum_cost)}
        assert lengths == {t + 1}

    def __len__(self) -> int:
        return len(self.cost)

    def to_csv(self, path) -> None:
        """Write `t,x1..xn,xhat1..xhatn,y1..yp,u1..um,r1..rp,cost,cum_cost`."""
        n = next((v.size for v in self.x if v is not None), 0)
        p = self.y[0].size if self.y else 0
        m = self.u[0].size if self.u else 0
        header = (["t"]
                  + [f"x{i+1}" for i in range(n)]
                  + [f"xhat{i+1}" for i in range(n)]
                  + [f"y{i+1}" for i in range(p)]
                  + [f"u{i+1}" for i in range(m)]
                  + [f"r{i+1}" for i in range(p)]
                  + ["cost", "cum_cost"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(len(self)):
                x = self.x[t] if self.x[t] is not None else np.full(n, np.nan)
                xh = self.xhat[t] if self.xhat[t] is not None else np.full(n, np.nan)
                row = ([t] + list(x) + list(xh) + list(self.y[t])
                       + list(self.u[t]) + list(self.r[t])
                       + [self.cost[t], self.cum_cost[t]])
                writer.writerow(row)


def performance_index(trace: SimulationTrace, w: CostWeights, horizon: int) -> float:
    """Discounted sum of the first `horizon` stage costs of the trace."""
    if horizon > len(trace):
        raise ValueError(f"horizon {horizon} exceeds trace length {len(trace)}")
    disc = w.gamma ** np.arange(horizon)
    return float(disc @ np.asarray(trace.cost[:horizon]))


class SealedPlant:
    """Simulator that exposes only measurements.

    Controllers interact through `measure()` and `apply(u)`; the true state
    is reachable only through `diagnostic_state()`, which exists so traces
    can record x(t) for plotting, never for feedback.
    """

    def __init__(self, model: StateSpaceModel, x0):
        self._model = model
        self._x = _as_vector(x0, model.n, "x0")

    @property
    def model_dims(self) -> tuple[int, int, int]:
        return self._model.n, self._model.m, self._model.p

    def measure(self) -> np.ndarray:
        return self._model.C @ self._x

    def apply(self, u) -> None:
        self._x = step(self._model, self._x, u)

    def diagnostic_state(self) -> np.ndarray:
        return self._x.copy()


# -- plain-text config ingestion ------------------------------------------------

def model_from_dict(d: dict) -> StateSpaceModel:
    return StateSpaceModel(A=np.array(d["A"]), B=np.array(d["B"]), C=np.array(d["C"]))


def reference_from_dict(d: dict) -> ReferenceGenerator:
    r0 = np.asarray(d["r0"], dtype=float).reshape(-1)
    F = np.array(d["F"]) if "F" in d else np.eye(r0.size)
    return ReferenceGenerator(F=F, r0=r0)


def weights_from_dict(d: dict, gamma: float = 0.99) -> CostWeights:
    def expand(entry):
        arr = np.array(entry, dtype=float)
        return np.diag(arr) if arr.ndim == 1 else arr
    return CostWeights(Q=expand(d["Q"]), R=expand(d["R"]), gamma=d.get("gamma", gamma))


def load_system_config(path) -> tuple[StateSpaceModel, ReferenceGenerator, CostWeights]:
    """Load {model, reference, weights} from a JSON file of nested row-major arrays."""
    with open(path) as fh:
        d = json.load(fh)
    return (model_from_dict(d["model"]),
            reference_from_dict(d["reference"]),
            weights_from_dict(d["weights"]))
