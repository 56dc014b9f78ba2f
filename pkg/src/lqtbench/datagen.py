"""Training-data generation: stabilising feedback plus probing noise.

The input applied while collecting data is u(t) = -K_data x(t) + w_pr(t),
where w_pr is a fresh Gaussian vector each step plus a ladder of sinusoids
with amplitudes 100, 90, ..., 10 whose frequencies are drawn once per
dataset.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .statespace import (
    ReferenceGenerator,
    SealedPlant,
    StateSpaceModel,
    _as_vector,
    is_controllable,
)

AMPLITUDE_LADDER = np.arange(100.0, 0.0, -10.0)   # 100, 90, ..., 10
AMPLITUDE_SUM = float(AMPLITUDE_LADDER.sum())     # 550


class DataGenerationError(RuntimeError):
    """Dataset generation failed (divergence or an unusable gain)."""


@dataclass(frozen=True)
class ProbingNoiseConfig:
    """Probing-noise parameters.

    sigma is the Gaussian variance (each component has standard deviation
    sqrt(sigma)).  omega2 is the fixed frequency of the largest sinusoid;
    the published value is 16.5 even though the stated system bandwidth is
    1.65 -- pass bandwidth_omega2=True to use the bandwidth instead.  The
    remaining frequencies are drawn uniformly from (0, bandwidth) once per
    dataset.
    """

    m: int = 7
    sigma: float = 1.5
    omega2: float = 16.5
    bandwidth: float = 1.65
    seed: int = 0
    bandwidth_omega2: bool = False
    amplitudes: np.ndarray = field(default_factory=lambda: AMPLITUDE_LADDER.copy())

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if not np.allclose(np.diff(amps), -10.0) or amps[0] != 100.0 or amps[-1] != 10.0:
            raise ValueError("amplitudes must be the ladder 100, 90, ..., 10")
        if self.sigma <= 0 or self.bandwidth <= 0:
            raise ValueError("sigma and bandwidth must be positive")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def omega2_effective(self) -> float:
        return self.bandwidth if self.bandwidth_omega2 else self.omega2


@dataclass(frozen=True)
class StabilizingGain:
    """State-feedback gain used during data collection; u = -K_data x."""

    K_data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K_data", np.asarray(self.K_data, dtype=float))

    def check_against(self, model: StateSpaceModel) -> float:
        """Spectral radius of A - B K_data; must be < 1 to be usable."""
        rho = float(np.max(np.abs(np.linalg.eigvals(model.A - model.B @ self.K_data))))
        if rho >= 1.0:
            raise DataGenerationError(
                f"gain does not stabilise the model (spectral radius {rho:.4f})")
        return rho


@dataclass
class IoDataset:
    """Time-indexed input/output record plus the reference trajectory."""

    u: np.ndarray        # (M, m)
    y: np.ndarray        # (M, p)
    r: np.ndarray        # (M, p)
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.u) == len(self.y) == len(self.r)):
            raise ValueError("u, y, r must have equal lengths")
        if not (np.isfinite(self.u).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains non-finite samples")

    @property
    def M(self) -> int:
        return len(self.u)

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    def check_sample_bound(self, N: int) -> None:
        """Enforce M >> ((N+1)m + (N+1)p)^2 / 2 before training."""
        d = (N + 1) * (self.m + self.p)
        if self.M < d * d / 2:
            raise ValueError(
                f"dataset too small: M={self.M} must exceed d^2/2 = {d * d / 2:.0f} for N={N}")

    def to_csv(self, path, sidecar_path=None) -> None:
        header = (["t"] + [f"u{i+1}" for i in range(self.m)]
                  + [f"y{i+1}" for i in range(self.p)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.M):
                writer.writerow([t] + list(self.u[t]) + list(self.y[t]))
        if sidecar_path is not None:
            with open(sidecar_path, "w") as fh:
                json.dump({"seed": self.seed, "M": self.M, **self.meta}, fh, indent=2)


def riccati_iteration_gain(A, B, Q, R, gamma: float = 1.0, tol: float = 1e-10,
                           max_iters: int = 200_000):
    """Plain Riccati value iteration; returns (K, P).

    Independent of the augmented-system machinery so it can serve as both
    the data-collection gain designer and a test oracle.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    P = np.zeros_like(A)
    for _ in range(max_iters):
        G = R + gamma * B.T @ P @ B
        K = np.linalg.solve(G, gamma * B.T @ P @ A)
        P_next = Q + gamma * A.T @ P @ A - gamma * A.T @ P @ B @ K
        P_next = 0.5 * (P_next + P_next.T)
        if np.linalg.norm(P_next - P, ord="fro") <= tol:
            return np.linalg.solve(R + gamma * B.T @ P_next @ B,
                                   gamma * B.T @ P_next @ A), P_next
        P = P_next
    raise DataGenerationError("Riccati iteration did not converge")


def discrete_lqr_gain(model: StateSpaceModel, Q_lqr, R_lqr,
                      gamma: float = 1.0) -> StabilizingGain:
    """LQR gain for the non-augmented plant, via Riccati value iteration."""
    if not is_controllable(model):
        raise DataGenerationError("model is not controllable; LQR design is ill-posed")
    # A marginally unstable plant with gamma=1 still admits a stabilising
    # solution, but the value iteration needs a contraction; shrink gamma
    # a hair below 1 in that case.
    rho_A = float(np.max(np.abs(np.linalg.eigvals(model.A))))
    if gamma * rho_A**2 >= 1.0 and gamma == 1.0:
        gamma = min(1.0 - 1e-9, 0.999999 / max(rho_A**2, 1.0))
    K, _ = riccati_iteration_gain(model.A, model.B, np.asarray(Q_lqr, dtype=float),
                                  np.asarray(R_lqr, dtype=float), gamma=gamma)
    gain = StabilizingGain(K_data=K)
    gain.check_against(model)
    return gain


class ProbingNoise:
    """Stateful probing-noise sampler; frequencies frozen at construction."""

    def __init__(self, cfg: ProbingNoiseConfig, rng: np.random.Generator):
        self.cfg = cfg
        self._rng = rng
        m = cfg.m
        n_sines = len(cfg.amplitudes)
        self.freqs = np.empty((n_sines, m))
        self.freqs[0] = cfg.omega2_effective
        self.freqs[1:] = rng.uniform(0.0, cfg.bandwidth, size=(n_sines - 1, m))

    def __call__(self, t: int) -> np.ndarray:
        gauss = self._rng.normal(0.0, np.sqrt(self.cfg.sigma), size=self.cfg.m)
        sines = self.cfg.amplitudes @ np.sin(self.freqs * t)
        return gauss + sines


def probing_noise(cfg: ProbingNoiseConfig, t: int, *, sampler: ProbingNoise = None,
                  rng: np.random.Generator = None) -> np.ndarray:
    """Probing-noise sample at step t (builds a one-shot sampler if needed)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sampler is None:
        sampler = ProbingNoise(cfg, rng or np.random.default_rng(cfg.seed))
    return sampler(t)


def generate_dataset(model: StateSpaceModel, gain: StabilizingGain,
                     cfg: ProbingNoiseConfig, gen: ReferenceGenerator, M: int,
                     x0, envelope: float = 1e6,
                     divergence_limit: float = 1e9) -> IoDataset:
    """Simulate the plant under u = -K_data x + w_pr and record (u, y).

    Deterministic given cfg.seed.  Raises on divergence (any |y| beyond
    divergence_limit) which indicates a non-stabilising gain.
    """
    rho = gain.check_against(model)
    x = _as_vector(x0, model.n, "x0")
    rng = np.random.default_rng(cfg.seed)
    sampler = ProbingNoise(cfg, rng)
    us = np.empty((M, model.m))
    ys = np.empty((M, model.p))
    rs = gen.trajectory(M - 1) if M > 0 else np.empty((0, gen.p))
    plant = SealedPlant(model, x)
    for t in range(M):
        xt = plant.diagnostic_state()
        u = -gain.K_data @ xt + sampler(t)
        y = plant.measure()
        if not np.isfinite(y).all() or np.max(np.abs(y)) > divergence_limit:
            raise DataGenerationError(
                f"simulation diverged at step {t}; recheck the stabilising gain "
                f"(spectral radius was {rho:.4f})")
        us[t] = u
        ys[t] = y
        plant.apply(u)
    if np.max(np.abs(ys), initial=0.0) > envelope:
        raise DataGenerationError(f"output left the usability envelope |y| <= {envelope:g}")
    meta = {"sigma": cfg.sigma, "omega2": cfg.omega2_effective,
            "bandwidth": cfg.bandwidth, "x0": list(np.asarray(x0, dtype=float))}
    return IoDataset(u=us, y=ys, r=rs[:M], seed=cfg.seed, meta=meta)


def load_dataset_csv(path, reference: ReferenceGenerator, seed: int = -1) -> IoDataset:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    m = sum(1 for name in rows.dtype.names if name.startswith("u"))
    p = sum(1 for name in rows.dtype.names if name.startswith("y"))
    u = np.column_stack([rows[f"u{i+1}"] for i in range(m)])
    y = np.column_stack([rows[f"y{i+1}"] for i in range(p)])
    r = reference.trajectory(len(u) - 1)[: len(u)]
    return IoDataset(u=u, y=y, r=r, seed=seed)
