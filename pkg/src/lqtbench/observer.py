"""Luenberger observer: gain design from the tau-regularised formula and
state-estimate propagation from measured outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .statespace import StateSpaceModel, _as_vector, is_observable


class ObserverDesignError(RuntimeError):
    """The designed observer gain does not stabilise A - LC."""


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def design_gain(model: StateSpaceModel, tau: float) -> np.ndarray:
    """Observer gain L = A C' (C C' + tau I)^-1.

    Requires an observable model and tau > 0.  Raises ObserverDesignError if
    the resulting A - LC is not stable in the discrete-time sense
    (spectral radius < 1); this formula is not guaranteed to stabilise
    arbitrary systems.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not is_observable(model):
        raise ObserverDesignError("model is not observable; gain design is ill-posed")
    A, C = model.A, model.C
    psi = C @ C.T + tau * np.eye(model.p)
    # psi is symmetric PD for tau > 0; solve via Cholesky.
    cho = scipy.linalg.cho_factor(psi)
    L = scipy.linalg.cho_solve(cho, (A @ C.T).T).T
    rho = spectral_radius(A - L @ C)
    if rho >= 1.0:
        raise ObserverDesignError(
            f"A - LC is unstable (spectral radius {rho:.6f} >= 1); try a different tau")
    return L


@dataclass
class LuenbergerObserver:
    """Mutable observer state: x̂(t+1) = A x̂ + B u + L (y - C x̂)."""

    model: StateSpaceModel
    L: np.ndarray
    xhat: np.ndarray
    tau: float = field(default=0.002)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        if self.L.shape != (self.model.n, self.model.p):
            raise ValueError(f"L must be {self.model.n}x{self.model.p}, got {self.L.shape}")
        self.xhat = _as_vector(self.xhat, self.model.n, "xhat")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    @classmethod
    def design(cls, model: StateSpaceModel, xhat0, tau: float = 0.002) -> "LuenbergerObserver":
        return cls(model=model, L=design_gain(model, tau), xhat=xhat0, tau=tau)

    @property
    def yhat(self) -> np.ndarray:
        return self.model.C @ self.xhat


def observe_step(obs: LuenbergerObserver, u, y) -> np.ndarray:
    """Advance the estimate one step from the applied input and measured output."""
    u = _as_vector(u, obs.model.m, "u")
    y = _as_vector(y, obs.model.p, "y")
    m = obs.model
    obs.xhat = m.A @ obs.xhat + m.B @ u + obs.L @ (y - m.C @ obs.xhat)
    return obs.xhat


def estimation_error(xhat, x) -> float:
    """Euclidean norm of the state-estimate error."""
    xhat = np.asarray(xhat, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if xhat.size != x.size:
        raise ValueError("xhat and x must have the same length")
    return float(np.linalg.norm(xhat - x))
