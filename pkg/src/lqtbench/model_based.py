"""Model-based LQT solver: iterate the discounted Lyapunov equation and the
gain update until the feedback gain settles, then run the tracking
controller in closed loop with a Luenberger observer supplying the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observer import LuenbergerObserver, observe_step, spectral_radius
from .statespace import (
    AugmentedSystem,
    CostWeights,
    ReferenceGenerator,
    SealedPlant,
    SimulationTrace,
    StateSpaceModel,
    stage_cost,
)

LYAP_RESIDUAL_TOL = 1e-9
LYAP_MAX_SWEEPS = 100_000
OUTER_MAX_ITERS = 1000


class LyapunovDivergenceError(RuntimeError):
    """The fixed-point iteration for the Lyapunov equation cannot converge."""


class GainIterationError(RuntimeError):
    """The outer gain iteration failed to settle within its iteration cap."""


class ClosedLoopDivergenceError(RuntimeError):
    """A closed-loop simulation produced non-finite or exploding signals."""


@dataclass(frozen=True)
class LqtSolution:
    """Converged value kernel P, feedback gain K and iteration diagnostics."""

    P: np.ndarray
    K: np.ndarray
    iterations: int
    gain_delta: float


def lyapunov_residual(aug: AugmentedSystem, w: CostWeights, K: np.ndarray,
                      P: np.ndarray) -> float:
    Acl = aug.T - aug.B1 @ K
    rhs = aug.Q1 + K.T @ w.R @ K + w.gamma * Acl.T @ P @ Acl
    return float(np.linalg.norm(P - rhs, ord="fro"))


def _lyapunov_sweep(aug: AugmentedSystem, w: CostWeights, K: np.ndarray,
                    P: np.ndarray) -> np.ndarray:
    Acl = aug.T - aug.B1 @ K
    P_next = aug.Q1 + K.T @ w.R @ K + w.gamma * Acl.T @ P @ Acl
    return 0.5 * (P_next + P_next.T)


def lyapunov_fixed_point(aug: AugmentedSystem, w: CostWeights, K,
                         P0=None) -> np.ndarray:
    """Solve P = Q1 + K'RK + gamma (T - B1 K)' P (T - B1 K) by fixed point.

    Iterates from P0 (zero by default), symmetrising each sweep, until the
    residual Frobenius norm drops below LYAP_RESIDUAL_TOL.  Convergence
    requires sqrt(gamma) * (T - B1 K) to be stable; otherwise the iteration
    diverges and a LyapunovDivergenceError naming the spectral radius is
    raised.
    """
    K = np.asarray(K, dtype=float)
    P = np.zeros_like(aug.Q1) if P0 is None else np.asarray(P0, dtype=float).copy()
    for _ in range(LYAP_MAX_SWEEPS):
        P_next = _lyapunov_sweep(aug, w, K, P)
        delta = np.linalg.norm(P_next - P, ord="fro")
        P = P_next
        if not np.isfinite(delta) or delta > 1e300:
            break
        if delta <= LYAP_RESIDUAL_TOL and lyapunov_residual(aug, w, K, P) <= LYAP_RESIDUAL_TOL:
            return P
    rho = spectral_radius(np.sqrt(w.gamma) * (aug.T - aug.B1 @ K))
    raise LyapunovDivergenceError(
        f"Lyapunov fixed point did not converge; spectral radius of "
        f"sqrt(gamma)*(T - B1 K) is {rho:.6f}")


def gain_update(aug: AugmentedSystem, w: CostWeights, P) -> np.ndarray:
    """K = (R + gamma B1' P B1)^-1 gamma B1' P T."""
    P = np.asarray(P, dtype=float)
    G = w.R + w.gamma * aug.B1.T @ P @ aug.B1
    return np.linalg.solve(G, w.gamma * aug.B1.T @ P @ aug.T)


def solve_lqt(aug: AugmentedSystem, w: CostWeights, K0, eps: float = 0.01,
              max_iters: int = OUTER_MAX_ITERS) -> LqtSolution:
    """Iterate (policy evaluation, gain update) until |K_j - K_{j-1}|_F <= eps.

    The policy-evaluation step solves the Lyapunov equation to full
    residual tolerance whenever the current gain is stabilising (warm
    started from the previous P).  For a non-stabilising intermediate gain,
    where the fixed point does not exist, a single value-function sweep is
    taken instead; the iteration then behaves as value iteration until a
    stabilising gain is reached.  The converged solution is therefore
    independent of K0.
    """
    K = np.asarray(K0, dtype=float)
    if K.shape != (aug.m, aug.n + aug.p):
        raise ValueError(f"K0 must be {aug.m}x{aug.n + aug.p}, got {K.shape}")
    P = np.zeros_like(aug.Q1)
    sqrt_gamma = np.sqrt(w.gamma)
    for j in range(1, max_iters + 1):
        rho = spectral_radius(sqrt_gamma * (aug.T - aug.B1 @ K))
        if rho < 1.0:
            P = lyapunov_fixed_point(aug, w, K, P0=P)
        else:
            P = _lyapunov_sweep(aug, w, K, P)
        K_next = gain_update(aug, w, P)
        delta = float(np.linalg.norm(K_next - K, ord="fro"))
        K = K_next
        if delta <= eps:
            return LqtSolution(P=P, K=K, iterations=j, gain_delta=delta)
    raise GainIterationError(
        f"gain iteration did not settle within {max_iters} iterations "
        f"(last delta {delta:.3e} > eps {eps:.3e})")


def random_initial_gain(aug: AugmentedSystem, rng: np.random.Generator) -> np.ndarray:
    """m x (n+p) gain with iid Normal(0, variance 10) entries."""
    return rng.normal(0.0, np.sqrt(10.0), size=(aug.m, aug.n + aug.p))


def run_observer_closed_loop(model: StateSpaceModel, gen: ReferenceGenerator,
                             w: CostWeights, solution: LqtSolution,
                             obs: LuenbergerObserver, x0, steps: int,
                             divergence_limit: float = 1e9) -> SimulationTrace:
    """Apply u = -K [x̂; r] for `steps` steps, estimating x̂ from measurements.

    The plant is sealed: the controller sees only y(t).  The trace records
    x(t) and x̂(t) as diagnostics and ends with the state reached after the
    final input (so trace length is steps + 1, with the last input repeated
    as a placeholder of zeros cost-wise excluded by `performance_index`).
    """
    plant = SealedPlant(model, x0)
    K = solution.K
    r = gen.r0.copy()
    trace = SimulationTrace(gamma=w.gamma)
    for _ in range(steps):
        y = plant.measure()
        X_obs = np.concatenate([obs.xhat, r])
        u = -K @ X_obs
        c = stage_cost(w, y, r, u)
        trace.append(y=y, u=u, r=r, cost=c, x=plant.diagnostic_state(),
                     xhat=obs.xhat.copy(), yhat=obs.yhat)
        plant.apply(u)
        observe_step(obs, u, y)
        r = gen.F @ r
        if not np.isfinite(y).all() or np.max(np.abs(y)) > divergence_limit:
            raise ClosedLoopDivergenceError(
                "closed loop diverged; check gain convergence and weights")
    # terminal sample: state after the last input, zero-input placeholder
    y = plant.measure()
    trace.append(y=y, u=np.zeros(model.m), r=r, cost=stage_cost(w, y, r, np.zeros(model.m)),
                 x=plant.diagnostic_state(), xhat=obs.xhat.copy(), yhat=obs.yhat)
    return trace
