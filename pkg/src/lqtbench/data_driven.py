"""Data-driven LQT: reconstruct the state from input/output history windows,
learn the value-function kernel by least-squares value iteration, and run
the resulting output-feedback controller.

The lifted regressor is z(t) = [ubar; ybar; r(t-N); u(t)] with
ubar = [u(t-1); ...; u(t-N)] and ybar = [y(t-1); ...; y(t-N)]
(most-recent-first), of dimension d = (N+1)(m+p).  The value function is
the quadratic form z' Hbar z; the greedy input solves dV/du = 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .datagen import IoDataset
from .statespace import (
    CostWeights,
    ReferenceGenerator,
    SealedPlant,
    SimulationTrace,
    StateSpaceModel,
    stage_cost,
)

MOORE_PENROSE_TOL = 1e-9
SYMMETRY_TOL = 1e-10


class RankDeficiencyError(np.linalg.LinAlgError):
    """A matrix that must have full column rank does not."""


class SingularPolicyError(np.linalg.LinAlgError):
    """The H_uu block is too ill-conditioned to extract a policy."""


class TrainingError(RuntimeError):
    """Value iteration could not produce a usable kernel."""


def block_index_map(N: int, m: int, p: int) -> dict[str, slice]:
    """Partition of [0, d) into the ubar / ybar / r / u segments."""
    d = (N + 1) * (m + p)
    s_ubar = slice(0, N * m)
    s_ybar = slice(N * m, N * (m + p))
    s_r = slice(N * (m + p), N * (m + p) + p)
    s_u = slice(d - m, d)
    return {"ubar": s_ubar, "ybar": s_ybar, "r": s_r, "u": s_u}


@dataclass(frozen=True)
class HistoryWindow:
    """Stacked input/output history plus the lagged reference."""

    ubar: np.ndarray   # [u(t-1); ...; u(t-N)]
    ybar: np.ndarray   # [y(t-1); ...; y(t-N)]
    r_lag: np.ndarray  # r(t-N)
    N: int

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.ubar, self.ybar, self.r_lag])


def zbar(hist: HistoryWindow, u) -> np.ndarray:
    """Lifted vector [ubar; ybar; r_lag; u(t)]."""
    return np.concatenate([hist.stacked(), np.asarray(u, dtype=float).reshape(-1)])


@dataclass
class KernelMatrix:
    """Symmetric value-function kernel over the lifted vector."""

    Hbar: np.ndarray
    N: int
    m: int
    p: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.Hbar, dtype=float)
        d = (self.N + 1) * (self.m + self.p)
        if H.shape != (d, d):
            raise ValueError(f"Hbar must be {d}x{d}, got {H.shape}")
        asym = np.linalg.norm(H - H.T, ord="fro")
        if asym > SYMMETRY_TOL * max(1.0, np.linalg.norm(H, ord="fro")):
            raise ValueError(f"Hbar must be symmetric (asymmetry {asym:g})")
        self.Hbar = 0.5 * (H + H.T)
        self.blocks = block_index_map(self.N, self.m, self.p)

    @property
    def d(self) -> int:
        return self.Hbar.shape[0]

    def block(self, row: str, col: str) -> np.ndarray:
        return self.Hbar[self.blocks[row], self.blocks[col]]

    @property
    def H_uu(self) -> np.ndarray:
        return self.block("u", "u")

    def save(self, path) -> None:
        np.savez(path, Hbar=self.Hbar, N=self.N, m=self.m, p=self.p,
                 meta=np.array([repr(self.meta)], dtype=object))

    @classmethod
    def load(cls, path) -> "KernelMatrix":
        data = np.load(path, allow_pickle=True)
        return cls(Hbar=data["Hbar"], N=int(data["N"]), m=int(data["m"]), p=int(data["p"]))


@dataclass(frozen=True)
class TrainingConfig:
    """Value-iteration hyperparameters (defaults are the benchmark values)."""

    gamma: float = 0.99
    mu: float = 1e-4
    eps_rl: float = 1e-3
    max_iters: int = 1000
    N: int = 6
    H0_scale: float = 1.0   # initial kernel = H0_scale * identity

    def __post_init__(self):
        if min(self.gamma, self.mu, self.eps_rl, self.max_iters, self.N) <= 0:
            raise ValueError("all training parameters must be positive")


def pseudo_inverse(W) -> np.ndarray:
    """Moore-Penrose inverse (W'W)^-1 W' of a full-column-rank matrix."""
    W = np.asarray(W, dtype=float)
    s = np.linalg.svd(W, compute_uv=False)
    if s.size == 0 or s[-1] <= MOORE_PENROSE_TOL * s[0]:
        raise RankDeficiencyError(f"matrix is rank deficient (singular values {s})")
    return np.linalg.solve(W.T @ W, W.T)


def build_reconstruction_matrices(model: StateSpaceModel, gen: ReferenceGenerator,
                                  N: int):
    """Model-based state-reconstruction operators (U_N, W_N, D_N, M).

    x(t) = A^N x(t-N) + U_N ubar;  ybar = W_N x(t-N) + D_N ubar;
    [x(t); r(t)] = M [ubar; ybar; r(t-N)].  Used as the oracle path for
    validating the learned kernel; N must be at least n.
    """
    n, m, p = model.n, model.m, model.p
    if N < n:
        raise ValueError(f"N={N} must be at least the state dimension n={n}")
    A, B, C = model.A, model.B, model.C
    A_pows = [np.eye(n)]
    for _ in range(N):
        A_pows.append(A @ A_pows[-1])
    # iterated products (A(A(..B)), (..C)A)A) so that for N = n these agree
    # bit-for-bit with the controllability/observability matrices
    AkB = [B]
    CAk = [C]
    for _ in range(N - 1):
        AkB.append(A @ AkB[-1])
        CAk.append(CAk[-1] @ A)
    U_N = np.hstack(AkB)
    W_N = np.vstack(CAk[::-1])
    D_N = np.zeros((N * p, N * m))
    for i in range(1, N + 1):            # row block: y(t-i)
        for j in range(i + 1, N + 1):    # column block: u(t-j)
            D_N[(i - 1) * p:i * p, (j - 1) * m:j * m] = C @ A_pows[j - i - 1] @ B
    W_pinv = pseudo_inverse(W_N)
    F_N = np.linalg.matrix_power(gen.F, N)
    top = np.hstack([U_N - A_pows[N] @ W_pinv @ D_N, A_pows[N] @ W_pinv,
                     np.zeros((n, p))])
    bottom = np.hstack([np.zeros((p, N * m)), np.zeros((p, N * p)), F_N])
    M = np.vstack([top, bottom])
    return U_N, W_N, D_N, M


def kernel_direct(model: StateSpaceModel, gen: ReferenceGenerator, w: CostWeights,
                  P1: np.ndarray, N: int, Q1: np.ndarray, T: np.ndarray,
                  B1: np.ndarray) -> KernelMatrix:
    """Kernel from the model and the solved value matrix P1.

    H is the one-step quadratic kernel over [X; u]; conjugating by
    blockdiag(M, I_m) expresses it over the lifted history vector.
    """
    _, _, _, M = build_reconstruction_matrices(model, gen, N)
    g = w.gamma
    H = np.block([
        [Q1 + g * T.T @ P1 @ T, g * T.T @ P1 @ B1],
        [g * B1.T @ P1 @ T, w.R + g * B1.T @ P1 @ B1],
    ])
    S = scipy.linalg.block_diag(M, np.eye(model.m))
    Hbar = S.T @ H @ S
    Hbar = 0.5 * (Hbar + Hbar.T)
    return KernelMatrix(Hbar=Hbar, N=N, m=model.m, p=model.p,
                        meta={"source": "direct"})


def policy_from_kernel(kernel: KernelMatrix, hist: HistoryWindow,
                       cond_limit: float = 1e12) -> np.ndarray:
    """Greedy input u = -H_uu^-1 (H_u,ubar ubar + H_u,ybar ybar + H_u,r r)."""
    H_uu = kernel.H_uu
    cond = np.linalg.cond(H_uu)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularPolicyError(f"H_uu is numerically singular (condition {cond:.3e})")
    rhs = (kernel.block("u", "ubar") @ hist.ubar
           + kernel.block("u", "ybar") @ hist.ybar
           + kernel.block("u", "r") @ hist.r_lag)
    return -np.linalg.solve(H_uu, rhs)


def kron_row(z) -> np.ndarray:
    """Row z' (x) z' such that kron_row(z) . vec(H) = z' H z.

    vec is column-major; for the symmetric kernels used here the C-order
    flatten of H gives the same contraction.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    return np.kron(z, z)


def _vec(H: np.ndarray) -> np.ndarray:
    return H.flatten(order="F")


def _unvec(v: np.ndarray, d: int) -> np.ndarray:
    return v.reshape(d, d).T


def _regression_arrays(dataset: IoDataset, N: int):
    """Lifted regressors for every usable time step.

    Returns (Z, next_hist, stage_ingredients) where row t of Z is z(N+t)
    and row t of next_hist is the history part of z(N+t+1).
    """
    M, m, p = dataset.M, dataset.m, dataset.p
    ts = np.arange(N, M - 1)
    Mt = ts.size
    d = (N + 1) * (m + p)

    def hist_rows(offsets_end):
        # stack u(end-1) ... u(end-N), y(end-1) ... y(end-N), r(end-N)
        cols = []
        for k in range(1, N + 1):
            cols.append(dataset.u[offsets_end - k])
        for k in range(1, N + 1):
            cols.append(dataset.y[offsets_end - k])
        cols.append(dataset.r[offsets_end - N])
        return np.hstack(cols)

    hist_now = hist_rows(ts)           # history part of z(t)
    hist_next = hist_rows(ts + 1)      # history part of z(t+1)
    Z = np.hstack([hist_now, dataset.u[ts]])
    assert Z.shape == (Mt, d)
    return ts, Z, hist_next


def _gram_matrix(Z: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """L = sum_t kron_row(z_t)' kron_row(z_t), accumulated in chunks."""
    Mt, d = Z.shape
    L = np.zeros((d * d, d * d))
    for start in range(0, Mt, chunk):
        Zc = Z[start:start + chunk]
        Kc = np.einsum("ti,tj->tij", Zc, Zc).reshape(len(Zc), d * d)
        L += Kc.T @ Kc
    return L


def _factor_regularized(L: np.ndarray, mu: float):
    """Cholesky factor of L + jitter*I, escalating jitter x10 on failure.

    The spectral scale of L grows with the signal amplitudes to the fourth
    power, so roundoff can leave small negative eigenvalues far above the
    nominal mu; the ladder therefore continues past 100*mu up to a
    scale-aware ceiling before giving up.
    """
    d2 = L.shape[0]
    scale_ceiling = max(100.0 * mu, 1e-12 * float(np.mean(np.diag(L))) * 1e4)
    jitter = mu
    while True:
        try:
            return scipy.linalg.cho_factor(L + jitter * np.eye(d2)), jitter
        except np.linalg.LinAlgError:
            pass
        except scipy.linalg.LinAlgError:
            pass
        jitter *= 10.0
        if jitter > scale_ceiling:
            raise TrainingError(
                f"Cholesky factorisation failed up to jitter {jitter / 10:.3e}")


@dataclass
class TrainingContext:
    """Weight-independent regression arrays and the factored Gram matrix.

    The Gram matrix (and its Cholesky factor) depend only on the dataset and
    the window length, not on the cost weights, so one context can back many
    trainings with different (Q, R) -- the expensive part of each extra
    training is then just the sweeps.
    """

    ts: np.ndarray
    Z: np.ndarray
    hist_next: np.ndarray
    factor: tuple
    jitter: float
    N: int
    mu: float


def prepare_training(dataset: IoDataset, cfg: TrainingConfig) -> TrainingContext:
    """Build the lifted regressors and factor the regularised Gram matrix."""
    dataset.check_sample_bound(cfg.N)
    ts, Z, hist_next = _regression_arrays(dataset, cfg.N)
    L = _gram_matrix(Z)
    factor, jitter = _factor_regularized(L, cfg.mu)
    return TrainingContext(ts=ts, Z=Z, hist_next=hist_next, factor=factor,
                           jitter=jitter, N=cfg.N, mu=cfg.mu)


def value_iteration(dataset: IoDataset, cfg: TrainingConfig, w: CostWeights,
                    gen: ReferenceGenerator,
                    context: TrainingContext | None = None) -> KernelMatrix:
    """Learn the kernel from input/output data (regularised LS value iteration).

    Each sweep fits z' H z to the one-step Bellman target whose future term
    uses the current greedy input rather than the recorded one.  The Gram
    matrix of Kronecker rows is built once and its Cholesky factor reused
    across sweeps; pass a prebuilt `context` to reuse it across weight
    choices as well.
    """
    N, m, p = cfg.N, dataset.m, dataset.p
    d = (N + 1) * (m + p)
    blocks = block_index_map(N, m, p)
    s_u = blocks["u"]

    if context is None:
        context = prepare_training(dataset, cfg)
    elif context.N != N:
        raise ValueError(f"context was built for N={context.N}, not N={N}")
    ts, Z, hist_next = context.ts, context.Z, context.hist_next
    factor, jitter = context.factor, context.jitter
    err = dataset.y[ts] - dataset.r[ts]
    stage = (((err @ w.Q) * err).sum(axis=1)
             + ((dataset.u[ts] @ w.R) * dataset.u[ts]).sum(axis=1))

    H = cfg.H0_scale * np.eye(d)
    best = (np.inf, H)
    delta = np.inf
    for i in range(cfg.max_iters):
        H_uu = H[s_u, s_u]
        H_u_hist = H[s_u, : d - m]
        try:
            u_next = -np.linalg.solve(H_uu, H_u_hist @ hist_next.T).T
        except np.linalg.LinAlgError as exc:
            raise TrainingError(f"H_uu became singular at sweep {i}") from exc
        Z_next = np.hstack([hist_next, u_next])
        future = ((Z_next @ H) * Z_next).sum(axis=1)
        target = stage + cfg.gamma * future
        S = Z.T @ (target[:, None] * Z)
        rhs = S.flatten()  # index i*d+j carries sum_t c_t z_i z_j
        vec_new = scipy.linalg.cho_solve(factor, rhs)
        H_new = _unvec(vec_new, d)
        H_new = 0.5 * (H_new + H_new.T)
        delta = float(np.linalg.norm(H_new - H, ord="fro"))
        H = H_new
        if delta < best[0]:
            best = (delta, H)
        if delta <= cfg.eps_rl:
            break
    meta = {"iterations": i + 1, "final_delta": delta, "jitter": jitter,
            "converged": delta <= cfg.eps_rl, "M": dataset.M, "seed": dataset.seed}
    H_out = H if delta <= cfg.eps_rl else best[1]
    return KernelMatrix(Hbar=H_out, N=N, m=m, p=p, meta=meta)


def bellman_residuals(kernel: KernelMatrix, dataset: IoDataset, w: CostWeights) -> np.ndarray:
    """|z'Hz - target| over the dataset, for convergence diagnostics."""
    N = kernel.N
    ts, Z, hist_next = _regression_arrays(dataset, N)
    err = dataset.y[ts] - dataset.r[ts]
    stage = (((err @ w.Q) * err).sum(axis=1)
             + ((dataset.u[ts] @ w.R) * dataset.u[ts]).sum(axis=1))
    H = kernel.Hbar
    d = kernel.d
    m = kernel.m
    s_u = kernel.blocks["u"]
    u_next = -np.linalg.solve(H[s_u, s_u], H[s_u, : d - m] @ hist_next.T).T
    Z_next = np.hstack([hist_next, u_next])
    lhs = ((Z @ H) * Z).sum(axis=1)
    rhs = stage + w.gamma * ((Z_next @ H) * Z_next).sum(axis=1)
    return np.abs(lhs - rhs)


def run_data_driven_closed_loop(plant: SealedPlant, kernel: KernelMatrix,
                                gen: ReferenceGenerator, w: CostWeights,
                                steps: int, warmup_input=None,
                                divergence_limit: float = 1e9) -> SimulationTrace:
    """Run the learned output-feedback controller on a sealed plant.

    The first N steps apply the warmup input (zeros by default) to fill the
    history window; afterwards the greedy kernel policy drives the plant.
    The trace never records the plant state.
    """
    N, m, p = kernel.N, kernel.m, kernel.p
    warmup = np.zeros(m) if warmup_input is None else np.asarray(warmup_input, dtype=float)
    u_hist: deque = deque(maxlen=N)   # newest first
    y_hist: deque = deque(maxlen=N)
    r_traj = gen.trajectory(steps)
    trace = SimulationTrace(gamma=w.gamma)
    for t in range(steps):
        y = plant.measure()
        if not np.isfinite(y).all() or np.max(np.abs(y)) > divergence_limit:
            raise RuntimeError("data-driven closed loop diverged")
        if t < N:
            u = warmup.copy()
        else:
            hist = HistoryWindow(
                ubar=np.concatenate(list(u_hist)),
                ybar=np.concatenate(list(y_hist)),
                r_lag=r_traj[t - N],
                N=N)
            u = policy_from_kernel(kernel, hist)
        c = stage_cost(w, y, r_traj[t], u)
        trace.append(y=y, u=u, r=r_traj[t], cost=c)
        plant.apply(u)
        u_hist.appendleft(u)
        y_hist.appendleft(y)
    y = plant.measure()
    trace.append(y=y, u=np.zeros(m), r=r_traj[steps],
                 cost=stage_cost(w, y, r_traj[steps], np.zeros(m)))
    return trace
