import numpy as np
import pytest

from lqtbench.statespace import (
    CostWeights,
    ReferenceGenerator,
    StateSpaceModel,
    is_controllable,
    is_observable,
)


def random_siso_like_model(rng: np.random.Generator, n: int = 2, m: int = 1,
                           p: int = 1, rho_max: float = 0.95) -> StateSpaceModel:
    """Random stable, controllable and observable model (rejection sampled)."""
    for _ in range(200):
        A = rng.normal(size=(n, n))
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        A = A * (rho_max / max(rho, 1e-6)) * rng.uniform(0.5, 1.0)
        B = rng.normal(size=(n, m))
        C = rng.normal(size=(p, n))
        model = StateSpaceModel(A=A, B=B, C=C)
        if is_controllable(model) and is_observable(model):
            return model
    raise RuntimeError("could not sample a controllable+observable model")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model(rng):
    return random_siso_like_model(rng)


@pytest.fixture
def small_reference():
    return ReferenceGenerator(F=np.eye(1), r0=np.array([1.0]))


@pytest.fixture
def small_weights():
    return CostWeights(Q=np.eye(1), R=np.eye(1), gamma=0.99)
