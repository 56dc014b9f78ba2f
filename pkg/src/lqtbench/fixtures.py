"""Numeric fixtures for the six-cell BAAM extruder temperature benchmark.

Transcribed system matrices, the stabilising data-collection gain, the
tuned weight matrices for both controller families, and the published
closed-loop figures used as regression targets.  `FIXTURE_SHA256` pins the
transcription; tests fail if any number drifts.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .statespace import CostWeights, ReferenceGenerator, StateSpaceModel

A = np.array([
    [0.992,  0.0018, 0.0,    0.0,    0.0,    0.0],
    [0.0023, 0.9919, 0.0043, 0.0,    0.0,    0.0],
    [0.0,   -0.0042, 1.0009, 0.0024, 0.0,    0.0],
    [0.0,    0.0,    0.0013, 0.9979, 0.0,    0.0],
    [0.0,    0.0,    0.0,    0.0,    0.9972, 0.0],
    [0.0,    0.0,    0.0,    0.0,    0.0,    0.9953],
])

B = np.array([
    [1.0033, 0.0,    0.0,    0.0,    0.0,    0.0,    -0.2175],
    [0.0,    1.0460, 0.0,    0.0,    0.0,    0.0,    -0.0788],
    [0.0,    0.0,    1.0326, 0.0,    0.0,    0.0,    -0.0020],
    [0.0,    0.0,    0.0,    0.4798, 0.0,    0.0,    -0.0669],
    [0.0,    0.0,    0.0,    0.0,    0.8882, 0.0,     0.1273],
    [0.0,    0.0,    0.0,    0.0,    0.0,    1.1699, -0.1792],
])

C = np.array([
    [0.992,  0.00018, 0.0,    0.0,   -0.0001,  0.0],
    [0.0023, 1.3,     0.0043, 0.0,    0.0,     0.0],
    [0.0,   -0.0042,  1.0109, 0.0024, 0.0,     0.201],
    [0.0,    0.0,     0.0013, 0.989,  0.00031, 0.64],
    [0.0,    0.0,     0.0,    0.0,    0.923,   0.3],
])

# Stabilising feedback used during training-data collection (LQR-designed).
K_DATA = np.array([
    [0.7395, -0.0076, -0.0003, -0.0264,  0.0194, -0.0170],
    [-0.0076,  0.7430,  0.0031, -0.0093,  0.0068, -0.0060],
    [-0.0003, -0.0033,  0.7599,  0.0021,  0.0002, -0.0002],
    [-0.0126, -0.0042,  0.0016,  1.0971,  0.0092, -0.0079],
    [0.0171,  0.0058,  0.0002,  0.0170,  0.8179,  0.0108],
    [-0.0198, -0.0067, -0.0002, -0.0193,  0.0143,  0.6823],
    [-0.1525, -0.0519, -0.0018, -0.1412,  0.1091, -0.0977],
])

REFERENCE = np.array([150.0, 160.0, 170.0, 175.0, 180.0])

X0_OBSERVER = np.full(6, 20.0)      # plant start for observer experiments
XHAT0 = np.full(6, 50.0)            # observer initial estimate
X0_DATA_DRIVEN = np.full(6, 50.0)   # plant start for data-driven experiments

GAMMA = 0.99
TAU = 0.002            # observer gain regulariser
EPS_GAIN = 0.01        # model-based gain-iteration threshold

# Tuned diagonal weights for the observer-based controller.
Q_STAR_OBSERVER = np.diag([0.943, 0.762, 0.542, 0.420, 0.514])
R_STAR_OBSERVER = np.diag([0.300, 0.270, 0.281, 0.092, 0.054, 0.269, 0.318])

# Tuned diagonal weights for the data-driven controller.
Q_STAR_DATA_DRIVEN = np.diag([0.174, 0.056, 0.010, 0.010, 0.160])
R_STAR_DATA_DRIVEN = np.diag([0.145, 0.389, 0.020, 0.116, 0.099, 0.316, 0.010])

# Published closed-loop figures (regression targets for the acceptance suite).
EXPECTED = {
    "observer_baseline_y": np.array([149.9798, 159.9932, 169.9795, 174.9815, 179.9859]),
    "observer_baseline_err": 0.0376,
    "observer_baseline_index_100": 183362.5,
    "observer_baseline_index_1000": 183436.2,
    "observer_tuned_y": np.array([149.9940, 159.9946, 169.9843, 174.9873, 179.9834]),
    "observer_tuned_err": 0.0274,
    "observer_tuned_index_100": 76060.36,
    "observer_tuned_index_1000": 76072.6,
    "observer_reduction_pct": 58.5,
    "estimation_error_100": 0.008,
    "dd_baseline_y": np.array([150.0857, 160.1181, 171.0027, 175.7926, 180.1416]),
    "dd_baseline_err": 1.2942,
    "dd_baseline_index_100": 1065077.0,
    "dd_baseline_index_1000": 1074985.0,
    "dd_tuned_y": np.array([150.069, 160.154, 170.011, 175.199, 180.176]),
    "dd_tuned_err": 0.3154,
    "dd_tuned_index_100": 204635.7,
    "dd_tuned_index_1000": 206358.8,
    "dd_reduction_pct": 80.8,
}


def model() -> StateSpaceModel:
    return StateSpaceModel(A=A, B=B, C=C)


def reference() -> ReferenceGenerator:
    return ReferenceGenerator(F=np.eye(5), r0=REFERENCE)


def identity_weights(gamma: float = GAMMA) -> CostWeights:
    return CostWeights(Q=np.eye(5), R=np.eye(7), gamma=gamma)


def observer_tuned_weights(gamma: float = GAMMA) -> CostWeights:
    return CostWeights(Q=Q_STAR_OBSERVER, R=R_STAR_OBSERVER, gamma=gamma)


def data_driven_tuned_weights(gamma: float = GAMMA) -> CostWeights:
    return CostWeights(Q=Q_STAR_DATA_DRIVEN, R=R_STAR_DATA_DRIVEN, gamma=gamma)


def fixture_sha256() -> str:
    h = hashlib.sha256()
    for M in (A, B, C, K_DATA, REFERENCE, Q_STAR_OBSERVER, R_STAR_OBSERVER,
              Q_STAR_DATA_DRIVEN, R_STAR_DATA_DRIVEN):
        h.update(np.ascontiguousarray(M).tobytes())
    return h.hexdigest()


# Pinned at transcription time; see tests/test_fixtures.py.
FIXTURE_SHA256 = "6e8206063d0413f745b7cb8ee4383035122c6ba2923ee7b889a9ad91d8f3d0ec"
