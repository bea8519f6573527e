from __future__ import annotations

import numpy as np
import pytest

from periodickf import PeriodicModel


def random_stationary_model(seed: int, r: int | None = None,
                            S: int | None = None, m: int | None = None,
                            d: int | None = None,
                            radius: float | None = None) -> PeriodicModel:
    """Random model with PD noise covariances, rescaled so the monodromy
    spectral radius hits a target below one (scaling every F_s by c
    scales the radius by c**S exactly)."""
    rng = np.random.default_rng(seed)
    r = int(rng.integers(2, 7)) if r is None else r
    S = int(rng.integers(1, 5)) if S is None else S
    m = int(rng.integers(1, 3)) if m is None else m
    d = r if d is None else d
    radius = float(rng.uniform(0.3, 0.9)) if radius is None else radius

    F = [rng.normal(size=(r, r)) / np.sqrt(r) for _ in range(S)]
    Phi = np.eye(r)
    for f in F:
        Phi = f @ Phi
    rho = float(np.max(np.abs(np.linalg.eigvals(Phi))))
    if rho > 0.0:
        scale = (radius / rho) ** (1.0 / S)
        F = [scale * f for f in F]
    H = [rng.normal(size=(r, m)) for _ in range(S)]
    G = [rng.normal(size=(r, d)) for _ in range(S)]
    Q, R = [], []
    for _ in range(S):
        A = rng.normal(size=(d, d))
        Q.append(A @ A.T + 0.1 * np.eye(d))
        B = 0.5 * rng.normal(size=(m, m))
        R.append(B @ B.T + 0.3 * np.eye(m))
    return PeriodicModel(S=S, r=r, m=m, d=d, F=F, G=G, H=H, Q=Q, R=R)


@pytest.fixture
def scalar_model() -> PeriodicModel:
    """F = 0.5, G = H = Q = R = 1, W1 = 1: the hand-checked example."""
    one = np.array([[1.0]])
    return PeriodicModel(S=1, r=1, m=1, d=1,
                         F=[np.array([[0.5]])], G=[one.copy()],
                         H=[one.copy()], Q=[one.copy()], R=[one.copy()],
                         W1=one.copy())
