"""Periodic Kalman filter and the associated Riccati / Lyapunov solvers.

One filter step at time t, season s = season(t), with prediction-error
covariance ``Sigma`` and state prediction ``xhat``:

    Omega = H_s' Sigma H_s + R_s          innovation covariance
    K     = F_s Sigma H_s                 (un-normalized) gain
    yhat  = H_s' xhat
    xhat+ = F_s xhat + K Omega^{-1} (y - yhat)
    Sigma+ = F_s Sigma F_s' - K Omega^{-1} K' + G_s Q_s G_s'

started from xhat = 0 and Sigma = W1. The covariance recursion alone is
the periodic Riccati difference equation (PRDE); iterating it over whole
periods to convergence yields the periodic fixed point.

The monodromy matrix is the one-period state transition
``Phi = F_S F_{S-1} ... F_1``; the model is periodically stationary when
its spectral radius is below one.  In that case the stationary state
covariances solve the periodic Lyapunov equation

    W_1 = Phi W_1 Phi' + Qbar,
    Qbar = sum_{k=0}^{S-1} (F_S .. F_{S-k+1}) G_{S-k} Q_{S-k} G_{S-k}'
           (F_S .. F_{S-k+1})',

solved here by stacking into an r^2-dimensional linear system, followed
by the one-season propagation W_{s+1} = F_s W_s F_s' + G_s Q_s G_s'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import NonConvergence, NotStationary, SingularLift
from .linalg import (add, matmul, rel_err, spd_solve, spectral_radius, sub,
                     symmetrize)

if TYPE_CHECKING:  # pragma: no cover
    from .model import PeriodicModel

# Residual tolerance for the Lyapunov solve and its one-season propagation.
DPLE_TOL = 1e-10


@dataclass
class KalmanState:
    """Filter state entering time t: prediction ``xhat`` (r,) and its
    error covariance ``Sigma`` (r, r)."""

    t: int
    xhat: np.ndarray
    Sigma: np.ndarray


@dataclass
class StepResult:
    yhat: np.ndarray
    innovation: np.ndarray
    Omega: np.ndarray
    K: np.ndarray
    next: KalmanState


def _covariance_update(model: PeriodicModel, Sigma: np.ndarray, t: int):
    """One PRDE step. Returns (Omega, K, Ktilde', Sigma_next) where
    Ktilde' = Omega^{-1} K' is the transposed normalized gain."""
    F, G, H, Q, R = model.at(t)
    U = matmul(Sigma, H)                                  # r x m
    Omega = symmetrize(add(matmul(H.T, U), R))
    K = matmul(F, U)
    KtilT = spd_solve(Omega, K.T)                         # m x r
    FS = matmul(F, Sigma)
    GQ = matmul(G, Q)
    Sigma_next = symmetrize(
        add(sub(matmul(FS, F.T), matmul(K, KtilT)), matmul(GQ, G.T)))
    return Omega, K, KtilT, Sigma_next


def kf_step(model: PeriodicModel, state: KalmanState,
            y: np.ndarray) -> StepResult:
    """Advance the filter by one observation.

    ``y`` is the length-m observation at time ``state.t``. Raises
    :class:`OmegaNotPD` when the innovation covariance fails the
    definiteness gate.
    """
    F, _, H, _, _ = model.at(state.t)
    Omega, K, KtilT, Sigma_next = _covariance_update(model, state.Sigma,
                                                     state.t)
    y = np.asarray(y, dtype=float).reshape(model.m)
    yhat = matmul(H.T, state.xhat)
    innovation = sub(y, yhat)
    xhat_next = add(matmul(F, state.xhat), matmul(KtilT.T, innovation))
    return StepResult(yhat=yhat, innovation=innovation, Omega=Omega, K=K,
                      next=KalmanState(t=state.t + 1, xhat=xhat_next,
                                       Sigma=Sigma_next))


def prde_step(model: PeriodicModel, Sigma: np.ndarray, t: int) -> np.ndarray:
    """Covariance-only filter step (the PRDE map at time t)."""
    return _covariance_update(model, Sigma, t)[3]


def monodromy(model: PeriodicModel) -> np.ndarray:
    """One-period state transition ``F_S F_{S-1} ... F_1``."""
    Phi = np.eye(model.r)
    for s in range(1, model.S + 1):
        Phi = model.F[s - 1] @ Phi
    return Phi


def is_periodically_stationary(model: PeriodicModel,
                               margin: float = 1e-9) -> tuple[bool, float]:
    """Whether the monodromy spectral radius is below ``1 - margin``.

    Returns ``(flag, radius)``.
    """
    rho = spectral_radius(monodromy(model))
    return rho < 1.0 - margin, rho


def dpre_fixed_point(model: PeriodicModel, tol: float = 1e-10,
                     max_periods: int = 100_000) -> list[np.ndarray]:
    """Iterate the PRDE over whole periods until the per-season
    covariances stop moving.

    Starts from W1 (zero when the model carries none) and stops when
    ``norm(Sigma[s + S k] - Sigma[s + S (k-1)]) <= tol * (1 + norm(...))``
    for every season s.  Returns the S per-season limits
    ``[P_1, .., P_S]`` with ``P_s = lim_k Sigma_{s + S k}``.

    Raises :class:`NonConvergence` when ``max_periods`` is exhausted.
    """
    S = model.S
    if model.W1 is not None:
        Sigma = symmetrize(np.asarray(model.W1, dtype=float))
    else:
        Sigma = np.zeros((model.r, model.r))
    prev: list[np.ndarray] | None = None
    residual = np.inf
    for period in range(1, max_periods + 1):
        cur = []
        for s in range(1, S + 1):
            cur.append(Sigma)
            Sigma = prde_step(model, Sigma, (period - 1) * S + s)
        if prev is not None:
            residual = max(
                float(np.linalg.norm(cur[i] - prev[i]))
                / (1.0 + float(np.linalg.norm(cur[i])))
                for i in range(S))
            if residual <= tol:
                return cur
        prev = cur
    raise NonConvergence(
        f"periodic Riccati iteration did not converge within "
        f"{max_periods} periods (last residual {residual:.3e})",
        residual=float(residual), periods=max_periods)


def solve_dple(model: PeriodicModel) -> list[np.ndarray]:
    """Stationary state covariances ``[W_1, .., W_S]``.

    Solves the period-1 Lyapunov equation for W_1 through the r^2-sized
    linear lift, then propagates one season at a time.  Raises
    :class:`NotStationary` when the monodromy radius is not below one
    and :class:`SingularLift` when the lifted system is numerically
    singular (radius too close to one for the solve to be trusted).
    """
    stationary, rho = is_periodically_stationary(model)
    if not stationary:
        raise NotStationary(
            f"monodromy spectral radius {rho:.9f} is not below 1")
    S, r = model.S, model.r
    Phi = monodromy(model)

    Qbar = model.G[S - 1] @ model.Q[S - 1] @ model.G[S - 1].T
    P = np.eye(r)
    for k in range(1, S):
        P = P @ model.F[S - k]          # F_S .. F_{S-k+1}
        Gk = model.G[S - k - 1]
        Qk = model.Q[S - k - 1]
        Qbar = Qbar + P @ Gk @ Qk @ Gk.T @ P.T
    Qbar = 0.5 * (Qbar + Qbar.T)

    lift = np.eye(r * r) - np.kron(Phi, Phi)
    try:
        w = np.linalg.solve(lift, Qbar.ravel())
    except np.linalg.LinAlgError as exc:
        raise SingularLift("the lifted Lyapunov system is singular "
                           f"(monodromy radius {rho:.12f})") from exc
    if not np.all(np.isfinite(w)):
        raise SingularLift("the lifted Lyapunov solve produced non-finite "
                           f"values (monodromy radius {rho:.12f})")
    W1 = 0.5 * (w.reshape(r, r) + w.reshape(r, r).T)
    residual = rel_err(W1, Phi @ W1 @ Phi.T + Qbar)
    if residual > DPLE_TOL:
        raise SingularLift(
            f"Lyapunov solve residual {residual:.3e} exceeds {DPLE_TOL:g} "
            f"(monodromy radius {rho:.12f})")

    W = [W1]
    for s in range(1, S):
        Ws = model.F[s - 1] @ W[-1] @ model.F[s - 1].T \
            + model.G[s - 1] @ model.Q[s - 1] @ model.G[s - 1].T
        W.append(0.5 * (Ws + Ws.T))
    return W
