"""Data filtering with interchangeable covariance engines.

All engines share the same state update

    xhat[t+1] = F_s xhat[t] + K_t Omega_t^{-1} (y[t] - H_s' xhat[t])

and differ only in how the pair (K_t, Omega_t) is produced:

* ``kalman``      - the full covariance recursion (cubic in r per step);
* ``chand31``     - low-rank increment recursion, updated-gain form;
* ``chand32``     - low-rank increment recursion, current-gain form;
* ``chand-minv``  - low-rank increment recursion propagating M^{-1}.

The low-rank engines never form the r x r covariance unless a sigma
trace is requested, in which case each season's covariance is
accumulated from the increments exactly as
:func:`periodickf.chandrasekhar.reconstruct_sigma` does.

The innovations-form Gaussian log-likelihood of a filtered series is

    loglik = -1/2 sum_t [ m log 2 pi + log det Omega_t
                          + e_t' Omega_t^{-1} e_t ].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chandrasekhar import (auto_factorize, build_prelude, chand_init,
                            step_alg31, step_alg32, step_minv,
                            to_inverse_state)
from .exceptions import (EngineInitFailed, MSingular, NotStationary,
                         ResidualTooLarge)
from .kalman import _covariance_update, solve_dple
from .linalg import add, matmul, spd_logdet_quad, spd_solve, sub

ENGINES = ("kalman", "chand31", "chand32", "chand-minv")
INITS = ("zero-state", "stationary", "explicit")

# Invariants an initial covariance must meet (looser than the model-level
# checks: a propagated covariance accumulates roundoff).
SIGMA_SYM_RTOL = 1e-10
SIGMA_EIG_FLOOR_RTOL = 1e-8

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class FilterOutput:
    """Per-step filter quantities for t = 1..n.

    ``innovations[t-1]``, ``Omega[t-1]`` and ``K[t-1]`` belong to time
    t; ``xhat[t-1]`` is the prediction entering time t (so ``xhat`` has
    n + 1 rows). ``sigma_trace[t-1]`` (present on request) is the
    prediction-error covariance at time t.
    """

    engine: str
    n: int
    innovations: np.ndarray     # (n, m)
    Omega: np.ndarray           # (n, m, m)
    K: np.ndarray               # (n, r, m)
    xhat: np.ndarray            # (n + 1, r)
    loglik: float
    sigma_trace: np.ndarray | None = None


def _check_sigma1(Sigma1: np.ndarray, r: int) -> np.ndarray:
    Sigma1 = np.asarray(Sigma1, dtype=float)
    if Sigma1.shape != (r, r):
        raise ValueError(f"Sigma1 must be {r}x{r}")
    norm = float(np.linalg.norm(Sigma1))
    if float(np.linalg.norm(Sigma1 - Sigma1.T)) > SIGMA_SYM_RTOL * max(norm, 1e-300):
        raise ValueError("Sigma1 is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (Sigma1 + Sigma1.T))
    if w.size and w[0] < -SIGMA_EIG_FLOOR_RTOL * max(float(np.max(np.abs(w))), 1e-300):
        raise ValueError("Sigma1 is not positive semidefinite")
    return 0.5 * (Sigma1 + Sigma1.T)


def _initial_conditions(model, init: str, xhat1, Sigma1):
    if init not in INITS:
        raise ValueError(f"unknown init {init!r}; expected one of {INITS}")
    if init == "explicit":
        if xhat1 is None or Sigma1 is None:
            raise ValueError("explicit init requires xhat1 and Sigma1")
        x = np.asarray(xhat1, dtype=float).reshape(model.r)
        return x, _check_sigma1(Sigma1, model.r)
    x = np.zeros(model.r)
    if init == "stationary":
        return x, solve_dple(model)[0]
    # zero-state: take the model's W1, falling back to the stationary
    # covariance when none is stored.
    if model.W1 is not None:
        return x, _check_sigma1(model.W1, model.r)
    return x, solve_dple(model)[0]


class _KalmanEngine:
    def __init__(self, model, Sigma1, trace: bool):
        self.model = model
        self.Sigma = Sigma1
        self._next = None

    def gains(self, t: int):
        Omega, K, _, Sigma_next = _covariance_update(self.model, self.Sigma, t)
        self._next = Sigma_next
        return K, Omega

    def sigma(self, t: int):
        return self.Sigma

    def advance(self, t: int):
        self.Sigma = self._next


class _ChandEngine:
    _STEPS = {"chand31": step_alg31, "chand32": step_alg32,
              "chand-minv": step_minv}

    def __init__(self, model, Sigma1, variant: str, trace: bool):
        self.model = model
        self.step_fn = self._STEPS[variant]
        prelude = build_prelude(model, Sigma1)
        try:
            factorization = auto_factorize(model, prelude)
            state = chand_init(model, factorization, prelude)
            if variant == "chand-minv":
                state = to_inverse_state(state)
        except (ResidualTooLarge, MSingular) as exc:
            raise EngineInitFailed(
                f"{variant} engine initialization failed: {exc}") from exc
        self.state = state
        self.acc = [s.copy() for s in prelude.Sigma] if trace else None

    def gains(self, t: int):
        return self.state.current_gain()

    def sigma(self, t: int):
        return self.acc[(t - 1) % self.model.S]

    def advance(self, t: int):
        if self.acc is not None and self.state.alpha > 0:
            Y, M = self.state.factor_pair()
            i = (t - 1) % self.model.S
            self.acc[i] = self.acc[i] + Y @ M @ Y.T
        self.state = self.step_fn(self.model, self.state)


def _make_engine(model, engine: str, Sigma1, trace: bool):
    if engine == "kalman":
        return _KalmanEngine(model, Sigma1, trace)
    if engine in _ChandEngine._STEPS:
        return _ChandEngine(model, Sigma1, engine, trace)
    raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def _coerce_observations(y, m: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 1:
        if m != 1:
            raise ValueError(f"observations must be (n, {m})")
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        return arr.reshape(0, m)
    if arr.ndim != 2 or arr.shape[1] != m:
        raise ValueError(f"observations must be (n, {m}), got {arr.shape}")
    return arr


def filter_series(model, y, engine: str = "kalman",
                  init: str = "zero-state", xhat1=None, Sigma1=None,
                  sigma_trace: bool = False) -> FilterOutput:
    """Filter an observation series.

    Parameters
    ----------
    model : PeriodicModel
    y : array (n, m), or (n,) when m = 1
    engine : one of ``ENGINES``
    init : one of ``INITS``; ``zero-state`` uses xhat = 0 with the
        model's W1 (or the stationary covariance when none is stored),
        ``stationary`` forces the stationary covariance, ``explicit``
        takes ``xhat1``/``Sigma1``.
    sigma_trace : also record the per-step covariance (the low-rank
        engines reconstruct it from their increments).

    Raises ``NotStationary`` when a stationary start is requested from a
    model without one, ``EngineInitFailed`` when a low-rank engine's
    start factorization fails, and ``OmegaNotPD`` from the recursions.
    """
    y2 = _coerce_observations(y, model.m)
    n = y2.shape[0]
    x, Sigma1v = _initial_conditions(model, init, xhat1, Sigma1)
    eng = _make_engine(model, engine, Sigma1v, sigma_trace)

    innovations = np.empty((n, model.m))
    Omegas = np.empty((n, model.m, model.m))
    Ks = np.empty((n, model.r, model.m))
    xhats = np.empty((n + 1, model.r))
    sigmas = np.empty((n, model.r, model.r)) if sigma_trace else None

    for t in range(1, n + 1):
        K, Omega = eng.gains(t)
        F, _, H, _, _ = model.at(t)
        xhats[t - 1] = x
        yhat = matmul(H.T, x)
        e = sub(y2[t - 1], yhat)
        KtilT = spd_solve(Omega, K.T)                # m x r
        x = add(matmul(F, x), matmul(KtilT.T, e))
        innovations[t - 1] = e
        Omegas[t - 1] = Omega
        Ks[t - 1] = K
        if sigma_trace:
            sigmas[t - 1] = eng.sigma(t)
        eng.advance(t)
    xhats[n] = x

    loglik = float(np.sum(_loglik_terms(innovations, Omegas)))
    return FilterOutput(engine=engine, n=n, innovations=innovations,
                        Omega=Omegas, K=Ks, xhat=xhats, loglik=loglik,
                        sigma_trace=sigmas)


def _loglik_terms(innovations: np.ndarray, Omegas: np.ndarray) -> np.ndarray:
    n, m = innovations.shape
    terms = np.empty(n)
    for t in range(n):
        logdet, quad = spd_logdet_quad(Omegas[t], innovations[t])
        terms[t] = -0.5 * (m * _LOG_2PI + logdet + quad)
    return terms


def loglik_terms(output: FilterOutput) -> np.ndarray:
    """Per-step contributions to the Gaussian log-likelihood."""
    return _loglik_terms(output.innovations, output.Omega)


def gaussian_loglik(output: FilterOutput) -> float:
    """Innovations-form Gaussian log-likelihood of a filtered series.

    Log-determinants come from Cholesky factors; no matrix is ever
    inverted explicitly. An empty series has log-likelihood 0.
    """
    if output.n == 0:
        return 0.0
    return float(np.sum(loglik_terms(output)))
