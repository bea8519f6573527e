#!/usr/bin/env python3
"""Periodic state-space models: construction, validation, simulation.

A model cycles through S seasons of system matrices

    x_{t+1} = F_s x_t + G_s eps_t      eps_t ~ N(0, Q_s)
    y_t     = H_s' x_t + e_t           e_t   ~ N(0, R_s)

with s = season(t) = ((t - 1) mod S) + 1.  This demo builds one by
hand, checks it, simulates from it, and then does the same for a
periodic autoregression (PAR), whose companion-form state space is
built automatically.

Deterministic; prints a short report and ends with a check summary.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from periodickf import (load_model, par_to_state_space, random_stationary_par,
                        save_model, simulate, validate, validate_par)
from periodickf.model import PeriodicModel

SEED = 20240117

checks = []


def check(label: str, ok: bool, detail: str = "") -> None:
    checks.append((label, ok))
    print(f"  [{'ok' if ok else 'FAIL'}] {label}" + (f"  ({detail})" if detail else ""))


# --- a two-season model by hand ----------------------------------------------

print("== hand-built model, S = 2 ==")

I2 = np.eye(2)
model = PeriodicModel(
    S=2, r=2, m=1, d=2,
    F=[np.array([[0.5, 0.1], [0.0, 0.3]]),
       np.array([[0.2, 0.0], [0.1, 0.4]])],
    G=[I2, np.array([[1.0, 0.0], [0.2, 1.0]])],
    H=[np.array([[1.0], [0.0]]), np.array([[1.0], [0.5]])],
    Q=[I2, np.array([[0.8, 0.1], [0.1, 1.2]])],
    R=[np.array([[0.5]]), np.array([[0.7]])],
)

problems = validate(model)
print(f"validate -> {len(problems)} problem(s)")
check("hand-built model validates", problems == [])

# season(t) walks 1, 2, 1, 2, ...; at(t) hands back that season's matrices
seasons = [model.season(t) for t in range(1, 6)]
print(f"season(1..5) = {seasons}")
check("season pattern cycles", seasons == [1, 2, 1, 2, 1])
check("at(3) returns season-1 F", np.array_equal(model.at(3)[0], model.F[0]))

# a broken copy: Q loses symmetry, R goes negative
bad = PeriodicModel(S=2, r=2, m=1, d=2, F=model.F, G=model.G, H=model.H,
                    Q=[np.array([[1.0, 0.3], [0.0, 1.0]]), model.Q[1]],
                    R=[np.array([[-0.5]]), model.R[1]])
problems = validate(bad)
print("validate(broken) ->")
for msg in problems:
    print(f"    {msg}")
check("broken model is rejected", len(problems) >= 2)

# --- simulation ----------------------------------------------------------------

print("\n== simulation ==")

n = 50_000
xs, ys = simulate(model, n, seed=SEED)
print(f"simulate({n}, seed={SEED}): states {xs.shape}, observations {ys.shape}")
check("state path has n rows", xs.shape == (n, model.r))
check("observation path has n rows", ys.shape == (n, model.m))

xs2, ys2 = simulate(model, n, seed=SEED)
check("same seed reproduces the draw",
      np.array_equal(xs, xs2) and np.array_equal(ys, ys2))

# odd times are season 1, even times season 2; their sample variances differ
odd, even = ys[0::2, 0], ys[1::2, 0]
print(f"observation variance  season 1: {odd.var():.4f}   season 2: {even.var():.4f}")
check("seasons have distinct output variance", abs(odd.var() - even.var()) > 0.05)

# --- periodic autoregression ----------------------------------------------------

print("\n== periodic autoregression ==")

par = random_stationary_par(S=4, p=3, seed=SEED)
print(f"PAR: S={par.S}, order p={par.p}")
print(f"phi =\n{np.array2string(par.phi, precision=4)}")
print(f"sigma2 = {np.array2string(par.sigma2, precision=4)}")
check("PAR validates", validate_par(par) == [])

ss = par_to_state_space(par)
print(f"companion state space: r={ss.r}, m={ss.m}, d={ss.d}, S={ss.S}")
check("companion state dimension equals the order", ss.r == par.p)
check("companion observes the first state",
      np.array_equal(ss.H[0], np.eye(par.p)[:, :1]))

# the state-space output must satisfy the PAR difference equation itself:
# y_t - sum_j phi_{s,j} y_{t-j} is the season-s shock, so its sample
# variance per season should sit near sigma2_s.
_, y = simulate(ss, 20_000, seed=SEED + 1)
y = y[:, 0]
resids = {s: [] for s in range(par.S)}
for t in range(par.p, y.size):
    s = t % par.S                       # season of time t+1, 0-based
    resids[s].append(y[t] - par.phi[s] @ y[t - 1::-1][:par.p])
ratios = [np.var(resids[s]) / par.sigma2[s] for s in range(par.S)]
print(f"per-season residual variance / sigma2 = "
      f"{np.array2string(np.array(ratios), precision=3)}")
check("PAR residual variances match sigma2 (within 50%)",
      all(0.5 < q < 1.5 for q in ratios))

# --- JSON round trip --------------------------------------------------------------

print("\n== JSON round trip ==")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.json"
    save_model(model, path)
    back = load_model(path)
    print(f"saved and reloaded: {path.name}, "
          f"{json.loads(path.read_text())['S']} seasons")
    same = all(np.array_equal(a, b) for a, b in zip(model.F, back.F))
    check("state-space JSON round trip is exact", same)

    path2 = Path(tmp) / "par.json"
    save_model(par, path2)
    back2 = load_model(path2)
    check("PAR JSON round trip is exact (phi key dispatch)",
          np.array_equal(par.phi, back2.phi))

# --- summary -----------------------------------------------------------------------

failed = [label for label, ok in checks if not ok]
print(f"\n{len(checks) - len(failed)}/{len(checks)} checks passed")
if failed:
    raise SystemExit("failed: " + ", ".join(failed))
