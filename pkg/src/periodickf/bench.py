"""Arithmetic-cost comparison of the covariance engines.

Runs each engine's covariance recursion for a whole number of periods
under the metering layer in :mod:`periodickf.linalg` and reports exact
integer flop counts next to wall time.  The counted region is the
steady-state loop only; one-off initialization (stationary solve,
startup period, factorization) is excluded, since the comparison is
about per-iteration cost: the full recursion refreshes an r x r
covariance every step (cubic in r), while the low-rank engines update
an r x alpha factor and small solves (quadratic in r).

Counting rules are documented in :mod:`periodickf.linalg`; fractional
rule terms (n^3/3 for a factorization) are floored so counts stay exact
integers, and the symmetric-indefinite solves of the inverse-form
engine are charged at the same rate as the definite ones.  Metering
never changes results: engines run the same code path with the counter
on or off.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .chandrasekhar import (auto_factorize, build_prelude, chand_init,
                            step_alg31, step_alg32, step_minv,
                            to_inverse_state)
from .exceptions import NotStationary, SingularLift
from .kalman import prde_step, solve_dple
from .linalg import count_flops
from .model import PeriodicModel, par_to_state_space, random_stationary_par

ENGINES = ("kalman", "chand31", "chand32", "chand-minv")

_COMPLEXITY = {
    "kalman": "O(r^3)",
    "chand31": "O(S m r^2)",
    "chand32": "O(S m r^2)",
    "chand-minv": "O(S m r^2)",
}


@dataclass
class EngineCost:
    engine: str
    steps: int
    flops: int
    seconds: float


@dataclass
class CostReport:
    """Flop counts per engine for ``n_periods`` periods of covariance
    steps on one model. ``alpha`` is the factor width the low-rank
    engines ran with (None when none were requested)."""

    S: int
    r: int
    m: int
    d: int
    alpha: int | None
    n_periods: int
    costs: list[EngineCost]

    def cost(self, engine: str) -> EngineCost:
        for c in self.costs:
            if c.engine == engine:
                return c
        raise KeyError(engine)

    def flops_per_step(self, engine: str) -> float:
        c = self.cost(engine)
        return c.flops / c.steps

    def flops_per_period(self, engine: str) -> float:
        return self.flops_per_step(engine) * self.S

    def ratio_vs_kalman(self, engine: str) -> float:
        return self.cost("kalman").flops / self.cost(engine).flops


def _initial_sigma(model: PeriodicModel):
    """Stationary W list and starting covariance shared by all engines."""
    try:
        W = solve_dple(model)
        return W, W[0]
    except (NotStationary, SingularLift):
        pass
    if model.W1 is not None:
        return None, np.asarray(model.W1, dtype=float)
    return None, np.zeros((model.r, model.r))


def count_costs(model: PeriodicModel, n_periods: int,
                engines: Sequence[str] = ENGINES) -> CostReport:
    """Meter ``n_periods * S`` covariance steps of each engine.

    All engines start from the same covariance (the stationary W_1 when
    it exists, else the model's W1, else zero); the low-rank engines
    share one prelude and the automatic start factorization.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be positive")
    for name in engines:
        if name not in ENGINES:
            raise ValueError(f"unknown engine {name!r}; "
                             f"expected one of {ENGINES}")
    steps = n_periods * model.S
    W, Sigma1 = _initial_sigma(model)

    prelude = factorization = None
    if any(e != "kalman" for e in engines):
        prelude = build_prelude(model, Sigma1)
        factorization = auto_factorize(model, prelude, W=W)

    step_fns = {"chand31": step_alg31, "chand32": step_alg32,
                "chand-minv": step_minv}
    costs = []
    for name in engines:
        if name == "kalman":
            Sigma = Sigma1
            with count_flops() as counter:
                t0 = time.perf_counter()
                for t in range(1, steps + 1):
                    Sigma = prde_step(model, Sigma, t)
                seconds = time.perf_counter() - t0
        else:
            state = chand_init(model, factorization, prelude)
            if name == "chand-minv":
                state = to_inverse_state(state)
            step_fn = step_fns[name]
            with count_flops() as counter:
                t0 = time.perf_counter()
                for _ in range(steps):
                    state = step_fn(model, state)
                seconds = time.perf_counter() - t0
        costs.append(EngineCost(engine=name, steps=steps,
                                flops=counter.flops, seconds=seconds))
    return CostReport(S=model.S, r=model.r, m=model.m, d=model.d,
                      alpha=None if factorization is None
                      else factorization.alpha,
                      n_periods=n_periods, costs=costs)


@dataclass
class ScalingRow:
    r: int
    alpha: int | None
    flops_per_step: dict


@dataclass
class ScalingTable:
    """Per-step flops against state dimension, with fitted log-log
    slopes (None when fewer than two sizes were run: a one-point fit is
    refused)."""

    engines: tuple
    n_periods: int
    rows: list[ScalingRow]
    slopes: dict


def scaling_table(model_factory: Callable[[int], PeriodicModel],
                  r_values: Sequence[int],
                  engines: Sequence[str] = ("kalman", "chand31"),
                  n_periods: int = 3) -> ScalingTable:
    """Run :func:`count_costs` across state dimensions.

    ``model_factory(r)`` must return the family member with state
    dimension r.  Slopes are least-squares fits of log(flops/step)
    against log(r).
    """
    rows = []
    for r in r_values:
        report = count_costs(model_factory(int(r)), n_periods, engines)
        rows.append(ScalingRow(
            r=int(r), alpha=report.alpha,
            flops_per_step={e: report.flops_per_step(e) for e in engines}))
    slopes = {}
    for e in engines:
        if len(rows) < 2:
            slopes[e] = None
        else:
            logs_r = np.log([row.r for row in rows])
            logs_f = np.log([row.flops_per_step[e] for row in rows])
            slopes[e] = float(np.polyfit(logs_r, logs_f, 1)[0])
    return ScalingTable(engines=tuple(engines), n_periods=n_periods,
                        rows=rows, slopes=slopes)


def par_family(S: int = 2, seed: int = 7) -> Callable[[int], PeriodicModel]:
    """A one-output stationary PAR family keyed by state dimension;
    the low-rank engines run it at factor width alpha = S."""
    def factory(r: int) -> PeriodicModel:
        return par_to_state_space(random_stationary_par(S, r, seed))
    return factory


# --- rendering ---------------------------------------------------------------

def format_cost_table(report: CostReport) -> str:
    header = (f"model: S={report.S} r={report.r} m={report.m} d={report.d}"
              + (f" alpha={report.alpha}" if report.alpha is not None else "")
              + f"   periods={report.n_periods}")
    cols = ["engine", "steps", "flops", "flops/step", "flops/period",
            "seconds", "vs kalman", "complexity"]
    have_kalman = any(c.engine == "kalman" for c in report.costs)
    body = []
    for c in report.costs:
        ratio = (f"{report.ratio_vs_kalman(c.engine):.2f}x"
                 if have_kalman and c.engine != "kalman" else "-")
        body.append([
            c.engine, str(c.steps), str(c.flops),
            f"{c.flops / c.steps:.1f}",
            f"{c.flops / c.steps * report.S:.1f}",
            f"{c.seconds:.4f}", ratio, _COMPLEXITY[c.engine],
        ])
    widths = [max(len(cols[i]), *(len(row[i]) for row in body))
              for i in range(len(cols))]
    lines = [header,
             "  ".join(col.ljust(widths[i]) for i, col in enumerate(cols)),
             "  ".join("-" * w for w in widths)]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i])
                               for i, cell in enumerate(row)))
    return "\n".join(lines)


def cost_report_rows(report: CostReport):
    """(header, rows) pairs for CSV output."""
    header = ["engine", "S", "r", "m", "d", "alpha", "periods", "steps",
              "flops", "flops_per_step", "flops_per_period", "seconds"]
    rows = []
    for c in report.costs:
        rows.append([c.engine, report.S, report.r, report.m, report.d,
                     "" if report.alpha is None else report.alpha,
                     report.n_periods, c.steps, c.flops,
                     c.flops / c.steps, c.flops / c.steps * report.S,
                     c.seconds])
    return header, rows


def format_scaling_table(table: ScalingTable) -> str:
    cols = ["r", "alpha"] + [f"{e} flops/step" for e in table.engines]
    body = []
    for row in table.rows:
        body.append([str(row.r),
                     "-" if row.alpha is None else str(row.alpha)]
                    + [f"{row.flops_per_step[e]:.1f}"
                       for e in table.engines])
    widths = [max(len(cols[i]), *(len(r[i]) for r in body))
              for i in range(len(cols))]
    lines = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(cols)),
             "  ".join("-" * w for w in widths)]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i])
                               for i, cell in enumerate(row)))
    for e in table.engines:
        slope = table.slopes[e]
        lines.append(f"log-log slope [{e}]: "
                     + ("n/a (single size)" if slope is None
                        else f"{slope:.3f}"))
    return "\n".join(lines)


def scaling_table_rows(table: ScalingTable):
    header = ["r", "alpha"] + [f"flops_per_step_{e}" for e in table.engines]
    rows = [[row.r, "" if row.alpha is None else row.alpha]
            + [row.flops_per_step[e] for e in table.engines]
            for row in table.rows]
    return header, rows
