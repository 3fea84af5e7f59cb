"""Aggregate run directories into CSV tables, JSON summaries and figures."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .diagnostics import (
    cumvar_vs_gamma,
    greedy_gamma_curve,
    rkhs_identity_suite,
    upper_checkpoints,
)
from .errors import ConfigError
from .fitting import fit_log_slope
from .loop import FLOAT_FMT, probe_grid, saturation_trace
from .qmc import powers_of_two

MODES = ("regret-slope", "gamma", "identity", "saturation")
IDENTITY_TOLERANCE = 1e-8


@dataclass
class Report:
    header: list
    rows: list
    summary: dict
    figure: object  # callable(path) -> path

    @property
    def passed(self):
        return bool(self.summary.get("passed", True))

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([FLOAT_FMT % v if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def write(self, out):
        """Write ``<stem>.csv``, ``<stem>.json`` and ``<stem>.png``; returns the paths."""
        out = Path(out)
        base = out.with_suffix("") if out.suffix in (".csv", ".json", ".png") else out
        base.parent.mkdir(parents=True, exist_ok=True)
        paths = [base.with_name(base.name + ext) for ext in (".csv", ".json", ".png")]
        paths[0].write_text(self.csv_text())
        paths[1].write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        self.figure(paths[2])
        return paths


def _same_kernel(runs):
    keys = {(json.dumps(r.spec.to_dict(), sort_keys=True), r.config.d) for r in runs}
    if len(keys) > 1:
        raise ConfigError(f"run directories mix kernels or dimensions: {sorted(keys)}")


def regret_slope(runs):
    """Mean cumulative regret per horizon and its log-log slope.

    With several run directories each contributes its own horizon ``T`` (the
    temper depends on ``T``); a single directory is read at power-of-two
    checkpoints of its trace instead.
    """
    if not runs:
        raise ConfigError("regret-slope needs at least one run directory")
    _same_kernel(runs)
    rate = runs[0].config.rate
    table = []
    if len(runs) == 1:
        traces = runs[0].traces()
        R = np.array([tr.r_cum for tr in traces])
        for T in powers_of_two(R.shape[1]):
            table.append((T, float(R[:, T - 1].mean()), len(traces)))
    else:
        for run in sorted(runs, key=lambda r: r.config.T):
            traces = run.traces()
            table.append((run.config.T, float(np.mean([tr.r_cum[-1] for tr in traces])), len(traces)))
    T = np.array([row[0] for row in table], dtype=float)
    R = np.array([row[1] for row in table])
    slope, intercept, r2 = fit_log_slope(T, R)
    per_round = R / T
    tail = per_round[-3:]
    summary = {
        "mode": "regret-slope",
        "kernel": runs[0].spec.to_dict(),
        "d": runs[0].config.d,
        "horizons": [int(t) for t in T],
        "slope": slope,
        "intercept": intercept,
        "r2": r2,
        "target": rate.regret_exponent(),
        "final_ratio_decreasing": bool(len(tail) == 3 and np.all(np.diff(tail) < 0)),
        "config_hashes": [r.manifest["config_hash"] for r in runs],
    }
    rows = [(int(t), float(r), float(r / t), n) for (t, r, n) in table]
    title = f"{runs[0].spec.family} d={runs[0].config.d}"
    return Report(
        ["T", "mean_regret", "mean_regret_per_round", "n_seeds"], rows, summary,
        lambda p: plotting.plot_regret_slope(p, T, R, slope, intercept, summary["target"], title),
    )


def gamma(runs, pool_size=None, pool_seed=0):
    """Greedy gamma curve next to the seed-averaged cumulative posterior variance."""
    if not runs:
        raise ConfigError("gamma needs at least one run directory")
    _same_kernel(runs)
    lams = {r.config.lam for r in runs}
    if len(lams) > 1:
        raise ConfigError("run directories use different noise levels")
    cfg = runs[0].config
    traces = [tr for r in runs for tr in r.traces()]
    horizon = min(len(tr) for tr in traces)
    curve = greedy_gamma_curve(cfg.kernel, cfg.d, cfg.lam, horizon, pool_size, pool_seed)
    rep = cumvar_vs_gamma(traces, curve)
    summary = {
        "mode": "gamma",
        "kernel": cfg.kernel.to_dict(),
        "d": cfg.d,
        "lambda": cfg.lam,
        "pool": curve.pool_description(),
        "n_seeds": rep.n_seeds,
        "max_ratio": rep.max_ratio,
        "flagged_checkpoints": rep.flagged,
        "t_eps_sq_at_horizon": float(cfg.rate.t_eps_sq(horizon)) if horizon > 1 else None,
        "gamma_at_horizon": float(curve.gamma[-1]),
        "passed": rep.passed,
    }
    cps = upper_checkpoints(horizon)
    if len(cps) >= 3:
        slope, intercept, r2 = curve.log_slope(cps)
        summary.update(slope=slope, intercept=intercept, r2=r2, fit_checkpoints=cps,
                       target=cfg.rate.gamma_exponent())
    rows = [(int(t), float(g), float(c), float(r))
            for t, g, c, r in zip(rep.T, rep.gamma, rep.cumvar, rep.ratio)]
    title = f"{cfg.kernel.family} d={cfg.d} lambda={cfg.lam:g}"
    return Report(["T", "gamma", "cumvar", "ratio"], rows, summary,
                  lambda p: plotting.plot_gamma(p, rep.T, rep.gamma, rep.cumvar, title))


def identity(n=100, seed=0):
    suite = rkhs_identity_suite(n, seed)
    summary = {
        "mode": "identity",
        "instances": n,
        "seed": seed,
        "max_relative_error": suite.max_error,
        "worst_condition": suite.worst_condition,
        "tolerance": IDENTITY_TOLERANCE,
        "passed": suite.max_error <= IDENTITY_TOLERANCE,
    }
    rows = [(i, float(e), float(c)) for i, (e, c) in enumerate(zip(suite.errors, suite.conditions))]
    return Report(["instance", "relative_error", "condition"], rows, summary,
                  lambda p: plotting.plot_identity(p, suite.errors, suite.conditions))


def saturation(runs):
    """Per-round saturation statistics for every trace in the run directories."""
    if not runs:
        raise ConfigError("saturation needs at least one run directory")
    rows, curves, x0_hits, fired = [], [], [], []
    for run in runs:
        cfg = run.config
        probes = probe_grid(cfg.d, cfg.probes)
        for tr in run.traces():
            rep = saturation_trace(tr, cfg.rate, tr.alpha, probes, D=cfg.D, check=False)
            label = f"{run.path.name}/seed{tr.seed}"
            curves.append((label, rep.fraction))
            if rep.x0_ever_saturated:
                x0_hits.append(label)
            if rep.monitor_fired:
                fired.append(label)
            for t in range(len(tr)):
                rows.append((run.path.name, tr.seed, t + 1, float(rep.C_t[t]),
                             float(rep.fraction[t]), int(rep.x_t_saturated[t]),
                             int(rep.x0_cell_saturated[t]), float(rep.precondition[t])))
    summary = {
        "mode": "saturation",
        "runs": len(curves),
        "x0_cell_saturated_in": x0_hits,
        "monitor_fired_in": fired,
        "passed": not x0_hits and not fired,
    }
    return Report(
        ["run", "seed", "t", "C_t", "saturated_fraction", "x_t_saturated",
         "x0_cell_saturated", "alpha_t_eps_sq"],
        rows, summary, lambda p: plotting.plot_saturation(p, curves),
    )
