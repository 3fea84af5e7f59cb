"""GP-TS with fractional-posterior variance inflation, plus regret bookkeeping."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import rng as rngmod
from .errors import ConfigError, FracGPError, InvariantViolation, RunAborted, SaturationError
from .kernels import KernelSpec, as_points, kernel_matrix
from .objectives import RKHSFunction, evaluate_objective, observe_noisy, synthesize_objective
from .posterior import cholesky_with_jitter, incorporate, init_state
from .qmc import regular_grid
from .rates import RateModel, alpha_from_horizon, precondition_values, threshold
from .sampler import DEFAULT_M_MAX, GENERATORS, draw_path, generate_candidates, select_argmax

REGRET_CLIP = 1e-9
FLOAT_FMT = "%.17g"

_TOP_KEYS = {
    "kernel", "d", "T", "lambda", "alpha", "D", "c_eps", "q", "log_exponent",
    "candidates", "seeds", "objective", "probe_size",
}
_ALPHA_KEYS = {"mode", "value"}
_CAND_KEYS = {"m", "generator", "m_max"}
_OBJ_KEYS = {"n_centers", "target_norm", "seed", "resolution"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one GP-TS experiment (one horizon, several seeds).

    ``alpha=None`` selects the horizon schedule ``alpha^{-1} = T eps_T^2``.
    ``objective_seed=None`` draws a separate objective for each run seed.
    """

    kernel: KernelSpec
    d: int = 1
    T: int = 64
    lam: float = 0.1
    alpha: float | None = None
    D: float = 1.0
    c_eps: float = 1.0
    q: float = 0.0
    log_exponent: float | None = None
    m: int | None = None
    generator: str = "sobol"
    m_max: int = DEFAULT_M_MAX
    seeds: tuple = (0,)
    n_centers: int | None = None
    target_norm: float = 2.0
    objective_seed: int | None = None
    resolution: int = 2048
    probe_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        # resolve size defaults so equal experiments compare and hash equal
        if self.m is None:
            object.__setattr__(self, "m", 256 * self.d)
        if self.n_centers is None:
            object.__setattr__(self, "n_centers", 10 * self.d)
        if self.probe_size is None:
            object.__setattr__(self, "probe_size", 256 * self.d + 1)
        self.validate()

    @property
    def candidates(self):
        return self.m

    @property
    def centers(self):
        return self.n_centers

    @property
    def probes(self):
        return self.probe_size

    @property
    def rate(self):
        return RateModel.for_kernel(self.kernel, self.d, self.c_eps, self.q, self.log_exponent)

    def resolved_alpha(self):
        """``(alpha, AlphaChoice or None)`` for this horizon."""
        if self.alpha is not None:
            return self.alpha, None
        choice = alpha_from_horizon(self.rate, self.T)
        return choice.alpha, choice

    def validate(self):
        if not isinstance(self.kernel, KernelSpec):
            raise ConfigError("kernel must be a KernelSpec")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        try:
            self.kernel.check_dimension(self.d)
        except FracGPError as exc:
            raise ConfigError(str(exc)) from None
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lambda must be > 0, got {self.lam}")
        if self.alpha is None:
            if self.T < 2:
                raise ConfigError("the alpha schedule needs T >= 2; give a fixed alpha")
        elif not 0 < self.alpha < 1:
            raise ConfigError(f"fixed alpha must lie in (0, 1), got {self.alpha}")
        if not self.D > 0:
            raise ConfigError(f"D must be > 0, got {self.D}")
        if not self.c_eps > 0:
            raise ConfigError(f"c_eps must be > 0, got {self.c_eps}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"candidate generator must be one of {GENERATORS}")
        if self.candidates < 1 or self.candidates > self.m_max:
            raise ConfigError(f"candidate budget {self.candidates} outside [1, {self.m_max}]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.centers < 1 or not self.target_norm > 0:
            raise ConfigError("objective needs n_centers >= 1 and target_norm > 0")
        if self.resolution < 10:
            raise ConfigError("objective resolution must be >= 10")
        if self.probes < 2:
            raise ConfigError("probe_size must be >= 2")

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "d": self.d,
            "T": self.T,
            "lambda": self.lam,
            "alpha": {"mode": "schedule"} if self.alpha is None
            else {"mode": "fixed", "value": self.alpha},
            "D": self.D,
            "c_eps": self.c_eps,
            "q": self.q,
            "log_exponent": self.log_exponent,
            "candidates": {"m": self.candidates, "generator": self.generator, "m_max": self.m_max},
            "seeds": list(self.seeds),
            "objective": {
                "n_centers": self.centers,
                "target_norm": self.target_norm,
                "seed": self.objective_seed,
                "resolution": self.resolution,
            },
            "probe_size": self.probes,
        }

    @classmethod
    def from_dict(cls, data):
        """Parse a config document; unknown keys are rejected."""
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(data, _TOP_KEYS, "config")
        for key in ("kernel", "T"):
            if key not in data:
                raise ConfigError(f"config is missing required key {key!r}")
        try:
            kernel = KernelSpec.from_dict(data["kernel"])
        except (FracGPError, TypeError) as exc:
            raise ConfigError(f"bad kernel: {exc}") from None
        alpha_doc = data.get("alpha", {"mode": "schedule"})
        _reject_unknown(alpha_doc, _ALPHA_KEYS, "alpha")
        mode = alpha_doc.get("mode", "schedule")
        if mode == "schedule":
            alpha = None
        elif mode == "fixed":
            if "value" not in alpha_doc:
                raise ConfigError("fixed alpha needs a 'value'")
            alpha = _num(alpha_doc["value"], "alpha.value")
        else:
            raise ConfigError(f"alpha.mode must be 'fixed' or 'schedule', got {mode!r}")
        cand = data.get("candidates", {})
        _reject_unknown(cand, _CAND_KEYS, "candidates")
        obj = data.get("objective", {})
        _reject_unknown(obj, _OBJ_KEYS, "objective")
        log_exp = data.get("log_exponent")
        try:
            return cls(
                kernel=kernel,
                d=_int(data.get("d", 1), "d"),
                T=_int(data["T"], "T"),
                lam=_num(data.get("lambda", 0.1), "lambda"),
                alpha=alpha,
                D=_num(data.get("D", 1.0), "D"),
                c_eps=_num(data.get("c_eps", 1.0), "c_eps"),
                q=_num(data.get("q", 0.0), "q"),
                log_exponent=None if log_exp is None else _num(log_exp, "log_exponent"),
                m=None if cand.get("m") is None else _int(cand["m"], "candidates.m"),
                generator=cand.get("generator", "sobol"),
                m_max=_int(cand.get("m_max", DEFAULT_M_MAX), "candidates.m_max"),
                seeds=tuple(_int(s, "seeds[]") for s in data.get("seeds", [0])),
                n_centers=None if obj.get("n_centers") is None
                else _int(obj["n_centers"], "objective.n_centers"),
                target_norm=_num(obj.get("target_norm", 2.0), "objective.target_norm"),
                objective_seed=None if obj.get("seed") is None else _int(obj["seed"], "objective.seed"),
                resolution=_int(obj.get("resolution", 2048), "objective.resolution"),
                probe_size=None if data.get("probe_size") is None
                else _int(data["probe_size"], "probe_size"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        """SHA-256 of the canonical normalized document (key order irrelevant)."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_(self, **changes):
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ExperimentConfig(**values)


def _reject_unknown(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _num(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _int(value, name):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass
class RegretTrace:
    """Per-round record of one GP-TS run.

    Rows are appended by :func:`run_gpts`; a trace cut short by a failure keeps
    the rounds that completed.
    """

    spec: KernelSpec
    lam: float
    alpha: float
    d: int
    seed: int
    X: list = field(default_factory=list)
    y: list = field(default_factory=list)
    r_inst: list = field(default_factory=list)
    r_cum: list = field(default_factory=list)
    k_var: list = field(default_factory=list)
    sigma2: list = field(default_factory=list)
    C_t: list = field(default_factory=list)
    saturated: list = field(default_factory=list)
    precondition: list = field(default_factory=list)
    objective: RKHSFunction | None = None
    alpha_choice: object = None

    def __len__(self):
        return len(self.y)

    def append(self, x, y, r, k_var, C_t, saturated, pre):
        self.X.append(np.asarray(x, dtype=float).copy())
        self.y.append(float(y))
        self.r_inst.append(float(r))
        self.r_cum.append((self.r_cum[-1] if self.r_cum else 0.0) + float(r))
        self.k_var.append(float(k_var))
        self.sigma2.append(float(k_var) / self.alpha)
        self.C_t.append(float(C_t))
        self.saturated.append(bool(saturated))
        self.precondition.append(float(pre))

    def arrays(self):
        return {
            "X": np.array(self.X).reshape(-1, self.d),
            "y": np.array(self.y),
            "r_inst": np.array(self.r_inst),
            "r_cum": np.array(self.r_cum),
            "k_var": np.array(self.k_var),
            "sigma2": np.array(self.sigma2),
            "C_t": np.array(self.C_t),
            "saturated": np.array(self.saturated, dtype=bool),
        }

    @property
    def monitor_fired(self):
        """Rounds ``t`` (1-based) where ``alpha t eps_t^2 >= 1``."""
        return [i + 1 for i, v in enumerate(self.precondition) if v >= 1.0]

    def header(self):
        xs = [f"x{i}" for i in range(self.d)]
        return ["t", *xs, "y", "r_inst", "r_cum", "k_var", "sigma2", "C_t", "saturated"]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for i in range(len(self)):
            row = [str(i + 1)]
            row += [FLOAT_FMT % v for v in self.X[i]]
            row += [FLOAT_FMT % v for v in (self.y[i], self.r_inst[i], self.r_cum[i],
                                            self.k_var[i], self.sigma2[i], self.C_t[i])]
            row.append("1" if self.saturated[i] else "0")
            writer.writerow(row)
        return buf.getvalue()

    def metadata(self, config=None):
        meta = {
            "seed": self.seed,
            "rounds": len(self),
            "kernel": self.spec.to_dict(),
            "lambda": self.lam,
            "alpha": self.alpha,
            "d": self.d,
            "generator": rngmod.GENERATOR_NAME,
            "monitor_fired": self.monitor_fired,
            "max_precondition": max(self.precondition) if self.precondition else None,
            "objective": None if self.objective is None else self.objective.to_dict(),
            "x0_residual": None if self.objective is None else self.objective.x0_tolerance,
        }
        if self.alpha_choice is not None:
            c = self.alpha_choice
            meta["alpha_schedule"] = {
                "horizon": c.horizon, "inflation": c.inflation,
                "alpha_raw": c.alpha_raw, "alpha": c.alpha, "clipped": c.clipped,
            }
        if config is not None:
            meta["config_hash"] = config.config_hash()
            meta["config"] = config.to_dict()
        return meta


def read_trace_csv(text_or_path, spec=None, lam=None, alpha=None, seed=0):
    """Parse a trace CSV back into a :class:`RegretTrace`."""
    if isinstance(text_or_path, str) and "\n" in text_or_path:
        text = text_or_path
    else:
        with open(text_or_path) as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("x"))
    trace = RegretTrace(spec, lam, alpha if alpha else 1.0, d, seed)
    for row in body:
        vals = [float(v) for v in row]
        x = np.array(vals[1 : 1 + d])
        y, r, rc, kv, s2, ct, sat = vals[1 + d :]
        trace.X.append(x)
        trace.y.append(y)
        trace.r_inst.append(r)
        trace.r_cum.append(rc)
        trace.k_var.append(kv)
        trace.sigma2.append(s2)
        trace.C_t.append(ct)
        trace.saturated.append(bool(sat))
    return trace


def make_objective(config, seed):
    obj_seed = seed if config.objective_seed is None else config.objective_seed
    f = synthesize_objective(config.kernel, config.centers, obj_seed, config.target_norm, config.d)
    return f.with_maximum(config.resolution)


def run_gpts(config, seed, objective=None, progress=None):
    """Run ``T`` rounds of sample, argmax, observe, update.

    Every random draw of round ``t`` comes from a Philox stream keyed by
    ``(seed, t, purpose)``. Raises :class:`RunAborted` carrying the partial
    trace if a round fails.
    """
    f = objective if objective is not None else make_objective(config, seed)
    if f.x0 is None:
        f = f.with_maximum(config.resolution)
    alpha, choice = config.resolved_alpha()
    rate = config.rate
    state = init_state(config.kernel, config.lam, alpha, config.d, capacity=config.T + 1)
    trace = RegretTrace(config.kernel, config.lam, alpha, config.d, seed,
                        objective=f, alpha_choice=choice)
    ts = np.arange(1, config.T + 1)
    C_all = threshold(rate, alpha, ts, config.D) if alpha < 1 else np.zeros(config.T)
    pre_all = precondition_values(rate, alpha, ts)
    for t in range(1, config.T + 1):
        try:
            cands = generate_candidates(
                config.d, config.candidates, config.generator,
                rngmod.stream(seed, t, rngmod.CANDIDATES), config.m_max,
            )
            draw = draw_path(state, cands, rngmod.stream(seed, t, rngmod.PATH))
            idx, x = select_argmax(draw.values, cands)
            y = observe_noisy(f, x[None, :], config.lam, rngmod.stream(seed, t, rngmod.NOISE))
            y = float(np.asarray(y).reshape(-1)[0])
            value = float(evaluate_objective(f, x[None, :])[0])
            r = f.value0 - value
            if r < 0:
                if r < -REGRET_CLIP:
                    raise InvariantViolation(
                        f"round {t}: candidate beats the located maximum by {-r:.3e}"
                    )
                r = 0.0
            k_var = float(draw.moments.cov[idx, idx])
            sigma = math.sqrt(max(k_var, 0.0) / alpha)
            C_t = float(C_all[t - 1])
            saturated = r >= 2.0 * C_t * sigma
            solved = draw.moments.solved[:, idx] if state.t else None
            state = incorporate(state, x, y, solved=solved)
        except Exception as exc:
            raise RunAborted(f"round {t} of seed {seed} failed: {exc}", trace, t) from exc
        trace.append(x, y, r, k_var, C_t, saturated, pre_all[t - 1])
        if progress is not None:
            progress(t)
    return trace


@dataclass
class SaturationReport:
    """Per-round saturation diagnostics on a probe grid."""

    C_t: np.ndarray
    fraction: np.ndarray
    x_t_saturated: np.ndarray
    x0_cell: np.ndarray
    x0_cell_saturated: np.ndarray
    precondition: np.ndarray

    @property
    def x0_ever_saturated(self):
        return bool(np.any(self.x0_cell_saturated))

    @property
    def monitor_fired(self):
        return [i + 1 for i, v in enumerate(self.precondition) if v >= 1.0]


def probe_grid(d, size):
    """Regular probe grid with about ``size`` points."""
    if d == 1:
        return regular_grid(1, size)
    side = max(2, int(round(size ** (1.0 / d))))
    return regular_grid(d, side**d)


def saturation_trace(trace, rate, alpha, probes, objective=None, D=1.0, check=True):
    """Saturated fraction of ``probes`` at every round, from a completed trace.

    A point ``x`` is saturated at round ``t`` when
    ``f(x0) - f(x) >= 2 C_t sigma_{t-1}(x)``. The probe nearest ``x0`` stands
    for the maximizer's cell; with ``check=True`` a saturated cell raises
    :class:`SaturationError`.
    """
    f = objective if objective is not None else trace.objective
    if f is None or f.x0 is None:
        raise ConfigError("saturation_trace needs an objective with a located maximum")
    P = as_points(probes, trace.d)
    T = len(trace)
    X = np.array(trace.X).reshape(T, trace.d)
    gaps = f.value0 - evaluate_objective(f, P)
    if T:
        # nested factors: row s of L_T^{-1} k(A_T, P) only involves the first s points,
        # so cumulative sums of squares give k_{t-1}(x, x) for every round at once
        M = kernel_matrix(trace.spec, X) + trace.lam * np.eye(T)
        L, _ = cholesky_with_jitter(M, "k(A,A) + lam I")
        V = solve_triangular(L, kernel_matrix(trace.spec, X, P), lower=True)
        explained = np.vstack([np.zeros((1, P.shape[0])), np.cumsum(V**2, axis=0)[:-1]])
    else:
        explained = np.zeros((0, P.shape[0]))
    k_prev = np.maximum(1.0 - explained, 0.0)
    sigma = np.sqrt(k_prev / alpha)
    ts = np.arange(1, T + 1)
    C = threshold(rate, alpha, ts, D)
    saturated = gaps[None, :] >= 2.0 * C[:, None] * sigma
    cell = int(np.argmin(np.sum((P - np.asarray(f.x0)[None, :]) ** 2, axis=1)))
    report = SaturationReport(
        C_t=C,
        fraction=saturated.mean(axis=1) if T else np.zeros(0),
        x_t_saturated=np.array(trace.saturated, dtype=bool),
        x0_cell=P[cell],
        x0_cell_saturated=saturated[:, cell],
        precondition=precondition_values(rate, alpha, ts),
    )
    if check and report.x0_ever_saturated:
        first = int(np.argmax(report.x0_cell_saturated)) + 1
        raise SaturationError(f"maximizer cell {P[cell]} saturated at round {first}")
    return report
