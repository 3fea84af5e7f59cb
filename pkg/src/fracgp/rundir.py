"""On-disk layout of an experiment run.

A run directory holds one trace CSV and one metadata JSON per seed, the
normalized config and ``manifest.json``. Files are written under a
``.partial`` name and renamed once complete, so anything still carrying the
suffix came from an aborted run.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .errors import ConfigError, FracGPError, RunAborted
from .loop import ExperimentConfig, probe_grid, read_trace_csv, run_gpts, saturation_trace
from .kernels import KernelSpec
from .objectives import RKHSFunction

SEED_OFFSET_ENV = "FRACGP_SEED_OFFSET"
MANIFEST = "manifest.json"
CONFIG = "config.json"
PARTIAL = ".partial"


def seed_offset(environ=None):
    raw = (os.environ if environ is None else environ).get(SEED_OFFSET_ENV, "0")
    try:
        offset = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_OFFSET_ENV} must be an integer, got {raw!r}") from None
    if offset < 0:
        raise ConfigError(f"{SEED_OFFSET_ENV} must be >= 0, got {offset}")
    return offset


def trace_stem(seed):
    return f"seed_{seed:06d}"


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return ExperimentConfig.from_dict(doc)


def run_seed(config_doc, seed):
    """Worker: one GP-TS run plus its saturation summary, returned as text.

    Returns ``(seed, csv_text, metadata, error)``; ``error`` is ``None`` on success.
    """
    config = ExperimentConfig.from_dict(config_doc)
    error = None
    try:
        trace = run_gpts(config, seed)
    except RunAborted as exc:
        trace, error = exc.trace, str(exc)
    meta = trace.metadata(config)
    if error is None:
        sat = saturation_trace(
            trace, config.rate, trace.alpha, probe_grid(config.d, config.probes),
            D=config.D, check=False,
        )
        meta["saturation"] = {
            "probe_size": int(probe_grid(config.d, config.probes).shape[0]),
            "max_fraction": float(sat.fraction.max()),
            "x0_cell": sat.x0_cell.tolist(),
            "x0_cell_saturated_rounds": [int(i) + 1 for i in sat.x0_cell_saturated.nonzero()[0]],
            "x_t_saturated_rounds": [int(i) + 1 for i in sat.x_t_saturated.nonzero()[0]],
        }
    else:
        meta["error"] = error
    return seed, trace.to_csv(), meta, error


def _write(path, text):
    tmp = Path(str(path) + PARTIAL)
    tmp.write_text(text)
    return tmp


def execute(config, out_dir, parallel=1, offset=0, log=None):
    """Run every seed of ``config`` into ``out_dir`` and write the manifest.

    Workers return text; only this process touches files. Returns
    ``(manifest, failures)``.
    """
    start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + offset for s in config.seeds]
    doc = config.to_dict()
    results = {}
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(run_seed, doc, s) for s in seeds]
            for fut in futures:
                seed, text, meta, err = fut.result()
                results[seed] = (text, meta, err)
                if log:
                    log(f"seed {seed}: {'failed' if err else 'done'}")
    else:
        for s in seeds:
            seed, text, meta, err = run_seed(doc, s)
            results[seed] = (text, meta, err)
            if log:
                log(f"seed {seed}: {'failed' if err else 'done'}")

    outputs, failures = [], []
    for seed in seeds:
        text, meta, err = results[seed]
        stem = trace_stem(seed)
        csv_tmp = _write(out / f"{stem}.csv", text)
        meta_tmp = _write(out / f"{stem}.json", dumps(meta))
        if err is None:
            os.replace(csv_tmp, out / f"{stem}.csv")
            os.replace(meta_tmp, out / f"{stem}.json")
            outputs += [f"{stem}.csv", f"{stem}.json"]
        else:
            failures.append((seed, err))
            outputs += [csv_tmp.name, meta_tmp.name]
    (out / CONFIG).write_text(dumps(doc))
    outputs.append(CONFIG)

    metas = [results[s][1] for s in seeds if results[s][2] is None]
    checks = {
        "monitor_never_fired": all(not m["monitor_fired"] for m in metas),
        "x0_cell_never_saturated": all(
            not m["saturation"]["x0_cell_saturated_rounds"] for m in metas
        ),
        "all_seeds_completed": not failures,
    }
    manifest = {
        "config_hash": config.config_hash(),
        "tool_version": __version__,
        "seeds": seeds,
        "seed_offset": offset,
        "outputs": outputs,
        "wall_clock_s": round(time.perf_counter() - start, 3),
        "checks": checks,
        "status": "failed" if failures else "ok",
        "config": doc,
    }
    name = MANIFEST + (PARTIAL if failures else "")
    (out / name).write_text(dumps(manifest))
    return manifest, failures


class RunDir:
    """A completed run directory loaded back from disk."""

    def __init__(self, path):
        self.path = Path(path)
        manifest = self.path / MANIFEST
        if not manifest.is_file():
            raise ConfigError(f"{self.path} has no {MANIFEST}")
        self.manifest = json.loads(manifest.read_text())
        self.config = ExperimentConfig.from_dict(self.manifest["config"])
        self.seeds = list(self.manifest["seeds"])

    @property
    def spec(self):
        return self.config.kernel

    def metadata(self, seed):
        return json.loads((self.path / f"{trace_stem(seed)}.json").read_text())

    def traces(self):
        out = []
        for seed in self.seeds:
            meta = self.metadata(seed)
            tr = read_trace_csv(
                self.path / f"{trace_stem(seed)}.csv",
                KernelSpec.from_dict(meta["kernel"]), meta["lambda"], meta["alpha"], seed,
            )
            if meta.get("objective"):
                tr.objective = RKHSFunction.from_dict(meta["objective"])
            out.append(tr)
        return out


def load_runs(paths):
    try:
        return [RunDir(p) for p in paths]
    except (OSError, ValueError, KeyError) as exc:
        if isinstance(exc, FracGPError):
            raise
        raise ConfigError(f"unreadable run directory: {exc}") from None
