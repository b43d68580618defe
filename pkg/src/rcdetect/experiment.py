"""End-to-end runs: one detection experiment, or the network-size scaling study.

An experiment directory holds

* ``manifest.json``: the resolved config (explicit signals) plus provenance;
  passing it back to :func:`run_experiment` reproduces every CSV;
* ``training_trajectory.csv``, ``inference_trajectory.csv``;
* ``recovered.csv``: recovered ``u_i`` and true ``g_i`` per channel;
* ``metrics.json`` and the trained ``detector/``.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__, config as cfgmod, netgen, signals
from .detector import DetectorConfig, calibrate_noise_floor, derive_seed, detect, localize, mse_report, train
from .models import IntegrationDivergence

log = logging.getLogger(__name__)

_NETGEN, _SC_FORCING, _SC_DISTURBANCE = 20, 21, 22


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, frozenset):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _provenance():
    return {"package_version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "platform": platform.platform()}


def run_experiment(cfg, out, threads=None):
    """Train, calibrate and detect as configured; write artifacts under ``out``.

    ``cfg`` is a config dict (or a manifest written by an earlier run).
    Returns the metrics dict.
    """
    if "config" in cfg and "provenance" in cfg:
        cfg = cfg["config"]
    model, forcing, disturbance, det_cfg, resolved = cfgmod.resolve_experiment(cfg)
    times = resolved["times"]
    threads = threads or resolved.get("threads", 1)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = resolved["seed"]
    x0 = None if resolved.get("x0") is None else np.asarray(resolved["x0"], dtype=float)

    t_start = time.perf_counter()
    trained = train(model, forcing, det_cfg, times["T_hat"], times["dt"], seed, x0=x0,
                    settle=times.get("settle", 0.0), threads=threads)
    t_train = time.perf_counter() - t_start
    calibrate_noise_floor(trained, model, T_cal=times.get("T_cal", times["T"]))
    result = detect(trained, model, disturbance, T=times["T"])
    elapsed = time.perf_counter() - t_start

    trained.training.to_csv(out / "training_trajectory.csv")
    result.trajectory.to_csv(out / "inference_trajectory.csv")
    result.to_csv(out / "recovered.csv")
    trained.save(out / "detector")

    metrics = result.metrics()
    metrics["training_rmse"] = trained.manifest["training_rmse"]
    metrics["training_min_state"] = trained.manifest["training_min_state"]
    metrics["inference_min_state"] = float(result.trajectory.min_value)
    metrics["floor_parts"] = {k: np.asarray(v).tolist() for k, v in trained.floor_parts.items()}
    metrics["runtime_s"] = {"train": t_train, "total": elapsed}
    _dump(out / "metrics.json", metrics)
    _dump(out / "manifest.json", {"config": resolved, "provenance": _provenance(),
                                  "detector_manifest": {k: v for k, v in trained.manifest.items()
                                                        if k not in ("model", "forcing")}})
    return metrics


# ---------------------------------------------------------------------------
# scaling study
# ---------------------------------------------------------------------------

SCALING_FIELDS = ("N", "realization", "architecture", "mse_disturbed", "mse_undisturbed",
                  "system_seed", "status")


def _scaling_realization(cfg, N, r, arch):
    """One (N, realization, architecture) cell; returns a row dict."""
    seed = derive_seed(cfg["seed"], N, r)
    row = {"N": N, "realization": r, "architecture": arch, "mse_disturbed": None,
           "mse_undisturbed": None, "system_seed": None, "status": "ok"}
    try:
        system = netgen.generate(N, derive_seed(seed, _NETGEN), dt=cfg["dt"])
        row["system_seed"] = system.seed
        model = system.model()
        forcing = signals.sinusoid_bank(N, cfg["amplitude"], cfg.get("freq_low", 1.0),
                                        cfg.get("freq_high", 9.0), seed=derive_seed(seed, _SC_FORCING))
        dist = signals.random_disturbance_ensemble(N, cfg.get("fraction_disturbed", 0.2),
                                                   seed=derive_seed(seed, _SC_DISTURBANCE))
        det = DetectorConfig(architecture=arch, M=cfg["M"], ridge=cfg.get("ridge", 1e-6))
        trained = train(model, forcing, det, cfg["T_hat"], cfg["dt"], seed, x0=system.x_star)
        res = detect(trained, model, dist, T=cfg["T"])
        row["mse_disturbed"], row["mse_undisturbed"] = mse_report(res)
    except (IntegrationDivergence, netgen.GenerationError, np.linalg.LinAlgError, ValueError) as exc:
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
        log.warning("N=%d realization %d %s failed: %s", N, r, arch, exc)
    return row


def scaling_summary(rows):
    """Per (architecture, N): mean and std of the MSEs, plus trend statistics."""
    out = {"cells": [], "trend": {}}
    archs = sorted({r["architecture"] for r in rows})
    Ns = sorted({r["N"] for r in rows})
    for a in archs:
        means = []
        for N in Ns:
            ok = [r for r in rows if r["architecture"] == a and r["N"] == N and r["status"] == "ok"]
            md = np.array([r["mse_disturbed"] for r in ok], dtype=float)
            mu = np.array([r["mse_undisturbed"] for r in ok if r["mse_undisturbed"] is not None], dtype=float)
            failed = sum(1 for r in rows if r["architecture"] == a and r["N"] == N and r["status"] != "ok")
            cell = {"architecture": a, "N": N, "n_ok": len(ok), "n_failed": failed,
                    "mse_disturbed_mean": float(md.mean()) if len(md) else None,
                    "mse_disturbed_std": float(md.std()) if len(md) else None,
                    "mse_undisturbed_mean": float(mu.mean()) if len(mu) else None}
            out["cells"].append(cell)
            means.append(cell["mse_disturbed_mean"])
        trend = {"N": Ns, "mse_disturbed_mean": means}
        pts = [(r["N"], r["mse_disturbed"]) for r in rows if r["architecture"] == a and r["status"] == "ok"]
        if len({p[0] for p in pts}) > 1:
            trend["spearman_rho"] = float(stats.spearmanr(*zip(*pts))[0])
        if means and means[0] and means[-1] is not None:
            trend["ratio_last_first"] = means[-1] / means[0]
        out["trend"][a] = trend
    out["mse_convention"] = "mean over retained steps and channels of (u_i - g_i)^2"
    return out


def run_scaling_study(cfg, out, threads=None):
    """Run every (N, realization, architecture) cell; write ``scaling.csv`` and ``summary.json``."""
    errors = cfgmod.validate_scaling(cfg)
    if errors:
        raise cfgmod.ConfigError(errors)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    archs = [a.replace("-", "_") for a in cfg.get("architectures", ["standard", "pseudo_parallel"])]
    tasks = [(N, r, a) for N in cfg["N_values"] for r in range(cfg["realizations"]) for a in archs]
    threads = threads or cfg.get("threads", 1)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda t: _scaling_realization(cfg, *t), tasks))
    else:
        rows = [_scaling_realization(cfg, *t) for t in tasks]
    # rows are written in task order, whatever order they finished in
    with open(out / "scaling.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SCALING_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
    summary = scaling_summary(rows)
    _dump(out / "summary.json", summary)
    _dump(out / "manifest.json", {"config": cfg, "provenance": _provenance()})
    return rows, summary
