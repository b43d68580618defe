"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 failure while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .detector import TrainedDetector, calibrate_noise_floor, detect, train
from .experiment import _dump, run_experiment, run_scaling_study
from .models import IntegrationDivergence, model_from_dict
from .netgen import GenerationError, generate

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _apply_overrides(cfg, args):
    cfg = json.loads(json.dumps(cfg))
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    if cfg.get("kind") == "scaling_study":
        if getattr(args, "arch", None):
            cfg["architectures"] = [args.arch]
        return cfg
    det = cfg.setdefault("detector", {})
    if getattr(args, "arch", None):
        det["architecture"] = args.arch
    if getattr(args, "leak", None) is not None:
        det["leak"] = args.leak
    return cfg


def _load(ref, args, kind=None):
    cfg = cfgmod.load_config(ref)
    if "config" in cfg and "provenance" in cfg:
        cfg = cfg["config"]
    cfg = _apply_overrides(cfg, args)
    if kind and cfg.get("kind", "experiment") != kind:
        raise cfgmod.ConfigError([f"config.kind: this command needs a {kind!r} config, got {cfg.get('kind')!r}"])
    errors = cfgmod.validate(cfg)
    if errors:
        raise cfgmod.ConfigError(errors)
    return cfg


def _out(args, default):
    return Path(args.out or default)


def cmd_experiment(args):
    cfg = _load(args.config, args, "experiment")
    out = _out(args, Path("runs") / cfg.get("name", "experiment"))
    m = run_experiment(cfg, out)
    print(f"localized channels: {m.get('localized')}")
    if "mse_disturbed" in m:
        print(f"MSE disturbed {m['mse_disturbed']}, undisturbed {m['mse_undisturbed']}")
    print(f"artifacts in {out}")


def cmd_train(args):
    cfg = _load(args.config, args, "experiment")
    model, forcing, _, det_cfg, resolved = cfgmod.resolve_experiment(cfg)
    t = resolved["times"]
    out = _out(args, Path("runs") / f"{cfg.get('name', 'detector')}-detector")
    trained = train(model, forcing, det_cfg, t["T_hat"], t["dt"], resolved["seed"],
                    settle=t.get("settle", 0.0), threads=resolved.get("threads", 1))
    calibrate_noise_floor(trained, model, T_cal=t.get("T_cal", t["T"]))
    trained.save(out)
    trained.training.to_csv(out / "training_trajectory.csv")
    print(f"trained detector saved to {out}")


def cmd_detect(args):
    trained = TrainedDetector.load(args.detector)
    cfg = _load(args.config, args, "experiment")
    model = model_from_dict(trained.manifest["model"])
    n = len(trained.config.resolved_channel_map(model))
    disturbance = cfgmod.build_signal(cfg["disturbance"], n, cfg["seed"], cfgmod._DISTURBANCE)
    result = detect(trained, model, disturbance, T=cfg["times"]["T"])
    out = _out(args, Path(args.detector) / "detection")
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "recovered.csv")
    result.trajectory.to_csv(out / "inference_trajectory.csv")
    metrics = result.metrics()
    _dump(out / "metrics.json", metrics)
    print(f"localized channels: {metrics.get('localized')}")


def cmd_netgen(args):
    system = generate(args.N, 0 if args.seed is None else args.seed, max_attempts=args.max_attempts)
    out = _out(args, f"lv_N{args.N}_seed{system.requested_seed}.json")
    system.save(out)
    print(f"N={system.N} accepted after {system.attempts} draw(s) (seed {system.seed}); "
          f"min x* = {system.x_star.min():.4g}, leading eigenvalue {system.leading_eigenvalue:.4g}; "
          f"written to {out}")


def cmd_scaling(args):
    cfg = _load(args.config, args, "scaling_study")
    out = _out(args, Path("runs") / cfg.get("name", "scaling"))
    rows, summary = run_scaling_study(cfg, out)
    failed = sum(r["status"] != "ok" for r in rows)
    for c in summary["cells"]:
        print(f"{c['architecture']:>16} N={c['N']:>4}  disturbed MSE {c['mse_disturbed_mean']}  "
              f"({c['n_ok']} ok, {c['n_failed']} failed)")
    print(f"{len(rows)} rows ({failed} failed) in {out / 'scaling.csv'}")


def cmd_validate(args):
    _load(args.config, args)
    print(f"{args.config}: valid")


def build_parser():
    p = argparse.ArgumentParser(prog="rcdetect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, arch=True):
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--threads", type=int, help="worker threads")
        if arch:
            sp.add_argument("--arch", choices=["standard", "pseudo-parallel"])
            sp.add_argument("--leak", type=float, help="reservoir leak parameter in [0, 1]")

    sp = sub.add_parser("experiment", help="train, calibrate and detect from a preset or config")
    sp.add_argument("config", help=f"preset name ({', '.join(cfgmod.preset_names())}) or JSON path")
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("train", help="train and calibrate a detector only")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("detect", help="run a saved detector on the disturbance of a config")
    sp.add_argument("detector", help="directory written by 'train'")
    sp.add_argument("config")
    common(sp, arch=False)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("netgen", help="generate a random LV system with a stable positive equilibrium")
    sp.add_argument("N", type=int)
    sp.add_argument("--max-attempts", type=int, default=1000)
    common(sp, arch=False)
    sp.set_defaults(func=cmd_netgen)

    sp = sub.add_parser("scaling-study", help="standard vs pseudo-parallel across network sizes")
    sp.add_argument("config", nargs="?", default="scaling")
    common(sp)
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("validate", help="check a config without running it")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except cfgmod.ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationDivergence, GenerationError, OSError, ValueError, RuntimeError,
            ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
