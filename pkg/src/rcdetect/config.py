"""JSON experiment configs: schema checks, preset lookup and resolution.

An experiment config names a model, a training forcing, a disturbance, the
detector settings, the time spans and one master seed. Random signals can be
given in generator form (ranges only); :func:`resolve_experiment` draws them
from seeds derived from the master seed and returns the explicit form, which
is what artifact manifests record.

Validation collects every problem it can find and reports them together.
"""

from __future__ import annotations

import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import models, signals
from .detector import ARCHITECTURES, DetectorConfig, derive_seed
from .netgen import GeneratedSystem

# stream keys for derive_seed, continuing those in the detector module
_FORCING, _DISTURBANCE = 10, 11


class ConfigError(ValueError):
    """Raised with the full list of validation problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def preset_names():
    root = resources.files("rcdetect") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name):
    path = resources.files("rcdetect") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(preset_names())}"])
    return json.loads(path.read_text())


def load_config(ref):
    """A preset name or a path to a JSON file."""
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        try:
            return json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read {ref}: {exc}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{ref} is not valid JSON: {exc}"]) from exc
    return load_preset(str(ref))


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

EXPERIMENT_KEYS = {"kind", "name", "source", "notes", "seed", "model", "forcing", "disturbance",
                   "detector", "times", "x0", "threads"}
SCALING_KEYS = {"kind", "name", "source", "notes", "seed", "N_values", "realizations", "M",
                "architectures", "fraction_disturbed", "T_hat", "dt", "T", "amplitude",
                "freq_low", "freq_high", "ridge", "threads"}
TIMES_KEYS = {"T_hat", "dt", "T", "T_cal", "settle"}
MODEL_PRESETS = {"lv_fig2", "wc_stationary", "wc_oscillatory"}
DETECTOR_KEYS = {f.name for f in fields(DetectorConfig)}

SIGNAL_KEYS = {
    "zero": {"type", "n_channels"},
    "sinusoid_bank": {"type", "n_channels", "amplitude", "freq_low", "freq_high", "omegas",
                      "freq_range", "seed"},
    "random_steps": {"type", "n_channels", "n_intervals", "interval_length", "level_low",
                     "level_high", "t_start", "levels", "level_range", "seed"},
    "heaviside": {"type", "n_channels", "active"},
    "lv_pseudo_sinusoids": {"type", "n_channels", "channels"},
    "composed_sigmoid": {"type", "n_channels", "channel"},
    "random_disturbances": {"type", "n_channels", "fraction", "entries", "seed"},
}


def _unknown(d, allowed, where, errors):
    for k in sorted(set(d) - set(allowed)):
        errors.append(f"{where}.{k}: unknown key")


def _positive(d, key, where, errors, required=True):
    if key not in d:
        if required:
            errors.append(f"{where}.{key}: required")
        return
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v) or v <= 0:
        errors.append(f"{where}.{key}: must be a positive number, got {v!r}")


def _nonneg(d, key, where, errors):
    v = d.get(key, 0)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
        errors.append(f"{where}.{key}: must be a non-negative number, got {v!r}")


def _seed(d, where, errors):
    s = d.get("seed")
    if not isinstance(s, int) or isinstance(s, bool) or s < 0:
        errors.append(f"{where}seed: required non-negative integer (no wall-clock seeding), got {s!r}")


def _check_model(spec, errors):
    """Returns a model when the spec is usable, else None."""
    if not isinstance(spec, dict):
        errors.append("model: must be an object")
        return None
    if "preset" in spec:
        _unknown(spec, {"preset", "scale", "B"}, "model", errors)
        name = spec["preset"]
        if name not in MODEL_PRESETS:
            errors.append(f"model.preset: unknown model preset {name!r}; "
                          f"available: {', '.join(sorted(MODEL_PRESETS))}")
            return None
        if name == "lv_fig2" and "B" in spec:
            errors.append("model.B: only Wilson-Cowan presets take an adjacency B")
        if name != "lv_fig2" and "scale" in spec:
            errors.append("model.scale: only the LV preset takes a scale")
        try:
            return build_model(spec)
        except (ValueError, TypeError) as exc:
            errors.append(f"model: {exc}")
            return None
    if "system" in spec:
        _unknown(spec, {"system"}, "model", errors)
    else:
        _unknown(spec, {"type", "params"}, "model", errors)
    try:
        return build_model(spec)
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"model: {exc!r}")
        return None


def _check_signal(spec, where, n_channels, errors):
    if not isinstance(spec, dict):
        errors.append(f"{where}: must be an object")
        return
    kind = spec.get("type")
    if kind not in SIGNAL_KEYS:
        errors.append(f"{where}.type: unknown signal type {kind!r}; "
                      f"available: {', '.join(sorted(SIGNAL_KEYS))}")
        return
    _unknown(spec, SIGNAL_KEYS[kind], where, errors)
    n = spec.get("n_channels", n_channels)
    if n_channels is not None and n != n_channels:
        errors.append(f"{where}.n_channels: {n} does not match the model's {n_channels} channels")
    if kind == "sinusoid_bank" and "omegas" not in spec:
        lo, hi = spec.get("freq_low", 1.0), spec.get("freq_high", 9.0)
        if not lo < hi:
            errors.append(f"{where}.freq_low: must be below freq_high")
        _positive(spec, "amplitude", where, errors)
    if kind == "random_steps" and "levels" not in spec:
        _positive(spec, "n_intervals", where, errors)
        _positive(spec, "interval_length", where, errors)
        for k in ("level_low", "level_high"):
            if k not in spec:
                errors.append(f"{where}.{k}: required")
    if kind == "heaviside":
        active = spec.get("active")
        if not isinstance(active, dict) or not active:
            errors.append(f"{where}.active: must map channel -> [t_on, level] or [t_on, t_off, level]")
        else:
            for ch, v in active.items():
                if not str(ch).isdigit() or n is not None and int(ch) >= n:
                    errors.append(f"{where}.active.{ch}: channel out of range")
                if not isinstance(v, list) or len(v) not in (2, 3):
                    errors.append(f"{where}.active.{ch}: expected [t_on, level] or [t_on, t_off, level]")
                elif len(v) == 3 and v[1] is not None and not v[0] < v[1]:
                    errors.append(f"{where}.active.{ch}: t_on must precede t_off")
    if kind == "lv_pseudo_sinusoids":
        chans = spec.get("channels", [2, 4])
        if len(chans) != 2 or len(set(chans)) != 2 or (n is not None and max(chans) >= n):
            errors.append(f"{where}.channels: need two distinct channels below {n}")
    if kind == "composed_sigmoid" and n is not None and not 0 <= spec.get("channel", 0) < n:
        errors.append(f"{where}.channel: out of range")
    if kind == "random_disturbances" and "entries" not in spec:
        f = spec.get("fraction", 0.2)
        if not isinstance(f, (int, float)) or not 0 <= f <= 1:
            errors.append(f"{where}.fraction: must lie in [0, 1]")


def _check_detector(spec, model, errors):
    if not isinstance(spec, dict):
        errors.append("detector: must be an object")
        return
    _unknown(spec, DETECTOR_KEYS, "detector", errors)
    arch = str(spec.get("architecture", "standard")).replace("-", "_")
    if arch not in ARCHITECTURES:
        errors.append(f"detector.architecture: must be one of {ARCHITECTURES}, got {arch!r}")
    for k in ("M", "mean_degree", "spectral_radius", "input_scale"):
        _positive(spec, k, "detector", errors, required=False)
    leak = spec.get("leak", 0.0)
    if not isinstance(leak, (int, float)) or not 0 <= leak <= 1:
        errors.append(f"detector.leak: must lie in [0, 1], got {leak!r}")
    _nonneg(spec, "ridge", "detector", errors)
    if spec.get("washout") is not None:
        _nonneg(spec, "washout", "detector", errors)
    if spec.get("radius_method", "arnoldi") not in ("arnoldi", "power"):
        errors.append("detector.radius_method: must be 'arnoldi' or 'power'")
    cmap = spec.get("channel_map")
    if cmap is not None and model is not None:
        bad = [c for c in cmap if not 0 <= c < model.size]
        if bad:
            errors.append(f"detector.channel_map: state indices {bad} out of range")
        if model.kind == "wilson_cowan":
            islots = [c for c in cmap if c % 2 == 1]
            if islots:
                errors.append(f"detector.channel_map: indices {islots} are inhibitory slots; "
                              "Wilson-Cowan disturbances enter excitatory populations only")


def validate_experiment(cfg):
    """List of problems with an experiment config; empty when valid."""
    errors = []
    if not isinstance(cfg, dict):
        return ["config: must be a JSON object"]
    _unknown(cfg, EXPERIMENT_KEYS, "config", errors)
    if cfg.get("kind", "experiment") != "experiment":
        errors.append(f"config.kind: expected 'experiment', got {cfg.get('kind')!r}")
    _seed(cfg, "config.", errors)
    for k in ("model", "forcing", "disturbance", "times"):
        if k not in cfg:
            errors.append(f"config.{k}: required")
    model = _check_model(cfg["model"], errors) if "model" in cfg else None
    det = cfg.get("detector", {})
    _check_detector(det, model, errors)
    n_channels = None
    if model is not None and isinstance(det, dict):
        cmap = det.get("channel_map")
        n_channels = len(cmap) if cmap is not None else len(model.channel_map)
    for k in ("forcing", "disturbance"):
        if k in cfg:
            _check_signal(cfg[k], k, n_channels, errors)
    times = cfg.get("times")
    if isinstance(times, dict):
        _unknown(times, TIMES_KEYS, "times", errors)
        for k in ("T_hat", "dt", "T"):
            _positive(times, k, "times", errors)
        _positive(times, "T_cal", "times", errors, required=False)
        _nonneg(times, "settle", "times", errors)
        if all(isinstance(times.get(k), (int, float)) and times.get(k, 0) > 0 for k in ("T_hat", "dt")):
            if times["T_hat"] < 2 * times["dt"]:
                errors.append("times.T_hat: must span at least two steps of dt")
    elif times is not None:
        errors.append("times: must be an object")
    if "x0" in cfg and model is not None:
        x0 = cfg["x0"]
        if not isinstance(x0, list) or len(x0) != model.size:
            errors.append(f"x0: must be a list of {model.size} numbers")
    th = cfg.get("threads", 1)
    if not isinstance(th, int) or th < 1:
        errors.append("threads: must be a positive integer")
    return errors


def validate_scaling(cfg):
    errors = []
    if not isinstance(cfg, dict):
        return ["config: must be a JSON object"]
    _unknown(cfg, SCALING_KEYS, "config", errors)
    _seed(cfg, "config.", errors)
    Ns = cfg.get("N_values")
    if not isinstance(Ns, list) or not Ns or any(not isinstance(n, int) or n < 5 for n in Ns):
        errors.append("N_values: must be a non-empty list of integers >= 5")
    r = cfg.get("realizations")
    if not isinstance(r, int) or r < 1:
        errors.append(f"realizations: must be an integer >= 1, got {r!r}")
    for k in ("M", "T_hat", "dt", "T", "amplitude"):
        _positive(cfg, k, "config", errors)
    _nonneg(cfg, "ridge", "config", errors)
    if not cfg.get("freq_low", 1.0) < cfg.get("freq_high", 9.0):
        errors.append("freq_low: must be below freq_high")
    archs = cfg.get("architectures", list(ARCHITECTURES))
    bad = [a for a in archs if str(a).replace("-", "_") not in ARCHITECTURES]
    if bad or not archs:
        errors.append(f"architectures: must be a non-empty subset of {ARCHITECTURES}, got {archs!r}")
    f = cfg.get("fraction_disturbed", 0.2)
    if not isinstance(f, (int, float)) or not 0 < f <= 1:
        errors.append("fraction_disturbed: must lie in (0, 1]")
    th = cfg.get("threads", 1)
    if not isinstance(th, int) or th < 1:
        errors.append("threads: must be a positive integer")
    return errors


def validate(cfg):
    if isinstance(cfg, dict) and cfg.get("kind") == "scaling_study":
        return validate_scaling(cfg)
    return validate_experiment(cfg)


# ---------------------------------------------------------------------------
# resolution
# ---------------------------------------------------------------------------


def build_model(spec):
    if "preset" in spec:
        name = spec["preset"]
        if name == "lv_fig2":
            return models.LotkaVolterra(models.lv_fig2_like(spec.get("scale", models.LV_FIG2_SCALE)))
        B = spec.get("B")
        return models.WilsonCowan(models.wc_preset(name[3:], None if B is None else np.asarray(B, float)))
    if "system" in spec:
        return GeneratedSystem.from_dict(spec["system"]).model()
    return models.model_from_dict(spec)


def build_signal(spec, n_channels, master_seed, stream):
    """Explicit Signal from a generator-form or explicit spec."""
    spec = dict(spec)
    kind = spec["type"]
    n = int(spec.get("n_channels", n_channels))
    seed = spec.get("seed", derive_seed(master_seed, stream))
    if kind == "sinusoid_bank" and "omegas" not in spec:
        return signals.sinusoid_bank(n, spec["amplitude"], spec.get("freq_low", 1.0),
                                     spec.get("freq_high", 9.0), seed=seed)
    if kind == "random_steps" and "levels" not in spec:
        return signals.random_steps(n, int(spec["n_intervals"]), spec["interval_length"],
                                    spec["level_low"], spec["level_high"], seed=seed,
                                    t_start=spec.get("t_start", 0.0))
    if kind == "random_disturbances" and "entries" not in spec:
        return signals.random_disturbance_ensemble(n, spec.get("fraction", 0.2), seed=seed)
    spec.setdefault("n_channels", n)
    return signals.signal_from_dict(spec)


def resolve_experiment(cfg):
    """Validate, then return ``(model, forcing, disturbance, DetectorConfig, resolved cfg)``.

    The resolved config has explicit signals, so running it again reproduces
    the same draws regardless of how seeds were derived.
    """
    errors = validate_experiment(cfg)
    if errors:
        raise ConfigError(errors)
    model = build_model(cfg["model"])
    det = DetectorConfig(**cfg.get("detector", {}))
    n = len(det.resolved_channel_map(model))
    forcing = build_signal(cfg["forcing"], n, cfg["seed"], _FORCING)
    disturbance = build_signal(cfg["disturbance"], n, cfg["seed"], _DISTURBANCE)
    resolved = dict(cfg)
    resolved["kind"] = "experiment"
    resolved["forcing"] = forcing.to_dict()
    resolved["disturbance"] = disturbance.to_dict()
    resolved["detector"] = det.to_dict()
    return model, forcing, disturbance, det, resolved
