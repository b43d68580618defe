"""Two-phase disturbance detection.

Training drives the network with a known forcing ``H`` on ``[-T_hat, 0]`` and
fits reservoir readouts that map the observed trajectory back to ``H``.
Detection drives the same reservoirs with a trajectory recorded under an
unknown disturbance ``G`` and reads ``U(t) ~ G(t)`` off the readouts.

Two architectures share one interface:

``standard``
    one reservoir of size ``N*M`` fed the full state, one readout for all
    channels.
``pseudo_parallel``
    one reservoir of size ``M`` per node, fed the node's own state and its
    network neighbours' states, trained only on that node's forcing channel.
"""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .models import Trajectory, model_from_dict, random_initial_state, simulate, write_columns_csv
from .reservoir import Readout, Reservoir, build_reservoir, default_washout, drive, readout_apply, train_readout
from .signals import MaskedSignal, SinusoidBank, StepSignal, ZeroSignal, signal_from_dict

log = logging.getLogger(__name__)

ARCHITECTURES = ("standard", "pseudo_parallel")


def derive_seed(master, *keys):
    """Deterministic 32-bit child seed for ``(master, *keys)``."""
    ss = np.random.SeedSequence([int(master), *(int(k) for k in keys)])
    return int(ss.generate_state(1, np.uint32)[0])


# stream keys for derive_seed
_RESERVOIR, _INIT, _HOLDOUT = 1, 2, 3


@dataclass
class DetectorConfig:
    architecture: str = "standard"
    M: int = 125
    mean_degree: float = 6.0
    spectral_radius: float = 1.2
    input_scale: float = 0.01
    leak: float = 0.0
    ridge: float = 1e-6
    washout: int | None = None
    channel_map: tuple | None = None
    neighborhoods: tuple | None = None
    radius_method: str = "arnoldi"

    def __post_init__(self):
        self.architecture = self.architecture.replace("-", "_")
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError("leak must lie in [0, 1]")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.channel_map is not None:
            self.channel_map = tuple(int(c) for c in self.channel_map)
        if self.neighborhoods is not None:
            self.neighborhoods = tuple(tuple(int(j) for j in nb) for nb in self.neighborhoods)

    def resolved_channel_map(self, model):
        return np.asarray(model.channel_map if self.channel_map is None else self.channel_map)

    def neighborhood(self, model, i):
        if self.neighborhoods is not None:
            return np.unique(np.concatenate([[i], self.neighborhoods[i]]))
        return model.neighborhood(i)

    def to_dict(self):
        return asdict(self)


@dataclass
class Unit:
    """One reservoir with its readout, input slice and output channels."""

    reservoir: Reservoir
    readout: Readout
    inputs: np.ndarray
    channels: np.ndarray

    def run(self, X, washout):
        hist = drive(self.reservoir, X[:, self.inputs], washout=washout)
        return readout_apply(self.readout, hist)


@dataclass
class TrainedDetector:
    config: DetectorConfig
    units: list
    manifest: dict
    training: Trajectory | None = None
    noise_floor: np.ndarray | None = None
    floor_parts: dict = field(default_factory=dict)
    baseline: np.ndarray | None = None

    @property
    def n_channels(self):
        return int(sum(len(u.channels) for u in self.units))

    @property
    def dt(self):
        return float(self.manifest["dt"])

    def recover(self, X, washout=None):
        """Readout outputs for a trajectory array ``X``; one column per channel."""
        X = getattr(X, "values", X)
        wo = default_washout(len(X)) if washout is None else washout
        U = np.zeros((len(X), self.n_channels))
        for unit in self.units:
            U[:, unit.channels] = unit.run(X, wo)
        return U

    # -- persistence -----------------------------------------------------

    def save(self, path):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        arrays = {}
        units = []
        for k, u in enumerate(self.units):
            arrays.update(u.reservoir.arrays(prefix=f"u{k}_"))
            arrays[f"u{k}_W_out"] = u.readout.W_out
            units.append({"inputs": u.inputs.tolist(), "channels": u.channels.tolist(),
                          "leak": u.reservoir.leak, "seed": u.reservoir.seed,
                          "reservoir_meta": u.reservoir.meta,
                          "lambda": u.readout.lam, "washout": u.readout.washout})
        if self.noise_floor is not None:
            arrays["noise_floor"] = self.noise_floor
        if self.baseline is not None:
            arrays["baseline"] = self.baseline
        np.savez(path / "arrays.npz", **arrays)
        doc = {"config": self.config.to_dict(), "units": units, "manifest": self.manifest,
               "floor_parts": {k: np.asarray(v).tolist() for k, v in self.floor_parts.items()}}
        (path / "detector.json").write_text(json.dumps(doc, indent=2, default=_json_default))

    @classmethod
    def load(cls, path):
        path = Path(path)
        doc = json.loads((path / "detector.json").read_text())
        with np.load(path / "arrays.npz") as z:
            arrays = {k: z[k] for k in z.files}
        units = []
        for k, u in enumerate(doc["units"]):
            res = Reservoir.from_arrays(arrays, prefix=f"u{k}_", leak=u["leak"], seed=u["seed"],
                                        meta=u["reservoir_meta"])
            ro = Readout(arrays[f"u{k}_W_out"], u["lambda"], u["washout"])
            units.append(Unit(res, ro, np.asarray(u["inputs"]), np.asarray(u["channels"])))
        det = cls(DetectorConfig(**doc["config"]), units, doc["manifest"],
                  noise_floor=arrays.get("noise_floor"), baseline=arrays.get("baseline"))
        det.floor_parts = {k: np.asarray(v) for k, v in doc.get("floor_parts", {}).items()}
        return det


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _unit_layout(model, config):
    """(node key, input state indices, output channels) per reservoir."""
    cmap = config.resolved_channel_map(model)
    if config.architecture == "standard":
        return [(0, np.arange(model.size), np.arange(len(cmap)))]
    owner = cmap // model.D
    layout = []
    for i in range(model.N):
        chans = np.flatnonzero(owner == i)
        if len(chans) == 0:
            continue
        nodes = config.neighborhood(model, i)
        inputs = np.concatenate([model.node_slots(j) for j in nodes])
        layout.append((i, inputs, chans))
    return layout


def _fit_unit(config, X, targets, inputs, channels, size, seed, washout):
    res = build_reservoir(size, len(inputs), density=min(1.0, config.mean_degree / size),
                          spectral_radius_target=config.spectral_radius, input_scale=config.input_scale,
                          leak=config.leak, seed=seed, radius_method=config.radius_method)
    hist = drive(res, X[:, inputs], washout=washout)
    ro = train_readout(hist, targets[:, channels], config.ridge)
    res.reset()
    return Unit(res, ro, inputs, channels)


def _unit_size(model, config):
    return config.M * model.N if config.architecture == "standard" else config.M


def train(model, forcing, config, T_hat, dt, seed, x0=None, settle=0.0, threads=1):
    """Simulate the forced system on [-T_hat, 0] and fit the readout(s).

    ``x0`` defaults to a seeded random draw (see
    :func:`~rcdetect.models.random_initial_state`). With ``settle > 0`` the
    unforced system first relaxes from ``x0`` for that long, so the forced run
    starts on the undisturbed attractor.
    """
    cmap = config.resolved_channel_map(model)
    if forcing.n_channels != len(cmap):
        raise ValueError(f"forcing has {forcing.n_channels} channels, channel map has {len(cmap)}")
    idle = sorted(set(range(forcing.n_channels)) - set(forcing.support))
    if idle:
        warnings.warn(f"training forcing is identically zero on channels {idle}; disturbances there "
                      "cannot be recovered", RuntimeWarning, stacklevel=2)
    if x0 is None:
        x0 = random_initial_state(model, np.random.default_rng(derive_seed(seed, _INIT)))
    x0 = np.asarray(x0, dtype=float)
    x_start = x0
    if settle > 0:
        x_start = simulate(model, None, x0, -T_hat - settle, -T_hat, dt, channel_map=cmap).values[-1]
    traj = simulate(model, forcing, x_start, -T_hat, 0.0, dt, channel_map=cmap)
    targets = forcing.sample(traj.times)
    washout = default_washout(len(traj)) if config.washout is None else config.washout
    layout = _unit_layout(model, config)
    size = _unit_size(model, config)

    def fit(k):
        node, inputs, channels = layout[k]
        return _fit_unit(config, traj.values, targets, inputs, channels, size,
                         derive_seed(seed, _RESERVOIR, node), washout)

    if threads > 1 and len(layout) > 1:
        with ThreadPoolExecutor(threads) as pool:
            units = list(pool.map(fit, range(len(layout))))
    else:
        units = [fit(k) for k in range(len(layout))]

    manifest = {
        "seed": int(seed), "T_hat": float(T_hat), "dt": float(dt), "washout": int(washout),
        "model": model.to_dict(), "forcing": forcing.to_dict(),
        "x0": x0.tolist(), "settle": float(settle), "x_final": traj.values[-1].tolist(),
        "training_min_state": traj.min_value,
    }
    det = TrainedDetector(config, units, manifest, training=traj)
    det.manifest["training_rmse"] = _rms(det.recover(traj.values, washout)[washout:] - targets[washout:]).tolist()
    return det


def _rms(a):
    a = np.asarray(a)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:])
    return np.sqrt(np.mean(a * a, axis=0))


def retrain_unit(detector, model, k, seed):
    """Refit unit ``k`` of a pseudo-parallel detector with a new reservoir seed.

    Uses the stored training trajectory; all other units are left untouched.
    """
    if detector.training is None:
        raise ValueError("detector carries no training trajectory")
    traj = detector.training
    forcing = signal_from_dict(detector.manifest["forcing"])
    targets = forcing.sample(traj.times)
    unit = detector.units[k]
    detector.units[k] = _fit_unit(detector.config, traj.values, targets, unit.inputs, unit.channels,
                                  unit.reservoir.M, seed, int(detector.manifest["washout"]))
    return detector


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------


@dataclass
class DetectionResult:
    times: np.ndarray
    recovered: np.ndarray
    truth: np.ndarray | None
    washout: int
    disturbed: frozenset | None = None
    noise_floor: np.ndarray | None = None
    trajectory: Trajectory | None = None
    baseline: np.ndarray | None = None

    @property
    def n_channels(self):
        return self.recovered.shape[1]

    @property
    def retained(self):
        return self.recovered[self.washout:]

    def rms(self):
        """Per-channel RMS of the recovered signal after washout."""
        return _rms(self.retained)

    def deviation_rms(self):
        """Per-channel RMS of ``u_i - baseline_i`` after washout (plain RMS without a baseline)."""
        if self.baseline is None:
            return self.rms()
        return _rms(self.retained - np.asarray(self.baseline))

    def per_channel_mse(self):
        if self.truth is None:
            raise ValueError("no ground truth available")
        d = self.retained - self.truth[self.washout:]
        return np.mean(d * d, axis=0)

    def to_csv(self, path):
        cols = [self.recovered]
        names = [f"u_{i}" for i in range(self.n_channels)]
        if self.truth is not None:
            cols.append(self.truth)
            names += [f"g_{i}" for i in range(self.n_channels)]
        write_columns_csv(path, self.times, np.hstack(cols), names)

    def metrics(self, policy=None):
        out = {"washout_steps": int(self.washout), "rms": self.rms().tolist(),
               "mse_convention": "mean over retained steps and channels of (u_i - g_i)^2"}
        if self.noise_floor is not None:
            out["noise_floor"] = np.asarray(self.noise_floor).tolist()
            out["deviation_rms"] = self.deviation_rms().tolist()
            if self.baseline is not None:
                out["baseline"] = np.asarray(self.baseline).tolist()
            out["localized"] = sorted(localize(self, policy))
        if self.truth is not None:
            out["per_channel_mse"] = self.per_channel_mse().tolist()
            out["disturbed_channels"] = sorted(self.disturbed)
            md, mu = mse_report(self)
            out["mse_disturbed"] = md
            out["mse_undisturbed"] = mu
        return out


def _check_compatible(trained, model, dt):
    m = trained.manifest["model"]
    if m["type"] != model.kind or model_from_dict(m).size != model.size:
        raise ValueError("model does not match the one the detector was trained on")
    if abs(float(dt) - trained.dt) > 1e-12 * max(1.0, trained.dt):
        raise ValueError(f"dt={dt} differs from training dt={trained.dt}")


def detect(trained, model, disturbance, x0=None, T=50.0, dt=None, truth=True):
    """Simulate the disturbed system on [0, T] and recover the disturbance.

    ``disturbance`` is a Signal (None for no disturbance). When ``truth`` is
    set, the disturbance doubles as ground truth for scoring. ``x0`` defaults
    to the final training state.
    """
    dt = trained.dt if dt is None else dt
    _check_compatible(trained, model, dt)
    if x0 is None:
        x0 = np.asarray(trained.manifest["x_final"])
    cmap = trained.config.resolved_channel_map(model)
    if disturbance is None:
        disturbance = ZeroSignal(len(cmap))
    traj = simulate(model, disturbance, x0, 0.0, T, dt, channel_map=cmap)
    washout = int(trained.manifest["washout"])
    U = trained.recover(traj.values, washout)
    G = disturbance.sample(traj.times) if truth else None
    return DetectionResult(traj.times, U, G, min(washout, len(traj)),
                           frozenset(disturbance.support) if truth else None,
                           trained.noise_floor, traj, trained.baseline)


def holdout_forcing(forcing, seed):
    """A fresh draw from the same family as a training forcing, starting at t=0."""
    if isinstance(forcing, SinusoidBank):
        lo, hi = forcing.freq_range or (min(forcing.omegas), max(forcing.omegas))
        omegas = np.random.default_rng(seed).uniform(lo, hi, forcing.n_channels)
        return SinusoidBank(forcing.amplitude, tuple(float(w) for w in omegas), seed, (lo, hi))
    if isinstance(forcing, StepSignal):
        lo, hi = forcing.level_range or (float(np.min(forcing.levels)), float(np.max(forcing.levels)))
        lv = np.random.default_rng(seed).uniform(lo, hi, (forcing.n_intervals, forcing.n_channels))
        return StepSignal(0.0, forcing.interval_length, tuple(tuple(float(v) for v in r) for r in lv),
                          seed, (lo, hi))
    return None


def calibrate_noise_floor(trained, model, x0=None, T_cal=50.0, dt=None):
    """Calibrate the detector's resting output and per-channel noise floor.

    Runs, each over ``T_cal``:

    * no disturbance, starting on the undisturbed attractor (reached by letting
      the system relax for ``T_cal`` from ``x0``). The mean output per channel
      is the detector's baseline, its static fit error at rest;
    * two cross-talk runs: the channels are split at random into complementary
      halves, one half is driven by a held-out draw from the training forcing
      family while the other stays quiet, then the roles swap.

    The floor of channel i is the larger of its RMS deviation from baseline in
    the undisturbed run and in the cross-talk run where it was quiet. Baseline
    and floor are stored on ``trained``; the floor is returned.
    """
    dt = trained.dt if dt is None else dt
    if x0 is None:
        x0 = np.asarray(trained.manifest["x_final"])
    cmap = trained.config.resolved_channel_map(model)
    settle = simulate(model, None, x0, 0.0, T_cal, dt, channel_map=cmap).values[-1]
    rest = detect(trained, model, None, x0=settle, T=T_cal, dt=dt).retained
    baseline = rest.mean(axis=0)
    floor_zero = _rms(rest - baseline)
    parts = {"baseline": baseline, "zero_disturbance": floor_zero}
    floor = floor_zero.copy()
    master = trained.manifest["seed"]
    hold = holdout_forcing(signal_from_dict(trained.manifest["forcing"]), derive_seed(master, _HOLDOUT))
    n = len(cmap)
    if hold is not None and n > 1:
        perm = np.random.default_rng(derive_seed(master, _HOLDOUT, 1)).permutation(n)
        halves = (perm[: n // 2], perm[n // 2:])
        cross = np.zeros(n)
        for quiet in halves:
            res = detect(trained, model, MaskedSignal(hold, frozenset(quiet.tolist())), x0=x0, T=T_cal, dt=dt)
            cross[quiet] = _rms(res.retained[:, quiet] - baseline[quiet])
        parts["cross_talk"] = cross
        floor = np.maximum(floor, cross)
    trained.baseline = baseline
    trained.noise_floor = floor
    trained.floor_parts = parts
    return floor


@dataclass(frozen=True)
class ThresholdPolicy:
    """Flag channel i when RMS(u_i - baseline_i) > kappa * floor_i, or > ``absolute`` if given."""

    kappa: float = 3.0
    absolute: float | None = None


def localize(result, policy=None):
    policy = policy or ThresholdPolicy()
    rms = result.deviation_rms()
    if policy.absolute is not None:
        thr = np.full_like(rms, policy.absolute)
    else:
        if result.noise_floor is None:
            raise ValueError("no calibrated noise floor; run calibrate_noise_floor first")
        thr = policy.kappa * np.asarray(result.noise_floor)
    return frozenset(np.flatnonzero(rms > thr).tolist())


def mse_report(result, disturbed_set=None):
    """(disturbed MSE, undisturbed MSE); a side with no channels is None."""
    mse = result.per_channel_mse()
    dset = result.disturbed if disturbed_set is None else frozenset(disturbed_set)
    d = sorted(dset)
    u = sorted(set(range(result.n_channels)) - set(dset))
    return (float(np.mean(mse[d])) if d else None, float(np.mean(mse[u])) if u else None)
