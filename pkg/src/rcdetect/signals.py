"""Closed-form, seedable forcing and disturbance signals.

A signal maps time to a vector with one entry per channel (one channel per
network node). All randomness is drawn once at construction from the given
seed, and :meth:`Signal.to_dict` records the drawn values, so
``signal_from_dict(s.to_dict())`` evaluates identically to ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Signal:
    """Base class. Subclasses implement :meth:`sample` and :meth:`to_dict`."""

    kind = "abstract"
    n_channels: int

    def sample(self, times):
        """Values at ``times``; shape ``(len(times), n_channels)``."""
        raise NotImplementedError

    def eval(self, t):
        return self.sample(np.array([float(t)]))[0]

    def __call__(self, t):
        return self.eval(t)

    @property
    def support(self):
        """Channels that are not identically zero."""
        return frozenset(range(self.n_channels))

    @property
    def description(self):
        return self.kind

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ZeroSignal(Signal):
    n_channels: int
    kind = "zero"

    def sample(self, times):
        return np.zeros((len(np.atleast_1d(times)), self.n_channels))

    @property
    def support(self):
        return frozenset()

    def to_dict(self):
        return {"type": self.kind, "n_channels": self.n_channels}


@dataclass(frozen=True, eq=False)
class SinusoidBank(Signal):
    """Channel i is ``amplitude * sin(omega_i t)``."""

    amplitude: float
    omegas: tuple
    seed: object = None
    freq_range: tuple = None
    kind = "sinusoid_bank"

    @property
    def n_channels(self):
        return len(self.omegas)

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return self.amplitude * np.sin(np.outer(t, np.asarray(self.omegas)))

    @property
    def support(self):
        if self.amplitude == 0:
            return frozenset()
        return frozenset(i for i, w in enumerate(self.omegas) if w != 0)

    @property
    def description(self):
        return f"{self.amplitude:g} sin(w_i t), w_i ~ U{self.freq_range}, seed {self.seed}"

    def to_dict(self):
        return {"type": self.kind, "amplitude": self.amplitude, "omegas": list(self.omegas),
                "seed": self.seed, "freq_range": None if self.freq_range is None else list(self.freq_range)}


def sinusoid_bank(n_channels, amplitude=0.8, freq_low=1.0, freq_high=9.0, seed=None):
    if not freq_low < freq_high:
        raise ValueError("need freq_low < freq_high")
    omegas = np.random.default_rng(seed).uniform(freq_low, freq_high, n_channels)
    return SinusoidBank(float(amplitude), tuple(float(w) for w in omegas), seed,
                        (float(freq_low), float(freq_high)))


@dataclass(frozen=True, eq=False)
class StepSignal(Signal):
    """Piecewise-constant channels on a shared partition.

    Interval ``k`` is ``[t_start + k*L, t_start + (k+1)*L)`` with level
    ``levels[k]``. Times before the schedule hold the first level and times
    after it hold the last.
    """

    t_start: float
    interval_length: float
    levels: tuple  # n_intervals rows of n_channels values
    seed: object = None
    level_range: tuple = None
    kind = "random_steps"

    def __post_init__(self):
        if self.interval_length <= 0:
            raise ValueError("interval_length must be positive")
        if len(self.levels) < 1:
            raise ValueError("need at least one interval")

    @property
    def n_channels(self):
        return len(self.levels[0])

    @property
    def n_intervals(self):
        return len(self.levels)

    @property
    def breakpoints(self):
        return self.t_start + self.interval_length * np.arange(self.n_intervals + 1)

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.floor((t - self.t_start) / self.interval_length).astype(np.int64)
        idx = np.clip(idx, 0, self.n_intervals - 1)
        return np.asarray(self.levels, dtype=float)[idx]

    @property
    def support(self):
        lv = np.asarray(self.levels)
        return frozenset(np.flatnonzero(np.any(lv != 0, axis=0)).tolist())

    @property
    def description(self):
        return (f"{self.n_intervals} steps of {self.interval_length:g} from t={self.t_start:g}, "
                f"levels ~ U{self.level_range}, seed {self.seed}")

    def to_dict(self):
        return {"type": self.kind, "t_start": self.t_start, "interval_length": self.interval_length,
                "levels": [list(r) for r in self.levels], "seed": self.seed,
                "level_range": None if self.level_range is None else list(self.level_range)}


def random_steps(n_channels, n_intervals, interval_length, level_low, level_high, seed=None, t_start=0.0):
    if n_intervals < 1 or interval_length <= 0:
        raise ValueError("need n_intervals >= 1 and interval_length > 0")
    lv = np.random.default_rng(seed).uniform(level_low, level_high, (n_intervals, n_channels))
    return StepSignal(float(t_start), float(interval_length), tuple(tuple(float(v) for v in r) for r in lv),
                      seed, (float(level_low), float(level_high)))


@dataclass(frozen=True, eq=False)
class Heaviside(Signal):
    """``level`` on ``[t_on, t_off)``, zero elsewhere; ``t_off=None`` means forever.

    ``active`` maps channel -> ``(t_on, t_off, level)``.
    """

    n_channels: int
    active: tuple  # ((channel, t_on, t_off, level), ...)
    kind = "heaviside"

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(t), self.n_channels))
        for ch, t_on, t_off, level in self.active:
            on = t >= t_on
            if t_off is not None:
                on &= t < t_off
            out[on, ch] = level
        return out

    @property
    def support(self):
        return frozenset(ch for ch, _, _, level in self.active if level != 0)

    @property
    def description(self):
        parts = [f"ch{ch}: {lv:g} on [{on:g}, {'inf' if off is None else f'{off:g}'})"
                 for ch, on, off, lv in self.active]
        return "heaviside " + "; ".join(parts)

    def to_dict(self):
        return {"type": self.kind, "n_channels": self.n_channels,
                "active": {str(ch): [on, off, lv] for ch, on, off, lv in self.active}}


def heaviside(n_channels, active):
    """``active``: channel -> ``(t_on, level)`` or ``(t_on, t_off, level)``."""
    entries = []
    for ch, spec in sorted((int(k), v) for k, v in active.items()):
        if not 0 <= ch < n_channels:
            raise ValueError(f"channel {ch} out of range")
        if len(spec) == 2:
            t_on, level = spec
            t_off = None
        else:
            t_on, t_off, level = spec
            if t_off is not None and not t_on < t_off:
                raise ValueError("need t_on < t_off")
        entries.append((ch, float(t_on), None if t_off is None else float(t_off), float(level)))
    return Heaviside(int(n_channels), tuple(entries))


@dataclass(frozen=True, eq=False)
class PseudoSinusoids(Signal):
    """Two fixed LV disturbances:
    ``0.3 sin(2t) + 0.3 sin(pi t)`` and ``sin(2 pi sin(t/2))``."""

    n_channels: int = 8
    channels: tuple = (2, 4)
    kind = "lv_pseudo_sinusoids"

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(t), self.n_channels))
        a, b = self.channels
        out[:, a] = 0.3 * np.sin(2 * t) + 0.3 * np.sin(np.pi * t)
        out[:, b] = np.sin(2 * np.pi * np.sin(t / 2))
        return out

    @property
    def support(self):
        return frozenset(self.channels)

    def to_dict(self):
        return {"type": self.kind, "n_channels": self.n_channels, "channels": list(self.channels)}


def lv_pseudo_sinusoids(n_channels=8, channels=(2, 4)):
    return PseudoSinusoids(int(n_channels), tuple(int(c) for c in channels))


@dataclass(frozen=True, eq=False)
class ComposedSigmoid(Signal):
    """``-0.5 / (1 + exp(-(t-150)/30)) + 1 / (1 + exp(-(t-300)/30))`` on one channel:
    first lowers, then raises the baseline."""

    n_channels: int = 4
    channel: int = 0
    kind = "composed_sigmoid"

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(t), self.n_channels))
        # 1/(1+exp(-z)) written via tanh to avoid overflow warnings for large |z|
        s1 = 0.5 * (1 + np.tanh((t - 150.0) / 60.0))
        s2 = 0.5 * (1 + np.tanh((t - 300.0) / 60.0))
        out[:, self.channel] = -0.5 * s1 + s2
        return out

    @property
    def support(self):
        return frozenset([self.channel])

    def to_dict(self):
        return {"type": self.kind, "n_channels": self.n_channels, "channel": self.channel}


def composed_sigmoid_disturbance(n_channels=4, channel=0):
    return ComposedSigmoid(int(n_channels), int(channel))


@dataclass(frozen=True, eq=False)
class RandomDisturbances(Signal):
    """Per-channel random disturbances.

    Each entry is ``(channel, form, u1, u2, u3, u4)``: form 1 is
    ``u1 sin(u2 t) + u1 sin(u3 t)``, form 2 is ``u1 sin(u4 sin(u2 t))``.
    """

    n_channels: int
    entries: tuple
    seed: object = None
    fraction: float = None
    kind = "random_disturbances"

    def sample(self, times):
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(t), self.n_channels))
        for ch, form, u1, u2, u3, u4 in self.entries:
            if form == 1:
                out[:, ch] = u1 * np.sin(u2 * t) + u1 * np.sin(u3 * t)
            else:
                out[:, ch] = u1 * np.sin(u4 * np.sin(u2 * t))
        return out

    @property
    def support(self):
        return frozenset(e[0] for e in self.entries)

    def to_dict(self):
        return {"type": self.kind, "n_channels": self.n_channels, "seed": self.seed,
                "fraction": self.fraction, "entries": [list(e) for e in self.entries]}


def random_disturbance_ensemble(N, fraction_disturbed=0.2, seed=None):
    if not 0 <= fraction_disturbed <= 1:
        raise ValueError("fraction_disturbed must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    k = int(np.floor(fraction_disturbed * N + 0.5))
    channels = np.sort(rng.choice(N, size=k, replace=False))
    entries = []
    for ch in channels:
        form = 1 if rng.random() < 0.5 else 2
        u1 = rng.uniform(0.2, 0.4)
        u2 = rng.uniform(1.0, 2.0)
        u3 = rng.uniform(np.pi / 2, np.pi)
        u4 = rng.uniform(np.pi, 2 * np.pi)
        entries.append((int(ch), form, float(u1), float(u2), float(u3), float(u4)))
    return RandomDisturbances(int(N), tuple(entries), seed, float(fraction_disturbed))


@dataclass(frozen=True, eq=False)
class MaskedSignal(Signal):
    """``base`` with the listed channels forced to zero."""

    base: Signal
    silenced: frozenset
    kind = "masked"

    @property
    def n_channels(self):
        return self.base.n_channels

    def sample(self, times):
        out = self.base.sample(times)
        out[:, sorted(self.silenced)] = 0.0
        return out

    @property
    def support(self):
        return frozenset(self.base.support) - frozenset(self.silenced)

    def to_dict(self):
        return {"type": self.kind, "base": self.base.to_dict(), "silenced": sorted(self.silenced)}


def signal_from_dict(d):
    kind = d["type"]
    if kind == "zero":
        return ZeroSignal(int(d["n_channels"]))
    if kind == "sinusoid_bank":
        fr = d.get("freq_range")
        return SinusoidBank(float(d["amplitude"]), tuple(float(w) for w in d["omegas"]), d.get("seed"),
                            None if fr is None else tuple(fr))
    if kind == "random_steps":
        lr = d.get("level_range")
        return StepSignal(float(d["t_start"]), float(d["interval_length"]),
                          tuple(tuple(float(v) for v in r) for r in d["levels"]), d.get("seed"),
                          None if lr is None else tuple(lr))
    if kind == "heaviside":
        return heaviside(d["n_channels"], {int(k): tuple(v) for k, v in d["active"].items()})
    if kind == "lv_pseudo_sinusoids":
        return lv_pseudo_sinusoids(d.get("n_channels", 8), d.get("channels", (2, 4)))
    if kind == "composed_sigmoid":
        return composed_sigmoid_disturbance(d.get("n_channels", 4), d.get("channel", 0))
    if kind == "masked":
        return MaskedSignal(signal_from_dict(d["base"]), frozenset(d["silenced"]))
    if kind == "random_disturbances":
        return RandomDisturbances(int(d["n_channels"]), tuple(tuple(e) for e in d["entries"]),
                                  d.get("seed"), d.get("fraction"))
    raise ValueError(f"unknown signal type {kind!r}")
