"""Forced network models and fixed-step Heun integration.

Two systems are provided, both written in the form

    dX/dt = F(X, G(t))

with a flat state ``X`` of length ``N*D`` and a flat forcing ``G`` of the same
length. ``G = 0`` gives the intrinsic (undisturbed) dynamics.

* :class:`LotkaVolterra` - generalized Lotka-Volterra food web, ``D = 1``,
  forcing enters additively.
* :class:`WilsonCowan` - ``n`` excitatory/inhibitory population pairs,
  ``D = 2``, state interleaved ``[E1, I1, E2, I2, ...]``, forcing enters inside
  the excitatory sigmoid and only in the E-slots.

Channels are 0-based throughout: the paper's species 3 and 5 are channels 2
and 4 here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class IntegrationDivergence(RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, step, t=None):
        self.step = step
        self.t = t
        msg = f"non-finite state at step {step}"
        if t is not None:
            msg += f" (t={t:g})"
        super().__init__(msg)


def sigmoid(x, K_sig=1.0, sigma=1.0):
    """Saturating response ``K x^2 / (sigma^2 + x^2)``; vectorized over ``x``."""
    if sigma == 0:
        raise ValueError("sigma must be non-zero")
    return kernels.sigmoid_np(np.asarray(x, dtype=float), K_sig, sigma)


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LotkaVolterraParams:
    """Growth rates ``e``, capacities ``K`` and interaction matrix ``P``."""

    e: np.ndarray
    K: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        K = np.asarray(self.K, dtype=float)
        P = np.asarray(self.P, dtype=float)
        n = e.shape[0]
        if e.ndim != 1 or K.shape != (n,) or P.shape != (n, n):
            raise ValueError(f"inconsistent LV shapes: e{e.shape} K{K.shape} P{P.shape}")
        if np.any(K == 0):
            raise ValueError("capacities K must be non-zero")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "P", P)

    @property
    def N(self):
        return self.e.shape[0]

    def to_dict(self):
        return {"e": self.e.tolist(), "K": self.K.tolist(), "P": self.P.tolist()}


@dataclass(frozen=True)
class WilsonCowanParams:
    p_stim: np.ndarray
    B: np.ndarray
    tau: float = 10.0
    w_ee: float = 6.4
    w_ei: float = 6.0
    w_ie: float = 4.8
    w_ii: float = 1.2
    w_net: float = 0.5
    K_sig: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.p_stim, dtype=float)
        B = np.asarray(self.B, dtype=float)
        n = p.shape[0]
        if p.ndim != 1 or B.shape != (n, n):
            raise ValueError(f"inconsistent WC shapes: p_stim{p.shape} B{B.shape}")
        if np.any(np.diag(B) != 0):
            raise ValueError("B must have a zero diagonal")
        if min(self.w_ee, self.w_ei, self.w_ie, self.w_ii) <= 0:
            raise ValueError("intra-pair couplings must be strictly positive")
        if self.sigma == 0 or self.tau <= 0:
            raise ValueError("need sigma != 0 and tau > 0")
        object.__setattr__(self, "p_stim", p)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.p_stim.shape[0]

    def kernel_args(self):
        return (float(self.tau), float(self.w_ee), float(self.w_ei), float(self.w_ie),
                float(self.w_ii), float(self.w_net), float(self.K_sig), float(self.sigma),
                self.p_stim, self.B)

    def to_dict(self):
        return {
            "p_stim": self.p_stim.tolist(), "B": self.B.tolist(), "tau": self.tau,
            "w_ee": self.w_ee, "w_ei": self.w_ei, "w_ie": self.w_ie, "w_ii": self.w_ii,
            "w_net": self.w_net, "K_sig": self.K_sig, "sigma": self.sigma,
        }


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class NetworkModel:
    """N nodes with D state variables each, flat state of length ``N*D``.

    Subclasses implement :meth:`vector_field` and may override
    :meth:`integrate` with a compiled kernel.
    """

    kind = "abstract"
    N: int
    D: int

    @property
    def size(self):
        return self.N * self.D

    @property
    def channel_map(self):
        """Flat state index driven by each forcing channel (one channel per node)."""
        return np.arange(self.N) * self.D

    def node_slots(self, i):
        """Flat state indices belonging to node ``i``."""
        return np.arange(i * self.D, (i + 1) * self.D)

    def adjacency(self):
        """Boolean N x N node coupling pattern (zero diagonal)."""
        raise NotImplementedError

    def neighborhood(self, i):
        """Node ``i`` plus every node coupled to it in either direction."""
        adj = self.adjacency()
        nodes = np.flatnonzero(adj[i] | adj[:, i])
        return np.unique(np.concatenate([[i], nodes]))

    def vector_field(self, t, X, G):
        raise NotImplementedError

    def check_forcing(self, G):
        pass

    def integrate(self, x0, F, dt):
        """Heun over the forcing grid ``F`` (shape ``(steps+1, size)``)."""
        n = F.shape[0] - 1
        out = np.empty((n + 1, self.size))
        x = np.array(x0, dtype=float)
        out[0] = x
        for k in range(n):
            x = heun_step(self, k * dt, x, F[k], F[k + 1], dt)
            out[k + 1] = x
        return out

    def to_dict(self):
        raise NotImplementedError


class LotkaVolterra(NetworkModel):
    kind = "lotka_volterra"
    D = 1

    def __init__(self, params: LotkaVolterraParams):
        self.params = params
        self.N = params.N
        self._inv_k = 1.0 / params.K

    def adjacency(self):
        P = self.params.P
        adj = (P != 0) | (P.T != 0)
        np.fill_diagonal(adj, False)
        return adj

    def _check(self, X, G):
        X = np.asarray(X, dtype=float)
        G = np.asarray(G, dtype=float)
        if X.shape != (self.N,) or G.shape != (self.N,):
            raise ValueError(f"expected X and G of length {self.N}, got {X.shape} and {G.shape}")
        return X, G

    def vector_field(self, t, X, G):
        X, G = self._check(X, G)
        p = self.params
        return kernels.lv_field_np(X, G, p.e, self._inv_k, p.P)

    def integrate(self, x0, F, dt):
        p = self.params
        out, bad = kernels.heun_lv(np.asarray(x0, dtype=float), np.ascontiguousarray(F, dtype=float),
                                   float(dt), p.e, self._inv_k, p.P)
        if bad >= 0:
            raise IntegrationDivergence(bad)
        return out

    def jacobian(self, X):
        """Analytic Jacobian of the intrinsic field at ``X``."""
        p = self.params
        X = np.asarray(X, dtype=float)
        bracket = p.e - X * self._inv_k + p.P @ X
        J = X[:, None] * p.P
        J[np.diag_indices(self.N)] += bracket - X * self._inv_k
        return J

    def to_dict(self):
        return {"type": self.kind, "params": self.params.to_dict()}


class WilsonCowan(NetworkModel):
    kind = "wilson_cowan"
    D = 2

    def __init__(self, params: WilsonCowanParams):
        self.params = params
        self.N = params.n

    def adjacency(self):
        B = self.params.B != 0
        adj = B | B.T
        np.fill_diagonal(adj, False)
        return adj

    def check_forcing(self, G):
        G = np.asarray(G)
        if np.any(G[..., 1::2] != 0):
            raise ValueError("Wilson-Cowan forcing must vanish on inhibitory slots")

    def vector_field(self, t, X, G):
        X = np.asarray(X, dtype=float)
        G = np.asarray(G, dtype=float)
        if X.shape != (self.size,) or G.shape != (self.size,):
            raise ValueError(f"expected X and G of length {self.size}, got {X.shape} and {G.shape}")
        self.check_forcing(G)
        return kernels.wc_field_np(X, G[0::2], self.params.kernel_args())

    def integrate(self, x0, F, dt):
        F = np.asarray(F, dtype=float)
        self.check_forcing(F)
        out, bad = kernels.heun_wc(np.asarray(x0, dtype=float), np.ascontiguousarray(F[:, 0::2]),
                                   float(dt), *self.params.kernel_args())
        if bad >= 0:
            raise IntegrationDivergence(bad)
        k = self.params.K_sig
        x0 = np.asarray(x0)
        if np.all((x0 >= 0) & (x0 <= k)) and (out.min() < -k or out.max() > 2 * k):
            raise RuntimeError("Wilson-Cowan trajectory left its invariant box [-K, 2K]")
        return out

    def to_dict(self):
        return {"type": self.kind, "params": self.params.to_dict()}


def model_from_dict(d):
    kind = d["type"]
    if kind == LotkaVolterra.kind:
        return LotkaVolterra(LotkaVolterraParams(**d["params"]))
    if kind == WilsonCowan.kind:
        return WilsonCowan(WilsonCowanParams(**d["params"]))
    raise ValueError(f"unknown model type {kind!r}")


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def heun_step(model, t, X, G_t, G_next, dt):
    """One explicit trapezoidal (Heun) step.

    The forcing is supplied at both ends of the step. Raises
    :class:`IntegrationDivergence` (step 1) if the result is non-finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f0 = model.vector_field(t, X, G_t)
    xp = X + dt * f0
    x1 = X + 0.5 * dt * (f0 + model.vector_field(t + dt, xp, G_next))
    if not np.all(np.isfinite(x1)):
        raise IntegrationDivergence(1, t + dt)
    return x1


@dataclass
class Trajectory:
    """Uniformly sampled states; row ``k`` is the state at ``t0 + k*dt``."""

    t0: float
    dt: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def __len__(self):
        return self.values.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def min_value(self):
        """Smallest state entry seen (negative biomass diagnostic for LV)."""
        return float(self.values.min())

    def to_csv(self, path):
        write_columns_csv(path, self.times, self.values,
                          [f"x_{i}" for i in range(self.values.shape[1])])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(float(t[0]), dt, data[:, 1:])


def write_columns_csv(path, t, columns, names):
    """Wide CSV with a leading ``t`` column, values as 17 significant digits."""
    columns = np.asarray(columns)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        for ti, row in zip(t, columns):
            w.writerow([f"{ti:.17g}", *(f"{v:.17g}" for v in row)])


def time_grid(t0, t1, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("need t1 > t0")
    n = int(round((t1 - t0) / dt))
    if abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError(f"dt={dt} does not divide the interval [{t0}, {t1}]")
    return t0 + dt * np.arange(n + 1)


def forcing_grid(model, forcing, times, channel_map=None):
    """Sample ``forcing`` at ``times`` and scatter its channels into flat state slots."""
    cmap = model.channel_map if channel_map is None else np.asarray(channel_map)
    F = np.zeros((len(times), model.size))
    if forcing is not None:
        if forcing.n_channels != len(cmap):
            raise ValueError(f"forcing has {forcing.n_channels} channels, model expects {len(cmap)}")
        F[:, cmap] = forcing.sample(times)
    model.check_forcing(F)
    return F


def simulate(model, forcing, x0, t0, t1, dt, channel_map=None):
    """Integrate ``model`` under ``forcing`` (a Signal, or None for zero) on [t0, t1]."""
    times = time_grid(t0, t1, dt)
    F = forcing_grid(model, forcing, times, channel_map)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.size,):
        raise ValueError(f"x0 must have length {model.size}")
    try:
        values = model.integrate(x0, F, dt)
    except IntegrationDivergence as exc:
        raise IntegrationDivergence(exc.step, t0 + exc.step * dt) from None
    return Trajectory(float(t0), float(dt), values)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

# Eight-species food web: species 0-1 top predators, 2-4 intermediate
# consumers, 5-7 basal prey. Each edge is (predator, prey, gain, loss):
# P[pred, prey] = +gain, P[prey, pred] = -loss. Growth rates are solved so the
# coexistence point is LV_FIG2_SCALE * LV_FIG2_EQUILIBRIUM; the weighted
# sign-antisymmetry of P plus self-limitation makes that point globally stable.
# The scale stretches states (x* and K up, P down) without changing the
# linearization, and keeps biomasses above ~1 under amplitude-0.8 forcing.
LV_FIG2_EDGES = (
    (0, 2, 0.6, 0.4), (0, 3, 0.5, 0.3), (1, 3, 0.5, 0.35), (1, 4, 0.6, 0.4),
    (2, 5, 0.7, 0.5), (2, 6, 0.4, 0.3), (3, 6, 0.5, 0.4), (4, 6, 0.4, 0.3), (4, 7, 0.7, 0.5),
)
LV_FIG2_EQUILIBRIUM = np.array([1.5, 1.6, 1.8, 1.7, 1.9, 2.2, 2.4, 2.1])
LV_FIG2_K = np.array([2.0, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0])
LV_FIG2_SCALE = 1.5

WC_STIM_STATIONARY = (3.22, 3.02, 3.18, 3.33)
WC_STIM_OSCILLATORY = (1.52, 1.61, 1.57, 1.64)


def lv_fig2_like(scale=LV_FIG2_SCALE):
    P = np.zeros((8, 8))
    for pred, prey, gain, loss in LV_FIG2_EDGES:
        P[pred, prey] = gain / scale
        P[prey, pred] = -loss / scale
    xstar = scale * LV_FIG2_EQUILIBRIUM
    K = scale * LV_FIG2_K
    e = xstar / K - P @ xstar
    return LotkaVolterraParams(e=e, K=K, P=P)


def lv_fig2_equilibrium(scale=LV_FIG2_SCALE):
    return scale * LV_FIG2_EQUILIBRIUM


def directed_ring(n):
    """Pair i receives inhibition from pair i+1 (mod n)."""
    B = np.zeros((n, n))
    B[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return B


def wc_preset(regime="stationary", B=None):
    stim = {"stationary": WC_STIM_STATIONARY, "oscillatory": WC_STIM_OSCILLATORY}
    if regime not in stim:
        raise ValueError(f"unknown Wilson-Cowan regime {regime!r}")
    p = np.array(stim[regime])
    return WilsonCowanParams(p_stim=p, B=directed_ring(len(p)) if B is None else B)


def random_initial_state(model, rng):
    """Uniform in [0.5, 1.5] per species (LV) or [0, 0.5] per component (WC)."""
    if isinstance(model, WilsonCowan):
        return rng.uniform(0.0, 0.5, model.size)
    return rng.uniform(0.5, 1.5, model.size)
