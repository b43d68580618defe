"""Random generalized Lotka-Volterra networks with a stable positive equilibrium.

Graph: a random Hamiltonian cycle (every node gets degree 2) plus ``N`` extra
edges drawn uniformly among the remaining non-adjacent pairs, so there are
exactly ``2N`` edges and the mean degree is 4.

Weights: ``|P_ij|`` is uniform on ``[2/N, 4/N]``. Entries above the diagonal are
positive; entries below it are positive or negative with probability 1/2.
Growth rates ``e_i ~ U[2, 4]`` and capacities ``K_i ~ U[1, 2]``.

The coexistence equilibrium solves ``(diag(1/K) - P) x* = e``. A draw is
accepted when every ``x*_i >= 1`` and the Jacobian at ``x*`` is Hurwitz;
otherwise the seed is advanced by one and the draw repeated. When a step size
``dt`` is given, the linearization must also be stable under Heun's method at
that step, which rejects stiff draws whose equilibrium is very large.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .models import LotkaVolterra, LotkaVolterraParams


class GenerationError(RuntimeError):
    pass


def random_graph(N, rng):
    """Undirected edge list ``(i, j)`` with ``i < j``: a Hamiltonian cycle plus N random chords."""
    if N < 5:
        raise ValueError("N must be at least 5")
    order = rng.permutation(N)
    edges = {tuple(sorted((int(order[k]), int(order[(k + 1) % N])))) for k in range(N)}
    free = [(i, j) for i in range(N) for j in range(i + 1, N) if (i, j) not in edges]
    pick = rng.choice(len(free), size=N, replace=False)
    edges.update(free[k] for k in pick)
    return sorted(edges)


def draw_parameters(N, rng):
    edges = random_graph(N, rng)
    P = np.zeros((N, N))
    lo, hi = 2.0 / N, 4.0 / N
    for i, j in edges:
        P[i, j] = rng.uniform(lo, hi)
        P[j, i] = rng.uniform(lo, hi) * (1.0 if rng.random() < 0.5 else -1.0)
    e = rng.uniform(2.0, 4.0, N)
    K = rng.uniform(1.0, 2.0, N)
    return LotkaVolterraParams(e, K, P)


def equilibrium(params):
    """Solve ``(diag(1/K) - P) x = e``."""
    Mx = np.diag(1.0 / params.K) - params.P
    return np.linalg.solve(Mx, params.e)


def fixed_point_residual(params, x):
    return float(np.max(np.abs((np.diag(1.0 / params.K) - params.P) @ x - params.e)))


def equilibrium_jacobian(params, x):
    """Jacobian at a coexistence equilibrium: ``diag(x) (P - diag(1/K))``."""
    return x[:, None] * (params.P - np.diag(1.0 / params.K))


def heun_amplification(ev, dt):
    """Per-step growth factor ``|1 + z + z^2/2|``, ``z = dt * eigenvalue``."""
    z = np.asarray(ev) * dt
    return np.abs(1 + z + 0.5 * z * z)


def stability_check(system):
    """``(stable, leading real part)`` of the Jacobian at ``system.x_star``."""
    try:
        ev = np.linalg.eigvals(equilibrium_jacobian(system.params, system.x_star))
    except np.linalg.LinAlgError as exc:
        raise GenerationError("eigensolver failed on the equilibrium Jacobian") from exc
    lead = float(np.max(ev.real))
    return lead < 0.0, lead


@dataclass
class GeneratedSystem:
    params: LotkaVolterraParams
    x_star: np.ndarray
    seed: int
    requested_seed: int
    attempts: int
    leading_eigenvalue: float

    @property
    def N(self):
        return self.params.N

    def model(self):
        return LotkaVolterra(self.params)

    def degrees(self):
        return self.model().adjacency().sum(axis=1)

    def to_dict(self):
        P = self.params.P
        rows, cols = np.nonzero(P)
        return {"N": self.N, "e": self.params.e.tolist(), "K": self.params.K.tolist(),
                "P": [[int(i), int(j), float(P[i, j])] for i, j in zip(rows, cols)],
                "x_star": self.x_star.tolist(), "seed": self.seed,
                "requested_seed": self.requested_seed, "attempts": self.attempts,
                "leading_eigenvalue": self.leading_eigenvalue}

    @classmethod
    def from_dict(cls, d):
        N = int(d["N"])
        P = np.zeros((N, N))
        for i, j, v in d["P"]:
            P[int(i), int(j)] = v
        params = LotkaVolterraParams(np.asarray(d["e"]), np.asarray(d["K"]), P)
        return cls(params, np.asarray(d["x_star"], dtype=float), int(d["seed"]),
                   int(d.get("requested_seed", d["seed"])), int(d.get("attempts", 1)),
                   float(d.get("leading_eigenvalue", np.nan)))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def generate(N, seed, max_attempts=1000, dt=None):
    """Draw systems with seeds ``seed, seed+1, ...`` until one is accepted."""
    if N < 5:
        raise ValueError("N must be at least 5")
    reasons = {"singular": 0, "x_star<1": 0, "unstable": 0, "stiff": 0}
    for attempt in range(max_attempts):
        s = int(seed) + attempt
        params = draw_parameters(N, np.random.default_rng(s))
        try:
            x = equilibrium(params)
        except np.linalg.LinAlgError:
            reasons["singular"] += 1
            continue
        if np.min(x) < 1.0:
            reasons["x_star<1"] += 1
            continue
        ev = np.linalg.eigvals(equilibrium_jacobian(params, x))
        lead = float(np.max(ev.real))
        if lead >= 0.0:
            reasons["unstable"] += 1
            continue
        if dt is not None and np.max(heun_amplification(ev, dt)) >= 1.0:
            reasons["stiff"] += 1
            continue
        return GeneratedSystem(params, x, s, int(seed), attempt + 1, lead)
    raise GenerationError(f"no acceptable N={N} system in {max_attempts} draws from seed {seed}; "
                          f"rejections: {reasons}")
