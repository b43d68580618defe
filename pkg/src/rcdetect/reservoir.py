"""Random sparse reservoir, (leaky) tanh drive and ridge-regression readout."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from . import kernels

log = logging.getLogger(__name__)


class SpectralRadiusError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# spectral radius
# ---------------------------------------------------------------------------


def _power_radius(A, tol=1e-8, maxiter=10_000, seed=0):
    """Power iteration that also resolves a dominant complex-conjugate pair.

    Three consecutive iterates of a vector dominated by a pair ``l, conj(l)``
    satisfy ``v2 = a v1 + b v0`` with ``z^2 - a z - b`` having roots
    ``l, conj(l)``; fitting ``a, b`` by least squares gives ``|l|`` for both the
    real and the complex case. Accuracy is limited by the modulus gap to the
    next eigenvalue, so prefer ``method="arnoldi"`` when the radius is rescaled
    to tight tolerances.
    """
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    prev = None
    for _ in range(maxiter):
        w1 = A @ v
        w2 = A @ w1
        n2 = np.linalg.norm(w2)
        if n2 == 0.0:
            return 0.0
        (a, b), *_ = np.linalg.lstsq(np.column_stack([w1, v]), w2, rcond=None)
        disc = a * a + 4 * b
        if disc < 0:
            est = np.sqrt(-b)
        else:
            est = 0.5 * max(abs(a + np.sqrt(disc)), abs(a - np.sqrt(disc)))
        if prev is not None and abs(est - prev) <= tol * est:
            return float(est)
        prev = est
        v = w2 / n2
    raise SpectralRadiusError(f"power iteration did not converge in {maxiter} iterations")


def spectral_radius(A, method="arnoldi", tol=1e-8, maxiter=10_000):
    """Largest eigenvalue modulus of a square (sparse or dense) matrix.

    ``method="arnoldi"`` uses implicitly restarted Arnoldi (ARPACK) for sparse
    matrices with more than 16 rows and a dense eigensolve otherwise;
    ``method="power"`` uses :func:`_power_radius`.
    """
    m = A.shape[0]
    if method == "power":
        return _power_radius(A, tol=tol, maxiter=maxiter)
    if method != "arnoldi":
        raise ValueError(f"unknown method {method!r}")
    if m <= 16 or not sp.issparse(A):
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.abs(np.linalg.eigvals(dense)).max())
    if A.nnz == 0:
        return 0.0
    k = min(6, m - 2)
    v0 = np.random.default_rng(0).standard_normal(m)
    try:
        vals = sla.eigs(A, k=k, which="LM", return_eigenvectors=False, tol=0, maxiter=maxiter, v0=v0)
    except sla.ArpackNoConvergence as exc:
        raise SpectralRadiusError("Arnoldi iteration did not converge") from exc
    return float(np.abs(vals).max())


# ---------------------------------------------------------------------------
# reservoir
# ---------------------------------------------------------------------------


@dataclass
class Reservoir:
    A: sp.csr_matrix
    W_in: np.ndarray
    leak: float = 0.0
    seed: object = None
    r: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.W_in = np.asarray(self.W_in, dtype=float)
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError("leak must lie in [0, 1]")
        if self.W_in.shape[0] != self.M or self.A.shape != (self.M, self.M):
            raise ValueError("A and W_in disagree on the reservoir size")
        if self.r is None:
            self.r = np.zeros(self.M)

    @property
    def M(self):
        return self.A.shape[0]

    @property
    def d_in(self):
        return self.W_in.shape[1]

    def reset(self):
        self.r = np.zeros(self.M)

    def arrays(self, prefix=""):
        A = self.A
        return {f"{prefix}A_data": A.data, f"{prefix}A_indices": A.indices,
                f"{prefix}A_indptr": A.indptr, f"{prefix}W_in": self.W_in}

    @classmethod
    def from_arrays(cls, arrays, prefix="", leak=0.0, seed=None, meta=None):
        W_in = arrays[f"{prefix}W_in"]
        m = W_in.shape[0]
        A = sp.csr_matrix((arrays[f"{prefix}A_data"], arrays[f"{prefix}A_indices"],
                           arrays[f"{prefix}A_indptr"]), shape=(m, m))
        return cls(A, W_in, leak=leak, seed=seed, meta=dict(meta or {}))


def _draw_sparse(m, density, rng):
    return sp.random(m, m, density=density, format="csr", random_state=rng,
                     data_rvs=lambda n: rng.uniform(-0.5, 0.5, n))


def build_reservoir(M, d_in, density=None, spectral_radius_target=1.2, input_scale=0.01,
                    leak=0.0, seed=None, radius_method="arnoldi", max_resample=10):
    """Random reservoir with ``A`` rescaled to the target spectral radius.

    ``density`` defaults to ``min(1, 6/M)``. Nonzero ``A`` entries are drawn
    from U[-0.5, 0.5] before rescaling and ``W_in`` entries from
    U[-input_scale, input_scale]. A draw whose radius is numerically zero is
    redrawn with the seed advanced by one.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if density is None:
        density = min(1.0, 6.0 / M)
    if density * M < 1 - 1e-12:
        raise ValueError("density*M must be at least 1")
    if spectral_radius_target <= 0:
        raise ValueError("spectral_radius_target must be positive")
    if not 0.0 <= leak <= 1.0:
        raise ValueError("leak must lie in [0, 1]")

    used_seed = seed
    for attempt in range(max_resample + 1):
        rng = np.random.default_rng(used_seed)
        A = _draw_sparse(M, density, rng)
        rho = spectral_radius(A, method=radius_method)
        if rho > 1e-12:
            break
        log.warning("reservoir draw with seed %s has zero spectral radius; resampling", used_seed)
        if used_seed is None:
            used_seed = attempt + 1
        elif isinstance(used_seed, (int, np.integer)):
            used_seed = int(used_seed) + 1
        else:
            used_seed = list(np.atleast_1d(used_seed)) + [attempt + 1]
    else:
        raise SpectralRadiusError(f"no usable reservoir draw after {max_resample} resamples")
    A = (A * (spectral_radius_target / rho)).tocsr()
    A.sort_indices()
    W_in = rng.uniform(-input_scale, input_scale, (M, d_in))
    meta = {"density": density, "spectral_radius": spectral_radius_target, "measured_radius": rho,
            "input_scale": input_scale, "seed_used": used_seed if not isinstance(used_seed, np.integer)
            else int(used_seed)}
    return Reservoir(A, W_in, leak=float(leak), seed=seed, meta=meta)


@dataclass
class StateHistory:
    """Reservoir states, one row per input step; row k was produced from input k.

    The first ``washout`` rows depend on the initial reservoir state and are
    excluded from regression and scoring.
    """

    states: np.ndarray
    washout: int = 0

    def __post_init__(self):
        self.washout = int(min(max(self.washout, 0), len(self.states)))

    def __len__(self):
        return self.states.shape[0]

    @property
    def retained(self):
        return self.states[self.washout:]

    @property
    def mask(self):
        m = np.ones(len(self), dtype=bool)
        m[:self.washout] = False
        return m


def default_washout(n_steps):
    """max(100 steps, 1% of the run)."""
    return max(100, int(np.ceil(0.01 * n_steps)))


def drive(reservoir, inputs, washout=None, reset=True):
    """Feed a series of input vectors (rows) through the reservoir.

    ``inputs`` may be an array or a :class:`~rcdetect.models.Trajectory`.
    With ``reset`` the state starts from zeros; otherwise from ``reservoir.r``.
    The reservoir's state is left at the last row.
    """
    X = getattr(inputs, "values", inputs)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != reservoir.d_in:
        raise ValueError(f"inputs must have {reservoir.d_in} columns, got shape {X.shape}")
    if washout is None:
        washout = default_washout(len(X))
    if reset:
        reservoir.reset()
    buf = np.matmul(X, reservoir.W_in.T)
    A = reservoir.A
    kernels.drive_inplace(A.indptr, A.indices, A.data, buf, reservoir.r, float(reservoir.leak))
    if len(buf):
        reservoir.r = buf[-1].copy()
    return StateHistory(buf, washout)


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------


@dataclass
class Readout:
    W_out: np.ndarray
    lam: float
    washout: int = 0

    @property
    def d_out(self):
        return self.W_out.shape[0]


def ridge_cost(W_out, R, Y, lam):
    """Squared fit error plus ``lam * ||W_out||_F^2``; rows of R and Y are time steps."""
    resid = Y - R @ W_out.T
    return float(np.sum(resid * resid) + lam * np.sum(W_out * W_out))


def solve_ridge(R, Y, lam):
    """``W_out`` minimizing :func:`ridge_cost`, via Cholesky of ``R^T R + lam I``."""
    R = np.asarray(R, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if R.shape[0] != Y.shape[0]:
        raise ValueError(f"states ({R.shape[0]} rows) and targets ({Y.shape[0]} rows) misaligned")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    gram = R.T @ R
    gram[np.diag_indices_from(gram)] += lam
    try:
        factor = la.cho_factor(gram, lower=False, check_finite=False)
    except la.LinAlgError as exc:
        hint = "; use lambda > 0" if lam == 0 else ""
        raise np.linalg.LinAlgError(f"state Gram matrix is numerically singular{hint}") from exc
    W = la.cho_solve(factor, R.T @ Y, check_finite=False).T
    if not np.all(np.isfinite(W)):
        raise np.linalg.LinAlgError("ridge solution is not finite")
    return W


def train_readout(states, targets, lam=1e-6):
    """Fit a readout on the retained rows of ``states`` against ``targets``.

    ``targets`` is aligned with the full state history (one row per input
    step); its washout rows are dropped together with the states'.
    """
    if isinstance(states, StateHistory):
        wo = states.washout
        R = states.retained
    else:
        wo = 0
        R = np.asarray(states)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] == R.shape[0] + wo:
        Y = Y[wo:]
    return Readout(solve_ridge(R, Y, lam), float(lam), wo)


def readout_apply(readout, states):
    """Outputs ``U = W_out r`` for every row of ``states``."""
    R = states.states if isinstance(states, StateHistory) else np.asarray(states)
    if R.shape[1] != readout.W_out.shape[1]:
        raise ValueError("state length does not match W_out")
    return R @ readout.W_out.T
