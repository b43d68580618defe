"""Hot loops: Heun integration of the two network models and the reservoir drive.

Every kernel exists twice, a numba ``@njit`` version and a pure-numpy version
with the same signature. The module-level names without suffix point at the
numba version unless numba is disabled (see :mod:`rcdetect._accel`).

Integrators take the forcing pre-sampled at the step boundaries, ``F[k]`` being
the forcing at ``t0 + k*dt``; Heun only ever evaluates the forcing there.
They return ``(states, bad)`` where ``bad`` is the index of the first state that
came out non-finite, or -1.
"""

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# vector fields, numpy
# ---------------------------------------------------------------------------


def lv_field_np(x, g, e, inv_k, P):
    return x * (e - x * inv_k + P @ x) + g


def sigmoid_np(x, k_sig, sigma):
    x2 = x * x
    return k_sig * x2 / (sigma * sigma + x2)


def wc_field_np(x, g, wc):
    """WC derivative for interleaved ``x = [E1, I1, E2, I2, ...]``; ``g`` has one
    entry per pair (excitatory slot only)."""
    tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B = wc
    E = x[0::2]
    I = x[1::2]
    out = np.empty_like(x)
    drive_e = w_ee * E - w_ei * I + p_stim - w_net * (B @ I) + g
    out[0::2] = (-E + sigmoid_np(drive_e, k_sig, sigma)) / tau
    out[1::2] = (-I + sigmoid_np(w_ie * E - w_ii * I, k_sig, sigma)) / tau
    return out


def heun_lv_numpy(x0, F, dt, e, inv_k, P):
    n = F.shape[0] - 1
    out = np.empty((n + 1, x0.shape[0]))
    x = np.array(x0, dtype=float)
    out[0] = x
    for k in range(n):
        f0 = lv_field_np(x, F[k], e, inv_k, P)
        xp = x + dt * f0
        x = x + 0.5 * dt * (f0 + lv_field_np(xp, F[k + 1], e, inv_k, P))
        out[k + 1] = x
        if not np.all(np.isfinite(x)):
            return out, k + 1
    return out, -1


def heun_wc_numpy(x0, F, dt, tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B):
    wc = (tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B)
    n = F.shape[0] - 1
    out = np.empty((n + 1, x0.shape[0]))
    x = np.array(x0, dtype=float)
    out[0] = x
    for k in range(n):
        f0 = wc_field_np(x, F[k], wc)
        xp = x + dt * f0
        x = x + 0.5 * dt * (f0 + wc_field_np(xp, F[k + 1], wc))
        out[k + 1] = x
        if not np.all(np.isfinite(x)):
            return out, k + 1
    return out, -1


# ---------------------------------------------------------------------------
# vector fields, numba
# ---------------------------------------------------------------------------


@njit
def _lv_field_nb(x, g, e, inv_k, P, out):
    n = x.shape[0]
    for i in range(n):
        acc = e[i] - x[i] * inv_k[i]
        for j in range(n):
            acc += P[i, j] * x[j]
        out[i] = x[i] * acc + g[i]


@njit
def heun_lv_numba(x0, F, dt, e, inv_k, P):
    n_steps = F.shape[0] - 1
    n = x0.shape[0]
    out = np.empty((n_steps + 1, n))
    x = x0.astype(np.float64).copy()
    f0 = np.empty(n)
    f1 = np.empty(n)
    xp = np.empty(n)
    out[0] = x
    for k in range(n_steps):
        _lv_field_nb(x, F[k], e, inv_k, P, f0)
        for i in range(n):
            xp[i] = x[i] + dt * f0[i]
        _lv_field_nb(xp, F[k + 1], e, inv_k, P, f1)
        finite = True
        for i in range(n):
            x[i] = x[i] + 0.5 * dt * (f0[i] + f1[i])
            out[k + 1, i] = x[i]
            if not np.isfinite(x[i]):
                finite = False
        if not finite:
            return out, k + 1
    return out, -1


@njit
def _wc_field_nb(x, g, tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B, out):
    npair = p_stim.shape[0]
    s2 = sigma * sigma
    for i in range(npair):
        E = x[2 * i]
        I = x[2 * i + 1]
        net = 0.0
        for j in range(npair):
            net += B[i, j] * x[2 * j + 1]
        a = w_ee * E - w_ei * I + p_stim[i] - w_net * net + g[i]
        b = w_ie * E - w_ii * I
        out[2 * i] = (-E + k_sig * a * a / (s2 + a * a)) / tau
        out[2 * i + 1] = (-I + k_sig * b * b / (s2 + b * b)) / tau


@njit
def heun_wc_numba(x0, F, dt, tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B):
    n_steps = F.shape[0] - 1
    n = x0.shape[0]
    out = np.empty((n_steps + 1, n))
    x = x0.astype(np.float64).copy()
    f0 = np.empty(n)
    f1 = np.empty(n)
    xp = np.empty(n)
    out[0] = x
    for k in range(n_steps):
        _wc_field_nb(x, F[k], tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B, f0)
        for i in range(n):
            xp[i] = x[i] + dt * f0[i]
        _wc_field_nb(xp, F[k + 1], tau, w_ee, w_ei, w_ie, w_ii, w_net, k_sig, sigma, p_stim, B, f1)
        finite = True
        for i in range(n):
            x[i] = x[i] + 0.5 * dt * (f0[i] + f1[i])
            out[k + 1, i] = x[i]
            if not np.isfinite(x[i]):
                finite = False
        if not finite:
            return out, k + 1
    return out, -1


# ---------------------------------------------------------------------------
# reservoir drive
# ---------------------------------------------------------------------------
# ``buf`` arrives holding W_in @ X_k in row k and leaves holding r_k, where
# r_k = leak*r_{k-1} + (1-leak)*tanh(A r_{k-1} + W_in X_k + 1). Reusing the
# buffer keeps peak memory at one (steps, M) array.


@njit
def drive_inplace_numba(indptr, indices, data, buf, r0, leak):
    n_steps, m = buf.shape
    prev = r0.astype(np.float64).copy()
    cur = np.empty(m)
    keep = 1.0 - leak
    for k in range(n_steps):
        for i in range(m):
            s = buf[k, i] + 1.0
            for p in range(indptr[i], indptr[i + 1]):
                s += data[p] * prev[indices[p]]
            if leak == 0.0:
                cur[i] = np.tanh(s)
            else:
                cur[i] = leak * prev[i] + keep * np.tanh(s)
        for i in range(m):
            buf[k, i] = cur[i]
            prev[i] = cur[i]


def drive_inplace_numpy(indptr, indices, data, buf, r0, leak):
    m = buf.shape[1]
    A = sp.csr_matrix((data, indices, indptr), shape=(m, m))
    r = np.array(r0, dtype=float)
    for k in range(buf.shape[0]):
        act = np.tanh(A @ r + buf[k] + 1.0)
        r = act if leak == 0.0 else leak * r + (1.0 - leak) * act
        buf[k] = r


if USE_NUMBA:
    heun_lv = heun_lv_numba
    heun_wc = heun_wc_numba
    drive_inplace = drive_inplace_numba
else:
    heun_lv = heun_lv_numpy
    heun_wc = heun_wc_numpy
    drive_inplace = drive_inplace_numpy
