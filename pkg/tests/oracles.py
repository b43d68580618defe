"""Independent reference implementations used by the tests."""

import numpy as np


def ridge_by_gradient_descent(R, Y, lam, tol=1e-13, max_iter=200_000):
    """Minimize ||Y - R W^T||^2 + lam ||W||^2 by Nesterov-accelerated gradient descent.

    Shares no code with the Cholesky solver: only matrix products and a
    step size from the largest singular value of R.
    """
    L = 2 * (np.linalg.norm(R, 2) ** 2 + lam)
    W = np.zeros((Y.shape[1], R.shape[1]))
    V = W.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = 2 * ((V @ R.T - Y.T) @ R + lam * V)
        W_new = V - grad / L
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        V = W_new + ((t - 1) / t_new) * (W_new - W)
        if np.max(np.abs(W_new - W)) < tol:
            return W_new
        W, t = W_new, t_new
    return W


def naive_drive(A, W_in, X, leak=0.0, r0=None):
    """Straight transcription of the reservoir update with dense matrices."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    r = np.zeros(A.shape[0]) if r0 is None else np.array(r0, dtype=float)
    out = []
    for x in X:
        r = leak * r + (1 - leak) * np.tanh(A @ r + W_in @ x + 1.0)
        out.append(r)
    return np.array(out)
