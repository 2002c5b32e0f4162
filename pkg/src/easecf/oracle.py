"""Naive reference implementations used by the test suite.

These deliberately re-derive results through routes the solver does not
share: per-column ridge regression solved by hand-written Gaussian
elimination, and projected gradient descent on the training objective.
They are correctness oracles for small instances, not public API, and
trade speed for independence.
"""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError


def gaussian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a dense linear system by Gaussian elimination with partial pivoting.

    Independent of any LAPACK factorization on purpose.
    """
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError("need a square matrix and a matching vector")
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(a[k:, k])))
        if a[pivot_row, k] == 0.0:
            raise ZeroDivisionError(f"singular system at column {k}")
        if pivot_row != k:
            a[[k, pivot_row]] = a[[pivot_row, k]]
            b[[k, pivot_row]] = b[[pivot_row, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
        b[k + 1 :] -= factors * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def ridge_column(x: np.ndarray, j: int, lam: float) -> np.ndarray:
    """Ridge-regress item j's column on all other columns; weight j is zero.

    Solves (X_-j^T X_-j + lam I) w = X_-j^T X_j and reinserts a zero at
    position j. This is the decomposed-per-column view of the training
    objective and serves as the independent check on the closed form.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    n_items = x.shape[1]
    others = np.delete(np.arange(n_items), j)
    xm = x[:, others]
    a = xm.T @ xm + lam * np.eye(n_items - 1)
    b = xm.T @ x[:, j]
    w = gaussian_solve(a, b)
    out = np.zeros(n_items)
    out[others] = w
    return out


def objective(g: np.ndarray, lam: float, b: np.ndarray) -> float:
    """Training objective evaluated through the Gram matrix.

    ||X - XB||_F^2 + lam ||B||_F^2 = tr((I-B)^T G (I-B)) + lam ||B||_F^2.
    """
    m = np.eye(g.shape[0]) - b
    return float(np.sum(m * (g @ m)) + lam * np.sum(b * b))


def _power_iteration_max_eig(g: np.ndarray, iters: int = 100) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(g.shape[0])
    v /= np.linalg.norm(v)
    eig = 0.0
    for _ in range(iters):
        w = g @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        eig = float(v @ (g @ v))
    return eig


def gd_descent(
    g: np.ndarray,
    lam: float,
    steps: int,
    rate: float | None = None,
    init: np.ndarray | None = None,
    tol: float = 0.0,
) -> tuple[np.ndarray, list[float]]:
    """Projected gradient descent on the objective with diag(B) re-zeroed.

    The gradient is 2((G + lam I) B - G). Default step size is 0.9 / L
    with L = 2 (lambda_max(G) + lam), estimated by power iteration.
    Raises :class:`DivergenceError` after 10 consecutive objective
    increases. Returns the final iterate and the objective history
    (including the initial value). ``tol`` > 0 stops early when the
    relative objective change drops below it.
    """
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if rate is None:
        rate = 0.9 / (2.0 * (_power_iteration_max_eig(g) + lam))
    b = np.zeros((n, n)) if init is None else np.array(init, dtype=np.float64)
    np.fill_diagonal(b, 0.0)

    history = [objective(g, lam, b)]
    increases = 0
    for _ in range(steps):
        gradient = 2.0 * ((g @ b) + lam * b - g)
        b = b - rate * gradient
        np.fill_diagonal(b, 0.0)
        value = objective(g, lam, b)
        if value > history[-1]:
            increases += 1
            if increases >= 10:
                raise DivergenceError(
                    f"objective increased for {increases} consecutive steps "
                    f"(rate {rate:.3e} too large)"
                )
        else:
            increases = 0
        previous = history[-1]
        history.append(value)
        if tol > 0 and abs(previous - value) <= tol * max(abs(previous), 1.0):
            break
    return b, history
