"""Bounded-variable least squares.

Solves ``min ||A x - b||_2`` subject to ``lower <= x <= upper`` with the
active-set method of Stark and Parker (Computational Statistics 10, 1995).
Free-set sub-problems are solved with a least-norm ``lstsq`` so rank
deficient designs are handled without special casing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FREE = "free"
AT_LOWER = "at_lower"
AT_UPPER = "at_upper"


@dataclass(frozen=True)
class BvlsSolution:
    """Result of :func:`bvls_solve`.

    ``gradient`` is the gradient of ``0.5 * ||A x - b||^2`` at ``weights`` and
    ``kkt_tol`` the absolute tolerance the optimality conditions were checked
    against.
    """

    weights: np.ndarray
    residual_norm: float
    status: tuple[str, ...]
    gradient: np.ndarray
    kkt_tol: float
    iterations: int

    @property
    def kkt_report(self) -> list[tuple[str, float]]:
        return [(s, float(g)) for s, g in zip(self.status, self.gradient)]

    def kkt_violations(self) -> np.ndarray:
        """Per-variable amount by which the KKT conditions are violated."""
        g = self.gradient
        viol = np.zeros_like(g)
        for k, s in enumerate(self.status):
            if s == FREE:
                viol[k] = abs(g[k])
            elif s == AT_LOWER:
                viol[k] = max(-g[k], 0.0)
            else:
                viol[k] = max(g[k], 0.0)
        return viol

    def kkt_satisfied(self) -> bool:
        return bool(np.all(self.kkt_violations() <= self.kkt_tol))


class BvlsConvergenceError(RuntimeError):
    """Iteration limit reached; ``best`` holds the last feasible iterate."""

    def __init__(self, message: str, best: BvlsSolution):
        super().__init__(message)
        self.best = best


def _as_bounds(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} bounds must be a scalar or length-{n} vector")
    return arr.copy()


def bvls_solve(design, target, lower=0.0, upper=1.0, kkt_tol: float = 1e-10,
               max_iters: int | None = None) -> BvlsSolution:
    """Bounded least squares ``min ||design @ x - target||``, ``lower <= x <= upper``.

    Parameters
    ----------
    design : array_like, shape (I, K)
        Rows are observations (pixels), columns are variables (bands).
    target : array_like, shape (I,)
    lower, upper : float or array_like, shape (K,)
    kkt_tol : float
        Optimality tolerance relative to ``||design.T @ target||_inf``.
    max_iters : int, optional
        Limit on outer (variable-release) iterations, default ``10 * K**2``.

    Returns
    -------
    BvlsSolution

    Raises
    ------
    BvlsConvergenceError
        If ``max_iters`` is exceeded; the exception carries the best iterate.
    """
    A = np.asarray(design, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64).reshape(-1)
    if A.ndim == 1:
        A = A[:, np.newaxis]
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise ValueError(f"design must be a non-empty 2-D matrix, got shape {A.shape}")
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"target has length {b.size}, design has {m} rows")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("design and target must be finite")
    lb = _as_bounds(lower, n, "lower")
    ub = _as_bounds(upper, n, "upper")
    if np.any(lb > ub):
        raise ValueError("lower bound exceeds upper bound")
    if not np.all(np.isfinite(lb)) or not np.all(np.isfinite(ub)):
        raise ValueError("bounds must be finite")
    if kkt_tol <= 0:
        raise ValueError("kkt_tol must be positive")
    if max_iters is None:
        max_iters = 10 * n * n

    scale = float(np.max(np.abs(A.T @ b)))
    tol = kkt_tol * (scale if scale > 0 else 1.0)

    fixed = lb == ub
    x = lb.copy()
    free = np.zeros(n, dtype=bool)
    at_upper = np.zeros(n, dtype=bool)
    ineligible = np.zeros(n, dtype=bool)
    iterations = 0

    while True:
        neg_grad = A.T @ (b - A @ x)
        viol = np.where(at_upper, -neg_grad, neg_grad)
        viol[free | fixed | ineligible] = -np.inf
        # argmax returns the lowest index among ties.
        t = int(np.argmax(viol))
        if not viol[t] > tol:
            break
        if iterations >= max_iters:
            raise BvlsConvergenceError(
                f"BVLS did not converge in {max_iters} iterations",
                _finish(A, b, x, lb, ub, free, fixed, tol, iterations))
        iterations += 1

        free[t] = True
        came_from_upper = bool(at_upper[t])
        at_upper[t] = False
        first = True
        while free.any():
            F = np.flatnonzero(free)
            bound_idx = np.flatnonzero(~free)
            rhs = b - A[:, bound_idx] @ x[bound_idx] if bound_idx.size else b
            z = np.linalg.lstsq(A[:, F], rhs, rcond=None)[0]

            if first:
                first = False
                zt = z[np.searchsorted(F, t)]
                wrong_way = zt > ub[t] if came_from_upper else zt < lb[t]
                if wrong_way:
                    # Round-off made the released variable point back out of
                    # the box; skip it until some other variable moves.
                    free[t] = False
                    at_upper[t] = came_from_upper
                    ineligible[t] = True
                    break

            low = z < lb[F]
            high = z > ub[F]
            if not (low.any() or high.any()):
                x[F] = z
                ineligible[:] = False
                break

            xf = x[F]
            out = low | high
            bound = np.where(low, lb[F], ub[F])
            with np.errstate(divide="ignore", invalid="ignore"):
                alphas = np.where(out, (bound - xf) / (z - xf), np.inf)
            alpha = float(np.clip(np.min(alphas), 0.0, 1.0))
            xf = xf + alpha * (z - xf)
            hit = out & (alphas <= alpha)
            # Snap anything that reached or crossed a bound.
            hit_low = (hit & low) | (xf <= lb[F])
            hit_high = (hit & high) | (xf >= ub[F])
            xf = np.where(hit_low, lb[F], np.where(hit_high, ub[F], xf))
            x[F] = xf
            leaving = hit_low | hit_high
            at_upper[F[hit_high & ~hit_low]] = True
            free[F[leaving]] = False
            ineligible[:] = False

    return _finish(A, b, x, lb, ub, free, fixed, tol, iterations)


def _finish(A, b, x, lb, ub, free, fixed, tol, iterations) -> BvlsSolution:
    x = np.clip(x, lb, ub)
    r = A @ x - b
    grad = A.T @ r
    status = []
    for k in range(x.size):
        if fixed[k]:
            status.append(AT_LOWER if grad[k] >= 0 else AT_UPPER)
        elif free[k]:
            status.append(FREE)
        elif x[k] == ub[k]:
            status.append(AT_UPPER)
        else:
            status.append(AT_LOWER)
    return BvlsSolution(
        weights=x,
        residual_norm=float(np.linalg.norm(r)),
        status=tuple(status),
        gradient=grad,
        kkt_tol=tol,
        iterations=iterations,
    )
