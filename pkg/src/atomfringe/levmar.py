"""Damped least-squares (Levenberg-Marquardt) minimizer with analytic Jacobians.

Small, deterministic implementation tailored to the fringe fit models: dense
Jacobians with a handful of parameters, convergence decided on the relative
change of the residual sum of squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LMResult", "levenberg_marquardt"]

MAX_ITERATIONS = 200
RSS_RTOL = 1e-10


@dataclass
class LMResult:
    params: np.ndarray
    covariance: np.ndarray | None
    rss: float
    iterations: int
    converged: bool
    message: str


def levenberg_marquardt(
    residuals,
    jacobian,
    p0,
    max_iterations: int = MAX_ITERATIONS,
    rss_rtol: float = RSS_RTOL,
    lam0: float = 1e-3,
    rss_floor: float = 0.0,
) -> LMResult:
    """Minimize ``sum(residuals(p)**2)`` starting from ``p0``.

    ``residuals(p)`` returns the residual vector, ``jacobian(p)`` its m x n
    derivative matrix.  The step solves the damped normal equations with
    Marquardt scaling (damping proportional to the diagonal of J^T J), which
    makes the iteration insensitive to the wildly different magnitudes of the
    fit parameters.  Convergence is declared when an accepted step changes the
    residual sum of squares by less than ``rss_rtol`` relatively, or when the
    sum drops below ``rss_floor`` (for noise-free data the residuals bottom
    out at rounding level, where relative progress never settles).
    """
    p = np.asarray(p0, dtype=float).copy()
    if p.ndim != 1:
        raise ValueError("p0 must be a one-dimensional parameter vector")

    r = np.asarray(residuals(p), dtype=float)
    rss = float(r @ r)
    lam = lam0
    converged = False
    message = "maximum iterations reached"
    iterations = 0

    if rss <= rss_floor:
        converged = True
        message = "residuals at the floor"
        max_iterations = 0

    for iterations in range(1, max_iterations + 1):
        jac = np.asarray(jacobian(p), dtype=float)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        # guard parameters the model is momentarily insensitive to
        diag[diag <= 0.0] = np.max(diag) if np.max(diag) > 0 else 1.0

        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            p_new = p + step
            r_new = np.asarray(residuals(p_new), dtype=float)
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new <= rss:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # damping exhausted: the current point is a numerical minimum
            converged = True
            message = "no further decrease possible"
            break

        drop = rss - rss_new
        p, r, rss = p_new, r_new, rss_new
        lam = max(lam / 3.0, 1e-14)
        if rss <= rss_floor:
            converged = True
            message = "residuals at the floor"
            break
        if drop <= rss_rtol * max(rss, np.finfo(float).tiny):
            converged = True
            message = "relative residual change below tolerance"
            break

    cov = _covariance(jacobian, p, rss, r.size)
    return LMResult(
        params=p,
        covariance=cov,
        rss=rss,
        iterations=iterations,
        converged=converged,
        message=message,
    )


def _covariance(jacobian, p, rss, n_points):
    """Parameter covariance (J^T J)^-1 scaled by the residual variance."""
    try:
        jac = np.asarray(jacobian(p), dtype=float)
        jtj_inv = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return None
    dof = n_points - p.size
    scale = rss / dof if dof > 0 else 0.0
    return jtj_inv * scale
