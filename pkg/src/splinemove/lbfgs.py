"""Limited-memory BFGS with a strong-Wolfe line search.

The objective may return ``inf`` (or raise :class:`BarrierViolationError`) for
inadmissible points; the line search then treats the trial step as too long.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BarrierViolationError

CONVERGED = "converged"
STOPPED = "stopped"
MAXITER = "maxiter"
LINESEARCH_FAILED = "linesearch_failed"


@dataclass
class LBFGSResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    nit: int
    nfev: int
    status: str
    history: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status in (CONVERGED, STOPPED)

    @property
    def failed_linesearch(self) -> bool:
        return self.status == LINESEARCH_FAILED


def _safe(fun, x):
    try:
        f, g = fun(x)
    except BarrierViolationError:
        return np.inf, None
    if not np.isfinite(f):
        return np.inf, None
    return float(f), np.asarray(g, dtype=float)


F_SLACK = 1e-13


def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi):
    """Minimizer of the quadratic through (a_lo, f_lo, d_lo) and (a_hi, f_hi), safeguarded."""
    span = a_hi - a_lo
    if np.isfinite(f_hi):
        denom = 2.0 * (f_hi - f_lo - d_lo * span)
        if denom > 0:
            a = a_lo - d_lo * span * span / denom
            lo, hi = sorted((a_lo, a_hi))
            margin = 0.1 * (hi - lo)
            if lo + margin <= a <= hi - margin:
                return a
    return a_lo + 0.5 * span


def strong_wolfe(fun, x, f0, g0, d, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=40):
    """Step length satisfying the strong Wolfe conditions along ``d``.

    Returns ``(alpha, f, g, nfev, ok)``.  When no step satisfies the
    conditions ``ok`` is false and ``alpha`` / ``f`` / ``g`` describe the best
    point seen (``alpha`` is ``None`` if nothing improved on ``f0``).
    """
    dphi0 = float(g0 @ d)
    # relative slack so that steps lost in the round-off of f can still pass sufficient decrease
    slack = F_SLACK * abs(f0)
    best = (None, f0, None)
    nfev = 0
    a_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    a = alpha0
    a_max = 1e10

    def zoom(a_lo, f_lo, g_lo, dphi_lo, a_hi, f_hi):
        nonlocal nfev, best
        while nfev < max_evals:
            a_j = _interpolate(a_lo, f_lo, dphi_lo, a_hi, f_hi)
            f_j, g_j = _safe(fun, x + a_j * d)
            nfev += 1
            if f_j < best[1]:
                best = (a_j, f_j, g_j)
            if not np.isfinite(f_j) or f_j > f0 + c1 * a_j * dphi0 + slack or f_j >= f_lo + slack:
                a_hi, f_hi = a_j, f_j
            else:
                dphi_j = float(g_j @ d)
                if abs(dphi_j) <= -c2 * dphi0:
                    return a_j, f_j, g_j
                if dphi_j * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, g_lo, dphi_lo = a_j, f_j, g_j, dphi_j
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                break
        return None, None, None

    g_prev = g0
    for i in range(max_evals):
        f_a, g_a = _safe(fun, x + a * d)
        nfev += 1
        if f_a < best[1]:
            best = (a, f_a, g_a)
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * dphi0 + slack or (i > 0 and f_a >= f_prev + slack):
            res = zoom(a_prev, f_prev, g_prev, dphi_prev, a, f_a)
            if res[0] is not None:
                return res[0], res[1], res[2], nfev, True
            break
        dphi_a = float(g_a @ d)
        if abs(dphi_a) <= -c2 * dphi0:
            return a, f_a, g_a, nfev, True
        if dphi_a >= 0:
            res = zoom(a, f_a, g_a, dphi_a, a_prev, f_prev)
            if res[0] is not None:
                return res[0], res[1], res[2], nfev, True
            break
        a_prev, f_prev, g_prev, dphi_prev = a, f_a, g_a, dphi_a
        a = min(2.0 * a, a_max)
    a_b, f_b, g_b = best
    return a_b, f_b, g_b, nfev, False


def lbfgs_minimize(fun, x0, *, memory=10, gtol=1e-8, maxiter=200, c1=1e-4, c2=0.9,
                   stop=None, callback=None) -> LBFGSResult:
    """Minimize ``fun(x) -> (f, grad)`` starting from ``x0``.

    Terminates when ``||g||_inf <= gtol * (1 + |f|)``, after ``maxiter``
    iterations, or as soon as ``stop(x, f, g)`` returns true (checked at the
    start point too, so an already-acceptable ``x0`` costs no iteration).
    On line-search failure the best point found so far is returned with
    status ``linesearch_failed``.
    """
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("starting point must be finite")
    f, g = _safe(fun, x)
    if g is None:
        raise BarrierViolationError(np.nan)
    nfev = 1
    history = [(0, f, float(np.linalg.norm(g)))]
    S, Y, RHO = [], [], []

    def done(f, g):
        return float(np.abs(g).max(initial=0.0)) <= gtol * (1.0 + abs(f))

    if stop is not None and stop(x, f, g):
        return LBFGSResult(x, f, g, 0, nfev, STOPPED, history)
    if done(f, g):
        return LBFGSResult(x, f, g, 0, nfev, CONVERGED, history)

    status = MAXITER
    it = 0
    while it < maxiter:
        # two-loop recursion
        q = -g.copy()
        alphas = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if S:
            gamma = (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        else:
            gamma = 1.0 / max(np.linalg.norm(g), 1e-300)
        q *= gamma
        for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        d = q
        if g @ d >= 0:
            S.clear(), Y.clear(), RHO.clear()
            d = -g / max(np.linalg.norm(g), 1e-300)
        alpha, f_new, g_new, ne, ok = strong_wolfe(fun, x, f, g, d, 1.0, c1, c2)
        nfev += ne
        if not ok and S:
            # retry once along steepest descent with a fresh memory
            S.clear(), Y.clear(), RHO.clear()
            d = -g / max(np.linalg.norm(g), 1e-300)
            alpha, f_new, g_new, ne, ok = strong_wolfe(fun, x, f, g, d, 1.0, c1, c2)
            nfev += ne
        if not ok:
            status = LINESEARCH_FAILED
            if alpha is not None and f_new < f:
                x, f, g = x + alpha * d, f_new, g_new
                it += 1
                history.append((it, f, float(np.linalg.norm(g))))
            break
        step = alpha * d
        x_new = x + step
        y = g_new - g
        sy = float(step @ y)
        if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
            S.append(step)
            Y.append(y)
            RHO.append(1.0 / sy)
            if len(S) > memory:
                S.pop(0), Y.pop(0), RHO.pop(0)
        x, f, g = x_new, f_new, g_new
        it += 1
        history.append((it, f, float(np.linalg.norm(g))))
        if callback is not None:
            callback(it, x, f, g)
        if stop is not None and stop(x, f, g):
            status = STOPPED
            break
        if done(f, g):
            status = CONVERGED
            break
    return LBFGSResult(x, f, g, it, nfev, status, history)
