"""Nelder-Mead simplex minimization, vectorized over independent problems.

``nelder_mead_batch`` runs B independent simplex searches in lock-step.  Each
row follows the textbook algorithm (reflection 1, expansion 2, contraction
1/2, shrink 1/2) and its own termination test, so a row's trajectory does not
depend on what else is in the batch.  ``nelder_mead_minimize`` is the
single-problem front end used by the protocol optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    converged: bool
    nfev: int


@dataclass
class BatchResult:
    x: np.ndarray  # (B, k)
    fun: np.ndarray  # (B,)
    converged: np.ndarray  # (B,) bool
    nfev: np.ndarray  # (B,) int


def initial_simplex(x0: np.ndarray, step: float = 0.05) -> np.ndarray:
    """(B, k+1, k) simplex: x0 plus one vertex per coordinate scaled by (1 + step)."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    B, k = x0.shape
    sim = np.repeat(x0[:, None, :], k + 1, axis=1)
    for j in range(k):
        col = sim[:, j + 1, j]
        sim[:, j + 1, j] = np.where(col != 0.0, col * (1.0 + step), 0.00025)
    return sim


def nelder_mead_batch(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    maxfev: int | None = None,
    xatol: float = 1e-8,
    fatol: float = 1e-8,
    initial_step: float = 0.05,
    simplex: np.ndarray | None = None,
) -> BatchResult:
    """Minimize B independent objectives.

    ``fun(x, rows)`` receives points ``x`` of shape (m, k) and the batch row
    index of each point, and returns m objective values.  Non-finite values
    are treated as +inf.  A row stops when the simplex spread in both x
    (max-norm) and f is within tolerance, or when it reaches ``maxfev``
    evaluations (``converged`` False).  ``simplex`` (B, k+1, k) overrides the
    default starting simplex built around ``x0``.
    """
    if simplex is None:
        sim = initial_simplex(x0, initial_step)
    else:
        sim = np.array(simplex, dtype=float, copy=True)
    B, kp1, k = sim.shape
    if maxfev is None:
        maxfev = 200 * k
    rows_all = np.arange(B)

    def evaluate(x, rows):
        f = np.asarray(fun(x, rows), dtype=float)
        return np.where(np.isfinite(f), f, np.inf)

    fsim = evaluate(sim.reshape(B * kp1, k), np.repeat(rows_all, kp1)).reshape(B, kp1)
    nfev = np.full(B, kp1)
    active = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)

    while True:
        order = np.argsort(fsim, axis=1, kind="stable")
        sim = np.take_along_axis(sim, order[:, :, None], axis=1)
        fsim = np.take_along_axis(fsim, order, axis=1)

        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        s, f = sim[idx], fsim[idx]
        xspread = np.max(np.abs(s[:, 1:] - s[:, :1]), axis=(1, 2))
        with np.errstate(invalid="ignore"):
            fspread = np.max(np.abs(f[:, 1:] - f[:, :1]), axis=1)
        done = (xspread <= xatol) & (fspread <= fatol)
        converged[idx[done]] = True
        out_of_budget = ~done & (nfev[idx] >= maxfev)
        active[idx[done | out_of_budget]] = False
        keep = ~(done | out_of_budget)
        idx, s, f = idx[keep], s[keep], f[keep]
        if idx.size == 0:
            break

        xbar = s[:, :-1].mean(axis=1)
        xw = s[:, -1]
        fbest, fsecond, fworst = f[:, 0], f[:, -2], f[:, -1]

        xr = xbar + REFLECT * (xbar - xw)
        fr = evaluate(xr, idx)
        nfev[idx] += 1
        new_x, new_f = xr.copy(), fr.copy()
        shrink = np.zeros(idx.size, dtype=bool)

        exp = fr < fbest
        if exp.any():
            xe = xbar[exp] + EXPAND * (xr[exp] - xbar[exp])
            fe = evaluate(xe, idx[exp])
            nfev[idx[exp]] += 1
            better = fe < fr[exp]
            sel = np.flatnonzero(exp)[better]
            new_x[sel], new_f[sel] = xe[better], fe[better]

        outside = (fr >= fsecond) & (fr < fworst)
        inside = fr >= fworst
        con = outside | inside
        if con.any():
            target = np.where(outside[:, None], xr, xw)
            xc = xbar[con] + CONTRACT * (target[con] - xbar[con])
            fc = evaluate(xc, idx[con])
            nfev[idx[con]] += 1
            ok = np.where(outside[con], fc <= fr[con], fc < fworst[con])
            sel = np.flatnonzero(con)
            new_x[sel[ok]], new_f[sel[ok]] = xc[ok], fc[ok]
            shrink[sel[~ok]] = True

        replace = ~shrink
        ridx = idx[replace]
        sim[ridx, -1] = new_x[replace]
        fsim[ridx, -1] = new_f[replace]

        if shrink.any():
            sidx = idx[shrink]
            best = sim[sidx, :1]
            moved = best + SHRINK * (sim[sidx, 1:] - best)
            sim[sidx, 1:] = moved
            fm = evaluate(moved.reshape(-1, k), np.repeat(sidx, k))
            fsim[sidx, 1:] = fm.reshape(sidx.size, k)
            nfev[sidx] += k

    return BatchResult(x=sim[:, 0].copy(), fun=fsim[:, 0].copy(), converged=converged, nfev=nfev)


def nelder_mead_minimize(
    objective: Callable[[np.ndarray], float],
    x0,
    *,
    maxfev: int | None = None,
    xatol: float = 1e-8,
    fatol: float = 1e-8,
    initial_step: float = 0.05,
    simplex: np.ndarray | None = None,
) -> NelderMeadResult:
    """Local minimizer of a scalar function of k reals.

    Returns the best point found; ``converged`` is False when the evaluation
    budget ran out first.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.isfinite(objective(x0)):
        raise ValueError("objective is not finite at x0")

    def batch_fun(x, rows):
        return np.array([objective(xi) for xi in x])

    res = nelder_mead_batch(
        batch_fun,
        x0[None],
        maxfev=maxfev,
        xatol=xatol,
        fatol=fatol,
        initial_step=initial_step,
        simplex=None if simplex is None else np.asarray(simplex, dtype=float)[None],
    )
    return NelderMeadResult(
        x=res.x[0], fun=float(res.fun[0]), converged=bool(res.converged[0]), nfev=int(res.nfev[0])
    )
