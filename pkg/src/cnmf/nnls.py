"""Nonnegative least squares, the workhorse behind the alternating solvers.

Minimizes ``||D - C H||_F`` over ``H >= 0`` one column of D at a time
with an active-set method. The design matrix may have any sign (the
compressed subproblems are not nonnegative). All columns share one pair
of Gram products ``C^T C`` and ``C^T D``, advance through the active-set
rounds in lockstep, and have their passive-set systems solved as one
batched call per round, so the cost is dominated by the two Gram
products regardless of how many target columns there are.
"""

import numpy as np

from .errors import ArgumentError, ConvergenceError
from .store import ensure_dense

_RIDGE_SCALE = 1e-12
_ZERO_CLIP = 1e-14


def nnls_solve(c, d, tol=1e-10, max_exchanges=None):
    """Solve ``min ||d - c h||`` s.t. ``h >= 0`` for every column of d.

    Parameters
    ----------
    c : ndarray, shape (p, q)
        Design matrix, any sign.
    d : ndarray, shape (p, k) or (p,)
        Targets, any sign.
    tol : float
        KKT tolerance: at the solution the gradient ``g = c.T (c h - d)``
        of each column satisfies ``g_i >= -tol`` where ``h_i = 0`` and
        ``|g_i| <= tol`` where ``h_i > 0``.
    max_exchanges : int, optional
        Cap on passive-set exchanges per column (default ``3 q``).

    Returns
    -------
    ndarray, shape (q, k) (or (q,) for a vector target), entrywise >= 0.

    Raises
    ------
    ConvergenceError
        If some column exceeds the exchange cap; ``.best`` carries the
        best (feasible) iterate.

    Notes
    -----
    Singular passive-set systems fall back to a ridge of
    ``1e-12 * trace(C^T C)`` rather than failing; compressed designs can
    be nearly collinear.
    """
    c = ensure_dense(c, "design")
    vector_target = np.ndim(d) == 1
    d = ensure_dense(d.reshape(-1, 1) if vector_target else d, "targets")
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    if c.shape[0] != d.shape[0]:
        raise ArgumentError(f"design rows {c.shape[0]} != target rows {d.shape[0]}")
    q = c.shape[1]
    k = d.shape[1]
    cap = max_exchanges if max_exchanges is not None else 3 * q

    gram = c.T @ c
    target = c.T @ d
    ridge = _RIDGE_SCALE * float(np.trace(gram))

    h = np.zeros((q, k))
    passive = np.zeros((q, k), dtype=bool)
    grad_neg = target.copy()  # negative gradient: c.T d - gram @ h
    done = np.zeros(k, dtype=bool)
    exchanges = np.zeros(k, dtype=np.int64)

    while not done.all():
        masked = np.where(passive, -np.inf, grad_neg)
        masked[:, done] = -np.inf
        best = np.argmax(masked, axis=0)
        best_val = masked[best, np.arange(k)]
        done |= best_val <= tol
        grow = np.flatnonzero(~done & (best_val > tol))
        if grow.size == 0:
            break
        passive[best[grow], grow] = True
        exchanges[grow] += 1
        if np.any(exchanges[grow] > cap):
            raise ConvergenceError(
                f"active-set exchange cap {cap} exceeded", best=_final(h, vector_target)
            )

        pending = grow
        while pending.size:
            z = _solve_passive(gram, target, passive, pending, ridge)
            feasible = ((z > 0) | ~passive[:, pending]).all(axis=0)
            ok = pending[feasible]
            if ok.size:
                h[:, ok] = z[:, feasible]  # z is zero off the passive set
            bad = pending[~feasible]
            for idx, j in zip(np.flatnonzero(~feasible), bad):
                _step_back(h, passive, z[:, idx], j)
                exchanges[j] += 1
                if exchanges[j] > cap:
                    raise ConvergenceError(
                        f"active-set exchange cap {cap} exceeded",
                        best=_final(h, vector_target),
                    )
            pending = bad

        grad_neg = target - gram @ h

    np.maximum(h, 0.0, out=h)
    return _final(h, vector_target)


def _final(h, vector_target):
    out = np.maximum(h, 0.0)
    return out[:, 0] if vector_target else out


_BATCH_BYTES = 8 << 20


def _solve_passive(gram, target, passive, cols, ridge):
    """Solve every column's passive-set system in one batched call.

    Each column gets the q-by-q system equal to the Gram matrix on its
    passive coordinates and the identity elsewhere, so the off-support
    solution entries are exactly zero and LAPACK can sweep the whole
    batch at once.
    """
    q = gram.shape[0]
    z = np.zeros((q, cols.size))
    idx = np.arange(q)
    chunk = max(1, _BATCH_BYTES // (q * q * 8))
    for start in range(0, cols.size, chunk):
        part = cols[start:start + chunk]
        pas = passive[:, part].T  # (N, q)
        mats = gram[None, :, :] * (pas[:, :, None] & pas[:, None, :])
        mats[:, idx, idx] += ~pas
        rhs = np.where(pas, target[:, part].T, 0.0)[:, :, None]
        try:
            sol = np.linalg.solve(mats, rhs)
            if not np.isfinite(sol).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            mats[:, idx, idx] += ridge * pas
            sol = np.linalg.solve(mats, rhs)
        z[:, start:start + chunk] = sol[:, :, 0].T
    return z


def _step_back(h, passive, zj, j):
    """Move toward zj until a passive coordinate hits zero, then release it."""
    sup = passive[:, j]
    blocking = sup & (zj <= 0)
    hj = h[:, j]
    denom = hj[blocking] - zj[blocking]
    ratios = np.where(denom > 0, hj[blocking] / np.where(denom > 0, denom, 1.0), 0.0)
    alpha = float(ratios.min()) if ratios.size else 0.0
    h[:, j] = hj + alpha * (zj - hj)
    scale = max(float(np.max(np.abs(h[:, j]))), 1.0)
    release = blocking & (h[:, j] <= _ZERO_CLIP * scale)
    if not release.any():
        # numerical safety: force out the tightest blocker
        tight = np.flatnonzero(blocking)[int(np.argmin(ratios))]
        release = np.zeros_like(blocking)
        release[tight] = True
    h[release, j] = 0.0
    passive[release, j] = False
