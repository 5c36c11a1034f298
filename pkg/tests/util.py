"""Shared helpers and independent oracles for the test suite.

The oracles here deliberately avoid the library code paths they check:
spectra and tail energies come from numpy's full SVD, NNLS optima from
support enumeration, and the ADMM reference is a standalone dense
implementation.
"""

import itertools

import numpy as np

from cnmf import Rng


def matrix_with_spectrum(m, n, singular_values, seed):
    """Random matrix with exactly the prescribed singular values."""
    sv = np.asarray(singular_values, dtype=np.float64)
    rng = Rng(seed)
    u, _ = np.linalg.qr(rng.child("u").standard_normal((m, sv.size)))
    v, _ = np.linalg.qr(rng.child("v").standard_normal((n, sv.size)))
    return (u * sv) @ v.T


def svd_tail_energy(a, r):
    """(sum of squared singular values past r)^(1/2), via full SVD."""
    sv = np.linalg.svd(a, compute_uv=False)
    return float(np.sqrt(np.sum(sv[r:] ** 2)))


def svd_residual_norm(a, q, ord=2):
    """Exact norm of A - Q Q^T A through numpy, not the library."""
    resid = a - q @ (q.T @ a)
    if ord == 2:
        return float(np.linalg.svd(resid, compute_uv=False)[0])
    return float(np.linalg.norm(resid))


def nnls_bruteforce(c, d_col, feas_tol=1e-12):
    """Optimal NNLS objective by enumerating all 2^q supports."""
    q = c.shape[1]
    best = float(np.dot(d_col, d_col))  # empty support
    for size in range(1, q + 1):
        for sup in itertools.combinations(range(q), size):
            sub = c[:, sup]
            sol, *_ = np.linalg.lstsq(sub, d_col, rcond=None)
            if (sol < -feas_tol).any():
                continue
            resid = d_col - sub @ sol
            best = min(best, float(np.dot(resid, resid)))
    return best


def admm_reference(a, r, seed, iterations, penalty_u=1.0, penalty_v=1.0, step_scale=1.0):
    """Plain dense ADMM for NMF (no compression machinery at all).

    Returns the list of (x, y, u, v, dual_u, dual_v) tuples, one per
    iteration, using the same uniform initialization convention as the
    library drivers.
    """
    m, n = a.shape
    rng = Rng(seed)
    u = rng.child("init-left").uniform((m, r))
    v = rng.child("init-right").uniform((r, n))
    dual_u = np.zeros((m, r))
    dual_v = np.zeros((r, n))
    y = v.copy()
    eye = np.eye(r)
    states = []
    for _ in range(iterations):
        x = np.linalg.solve(y @ y.T + penalty_u * eye, (a @ y.T + penalty_u * u - dual_u).T).T
        y = np.linalg.solve(x.T @ x + penalty_v * eye, x.T @ a + penalty_v * v - dual_v)
        u = np.maximum(x + dual_u / penalty_u, 0.0)
        v = np.maximum(y + dual_v / penalty_v, 0.0)
        dual_u = dual_u + step_scale * penalty_u * (x - u)
        dual_v = dual_v + step_scale * penalty_v * (y - v)
        states.append((x.copy(), y.copy(), u.copy(), v.copy(), dual_u.copy(), dual_v.copy()))
    return states


def rank_factors(m, n, r, seed, nonneg=True):
    """Exact rank-r factors; uniform [0, 1] entries when nonneg."""
    rng = Rng(seed)
    if nonneg:
        return rng.child("x").uniform((m, r)), rng.child("y").uniform((r, n))
    return rng.child("x").standard_normal((m, r)), rng.child("y").standard_normal((r, n))
