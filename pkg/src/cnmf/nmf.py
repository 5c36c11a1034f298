"""Classical NMF drivers: multiplicative updates, alternating NNLS, ADMM.

Each driver comes in uncompressed, Gaussian-compressed, and
structured-compressed variants. Compression computes a left basis L
(m x s, orthonormal columns in the structured case) and a right basis R
(s x n, orthonormal rows), then iterates entirely against the projected
matrices A R^T and L^T A, whose small side is s = r + r_ov instead of n
or m. The ADMM driver goes further and works against the doubly
projected s x s matrix.

The multiplicative update uses the positive/negative part splitting
everywhere, so the compressed (mixed-sign) and plain (nonnegative)
problems share one code path.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .compress import (
    CompressionConfig,
    adjust_config,
    gaussian_compress,
    structured_compress,
    structured_compress_rows,
)
from .errors import ArgumentError, ConvergenceError, DivergenceError, NumericError, UndefinedMetricError
from .nnls import nnls_solve
from .rng import Rng, child_seed
from .store import as_store, ensure_dense, matmul_blocked, matmul_transposed_blocked

_MU_EPS = 1e-16
_TINY = np.finfo(np.float64).tiny


@dataclass
class FactorPair:
    """Nonnegative factors plus run metadata.

    ``objective_trace`` records the (squared Frobenius) objective the
    driver actually iterates on: the compressed-space objective for
    compressed runs, the true objective otherwise. ``rel_error`` is the
    true relative reconstruction error, computed once at the end.
    """

    X: np.ndarray
    Y: np.ndarray
    iterations: int
    objective_trace: list = field(default_factory=list)
    rel_error: float | None = None


def relative_error(a, x, y):
    """``||A - X Y||_F / ||A||_F`` streamed over A's row blocks.

    Never materializes X Y when A is file-backed.
    """
    a = as_store(a)
    x = ensure_dense(x, "X")
    y = ensure_dense(y, "Y")
    if x.shape[0] != a.rows or y.shape[1] != a.cols or x.shape[1] != y.shape[0]:
        raise ArgumentError(
            f"shape mismatch: A {a.shape}, X {x.shape}, Y {y.shape}"
        )
    ref = 0.0
    res = 0.0
    for i in range(a.n_blocks()):
        start, stop = a.block_bounds(i)
        blk = a.block(i)
        diff = blk - x[start:stop] @ y
        ref += float(np.sum(blk * blk))
        res += float(np.sum(diff * diff))
    if ref == 0.0:
        raise UndefinedMetricError("relative error undefined: ||A||_F is zero")
    return float(np.sqrt(res / ref))


def _pos(m):
    return np.maximum(m, 0.0)


def _neg(m):
    return np.maximum(-m, 0.0)


def mu_step(a_eff, x, y, side, eps=_MU_EPS):
    """One multiplicative update of X (side="left") or Y (side="right").

    Safe for mixed-sign ``a_eff`` and mixed-sign fixed factor: products
    are split into positive and negative parts and recombined under a
    square root, which keeps the updated factor nonnegative and the
    objective nonincreasing. Zero entries stay zero.
    """
    for name, mat in (("a_eff", a_eff), ("x", x), ("y", y)):
        if not np.isfinite(mat).all():
            raise NumericError(f"non-finite values in {name}")
    if side == "left":
        return mu_step(a_eff.T, y.T, x.T, side="right", eps=eps).T
    if side != "right":
        raise ArgumentError(f"side must be 'left' or 'right', got {side!r}")
    cta = x.T @ a_eff
    ctc = x.T @ x
    num = _pos(cta) + _neg(ctc) @ y
    den = _neg(cta) + _pos(ctc) @ y
    return y * np.sqrt(num / (den + eps))


def _resolve_config(r, cfg, m, n, compression, default_w=4):
    if cfg is None:
        cfg = CompressionConfig(r=r, r_ov=10, w=default_w, seed=0)
    if cfg.r != r:
        raise ArgumentError(f"cfg.r = {cfg.r} disagrees with rank argument {r}")
    if compression == "none":
        if not 1 <= r <= min(m, n):
            raise ArgumentError(f"rank {r} out of range for {m}x{n}")
        return cfg
    return adjust_config(cfg, m, n)


def _compression_pair(a, compression, cfg, scratch_dir):
    """Left basis L (m x s) and right basis R (s x n); None means identity."""
    if compression == "none":
        return None, None
    s = cfg.basis_cols
    if compression == "structured":
        left = structured_compress(a, replace(cfg, seed=child_seed(cfg.seed, "left-basis")),
                                   scratch_dir=scratch_dir)
        right = structured_compress_rows(a, replace(cfg, seed=child_seed(cfg.seed, "right-basis")),
                                         scratch_dir=scratch_dir)
        return left.q_dense(), right.q_dense().T
    if compression == "gaussian":
        left = gaussian_compress(a.rows, s, child_seed(cfg.seed, "left-basis"))
        right = gaussian_compress(a.cols, s, child_seed(cfg.seed, "right-basis"))
        return left.q_dense(), right.q_dense().T
    raise ArgumentError(f"unknown compression {compression!r}")


def _projected_data(a, left, right, scratch_dir):
    """(A R^T, L^T A) as dense arrays; (A, A) when uncompressed."""
    if left is None:
        dense = a.to_dense()
        return dense, dense
    a_right = matmul_blocked(a, right.T, scratch_dir=scratch_dir)
    if not isinstance(a_right, np.ndarray):
        a_right = a_right.to_dense()
    a_left_t = matmul_transposed_blocked(a, left, scratch_dir=scratch_dir)
    if not isinstance(a_left_t, np.ndarray):
        a_left_t = a_left_t.to_dense()
    return a_right, a_left_t.T


def nmf_alternating(a, r, method="activeset", compression="structured", cfg=None,
                    max_iter=500, tol=1e-5, nnls_tol=1e-10, scratch_dir=None):
    """Alternating NMF: A ~ X Y with X, Y >= 0.

    Parameters
    ----------
    a : MatrixStore or ndarray
    r : int
        Target rank.
    method : {"mu", "activeset"}
        Descent step per half-iteration: a multiplicative update, or the
        exact nonnegative least squares minimizer.
    compression : {"none", "gaussian", "structured"}
    cfg : CompressionConfig, optional
        Width/power/seed of the compression; also seeds the factor
        initialization. Defaults to r_ov=10, w=4, seed=0, then the
        sizing rule is applied.
    max_iter : int
    tol : float
        Stop when the relative change of the iterated objective falls
        below this.

    Returns
    -------
    FactorPair
    """
    if method not in ("mu", "activeset"):
        raise ArgumentError(f"unknown method {method!r}")
    a = as_store(a)
    m, n = a.rows, a.cols
    cfg = _resolve_config(r, cfg, m, n, compression)
    left, right = _compression_pair(a, compression, cfg, scratch_dir)
    a_right, a_left = _projected_data(a, left, right, scratch_dir)

    rng = Rng(cfg.seed)
    x = rng.child("init-left").uniform((m, r))
    y = rng.child("init-right").uniform((r, n))

    trace = []
    prev = None
    floor = 0.0
    iterations = 0
    for k in range(max_iter):
        y_proj = y @ right.T if right is not None else y
        if method == "mu":
            x = mu_step(a_right, x, y_proj, side="left")
        else:
            x = _nnls_half(y_proj.T, a_right.T, nnls_tol, k).T
        x_proj = left.T @ x if left is not None else x
        if method == "mu":
            y = mu_step(a_left, x_proj, y, side="right")
        else:
            y = _nnls_half(x_proj, a_left, nnls_tol, k)
        iterations = k + 1
        obj = float(np.sum((a_left - x_proj @ y) ** 2))
        trace.append(obj)
        if k == 0:
            # objectives below 1e-12 of the initial one count as numerical zero
            floor = 1e-12 * obj
        if prev is not None and abs(prev - obj) <= tol * max(prev, floor, _TINY):
            break
        prev = obj

    return FactorPair(X=x, Y=y, iterations=iterations, objective_trace=trace,
                      rel_error=relative_error(a, x, y))


def _nnls_half(design, targets, tol, sweep):
    try:
        return nnls_solve(design, targets, tol=tol)
    except ConvergenceError as exc:
        raise ConvergenceError(f"NNLS failed in sweep {sweep}: {exc}", best=exc.best) from exc


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------


@dataclass
class AdmmState:
    """All ADMM iterates: compressed cores, nonnegative splits, duals."""

    xc: np.ndarray  # (s, r) compressed left core
    yc: np.ndarray  # (r, s) compressed right core
    u: np.ndarray   # (m, r) nonnegative left split
    v: np.ndarray   # (r, n) nonnegative right split
    dual_u: np.ndarray  # (m, r)
    dual_v: np.ndarray  # (r, n)
    penalty_u: float
    penalty_v: float
    step_scale: float


@dataclass
class KktResidual:
    """Frobenius norms of the six stationarity/feasibility/complementarity
    conditions; the max is the convergence score. The complementarity
    entries include the magnitude of any sign violations."""

    grad_left: float
    grad_right: float
    feas_left: float
    feas_right: float
    comp_left: float
    comp_right: float

    @property
    def max_residual(self):
        return max(self.grad_left, self.grad_right, self.feas_left,
                   self.feas_right, self.comp_left, self.comp_right)


def _lmul(left, m):
    return m if left is None else left @ m


def _ltmul(left, m):
    return m if left is None else left.T @ m


def _rmul(m, right):
    return m if right is None else m @ right


def _rtmul(m, right):
    return m if right is None else m @ right.T


def kkt_residual(state, a_comp, left, right):
    """Evaluate the six first-order conditions at an ADMM state.

    ``a_comp`` is the doubly projected data matrix; ``left`` / ``right``
    are the bases (None meaning identity).
    """
    e = state.xc @ state.yc - a_comp
    grad_left = float(np.linalg.norm(e @ state.yc.T + _ltmul(left, state.dual_u)))
    grad_right = float(np.linalg.norm(state.xc.T @ e + _rtmul(state.dual_v, right)))
    feas_left = float(np.linalg.norm(_lmul(left, state.xc) - state.u))
    feas_right = float(np.linalg.norm(_rmul(state.yc, right) - state.v))
    comp_left = float(np.sqrt(
        np.sum((state.dual_u * state.u) ** 2)
        + np.sum(_pos(state.dual_u) ** 2)
        + np.sum(_neg(state.u) ** 2)
    ))
    comp_right = float(np.sqrt(
        np.sum((state.dual_v * state.v) ** 2)
        + np.sum(_pos(state.dual_v) ** 2)
        + np.sum(_neg(state.v) ** 2)
    ))
    return KktResidual(grad_left, grad_right, feas_left, feas_right,
                       comp_left, comp_right)


def nmf_admm(a, r, compressed=True, cfg=None, penalty_u=1.0, penalty_v=1.0,
             step_scale=1.0, max_iter=500, tol=1e-4, scratch_dir=None,
             on_iteration=None):
    """NMF through ADMM on the splitting U = L Xc, V = Yc R, U, V >= 0.

    All four primal updates are closed-form: two ridge-regularized linear
    solves for the compressed cores and two projections for the splits,
    followed by the scaled dual ascent. Compressed runs iterate on the
    s x s projected matrix; the uncompressed variant is the same
    algorithm with identity bases.

    Stops when the max KKT residual drops below ``tol``; raises
    DivergenceError if the residual grows 10x over a 50-iteration window.
    ``on_iteration(k, state)`` is invoked with the AdmmState after each
    iteration, for monitoring.
    """
    if penalty_u <= 0 or penalty_v <= 0:
        raise ArgumentError("penalties must be positive")
    a = as_store(a)
    m, n = a.rows, a.cols
    cfg = _resolve_config(r, cfg, m, n, "structured" if compressed else "none")
    if compressed:
        left, right = _compression_pair(a, "structured", cfg, scratch_dir)
        a_left_t = matmul_transposed_blocked(a, left, scratch_dir=scratch_dir)
        if not isinstance(a_left_t, np.ndarray):
            a_left_t = a_left_t.to_dense()
        a_comp = a_left_t.T @ right.T  # L^T A R^T, the s x s core
    else:
        left = right = None
        a_comp = a.to_dense()

    rng = Rng(cfg.seed)
    u = rng.child("init-left").uniform((m, r))
    v = rng.child("init-right").uniform((r, n))
    dual_u = np.zeros((m, r))
    dual_v = np.zeros((r, n))
    yc = _rtmul(v, right)
    xc = np.zeros((a_comp.shape[0], r))
    eye = np.eye(r)

    trace = []
    scores = []
    iterations = 0
    for k in range(max_iter):
        rhs = a_comp @ yc.T + penalty_u * _ltmul(left, u) - _ltmul(left, dual_u)
        xc = np.linalg.solve(yc @ yc.T + penalty_u * eye, rhs.T).T
        yc = np.linalg.solve(xc.T @ xc + penalty_v * eye,
                             xc.T @ a_comp + penalty_v * _rtmul(v, right) - _rtmul(dual_v, right))
        u = _pos(_lmul(left, xc) + dual_u / penalty_u)
        v = _pos(_rmul(yc, right) + dual_v / penalty_v)
        dual_u = dual_u + step_scale * penalty_u * (_lmul(left, xc) - u)
        dual_v = dual_v + step_scale * penalty_v * (_rmul(yc, right) - v)
        iterations = k + 1

        trace.append(float(np.sum((a_comp - xc @ yc) ** 2)))
        state = AdmmState(xc, yc, u, v, dual_u, dual_v,
                          penalty_u, penalty_v, step_scale)
        if on_iteration is not None:
            on_iteration(k, state)
        score = kkt_residual(state, a_comp, left, right).max_residual
        scores.append(score)
        if score < tol:
            break
        if k >= 50 and score > 10.0 * scores[k - 50]:
            raise DivergenceError(
                f"KKT residual grew from {scores[k - 50]:.3e} to {score:.3e} "
                f"over 50 iterations",
                trace=scores,
            )

    return FactorPair(X=u, Y=v, iterations=iterations, objective_trace=trace,
                      rel_error=relative_error(a, u, v))
