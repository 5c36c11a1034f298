"""Randomized range finding and the Gaussian-projection baseline.

The structured path draws a Gaussian test matrix, applies optional power
passes through the data matrix, and orthonormalizes the result, producing
a basis Q with Q Q^T A close to A. The Gaussian baseline skips the data
and the orthonormalization entirely: it is just a rescaled random
projection.

Test matrices are drawn in fixed-size row chunks (independent of any
store's blocking), so the in-core and out-of-core code paths consume
identical random values for the same seed.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, InfeasibleRankError, NumericError
from .rng import Rng, gaussian_matrix
from .store import MatrixStore, as_store, ensure_dense, matmul_blocked, matmul_transposed_blocked

_OMEGA_CHUNK = 4096
_POWER_NORM_SEED = 0x5EC7AA1


@dataclass(frozen=True)
class CompressionConfig:
    """Target rank, oversampling, power passes, and the run seed.

    ``r + r_ov`` is the number of basis columns actually computed; call
    :func:`adjust_config` to apply the floor-at-20 / cap-at-dimensions
    sizing rule before compressing.
    """

    r: int
    r_ov: int = 10
    w: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ArgumentError(f"target rank must be >= 1, got {self.r}")
        if self.r_ov < 0:
            raise ArgumentError(f"oversampling must be >= 0, got {self.r_ov}")
        if self.w < 0:
            raise ArgumentError(f"power exponent must be >= 0, got {self.w}")

    @property
    def basis_cols(self):
        return self.r + self.r_ov


@dataclass
class CompressionBasis:
    """Basis produced by a compression run.

    ``Q`` has ``r + r_ov`` columns. For kind ``"structured"`` the columns
    are orthonormal; for kind ``"gaussian"`` Q is the rescaled random
    matrix itself (no orthonormality). Q may be a file-backed store when
    it exceeds the memory budget.
    """

    Q: object
    kind: str
    config: CompressionConfig

    @property
    def cols(self):
        return self.Q.cols if isinstance(self.Q, MatrixStore) else self.Q.shape[1]

    @property
    def rows(self):
        return self.Q.rows if isinstance(self.Q, MatrixStore) else self.Q.shape[0]

    def q_dense(self):
        """Materialize Q as an ndarray."""
        if isinstance(self.Q, MatrixStore):
            return self.Q.to_dense()
        return self.Q


@dataclass
class SpectrumReport:
    """Singular values of a (small) matrix plus the rank-r tail energy."""

    singular_values: np.ndarray
    rank: int
    tail_energy: float


def spectrum_report(a, rank):
    """Full SVD spectrum and tail energy (sum of squares past ``rank``)^(1/2)."""
    a = ensure_dense(a)
    sv = np.linalg.svd(a, compute_uv=False)
    if rank < 0 or rank > sv.size:
        raise ArgumentError(f"rank {rank} out of range for {sv.size} singular values")
    tail = float(np.sqrt(np.sum(sv[rank:] ** 2)))
    return SpectrumReport(singular_values=sv, rank=rank, tail_energy=tail)


def adjust_config(cfg, m, n):
    """Apply the basis-width sizing rule for an m-by-n matrix.

    The width becomes ``min(max(20, r + r_ov), n)``, further capped by
    ``min(m, n)`` so an orthonormal basis of that width exists.
    """
    if cfg.r >= min(m, n):
        raise InfeasibleRankError(
            f"rank {cfg.r} infeasible for a {m}x{n} matrix (need r < min(m, n))"
        )
    width = min(max(20, cfg.r + cfg.r_ov), n, m)
    return replace(cfg, r_ov=width - cfg.r)


def _drawn_in_chunks(rows, cols, rng):
    # Fixed 4096-row chunks with per-chunk child streams: the same values
    # come out whether the caller materializes all rows or a slice.
    parts = []
    for c, start in enumerate(range(0, rows, _OMEGA_CHUNK)):
        stop = min(start + _OMEGA_CHUNK, rows)
        parts.append(rng.child(f"chunk{c}").standard_normal((stop - start, cols)))
    return parts[0] if len(parts) == 1 else np.vstack(parts)


def draw_test_matrix(cfg, rows):
    """The seeded Gaussian test matrix for a given basis width."""
    return _drawn_in_chunks(rows, cfg.basis_cols, Rng(cfg.seed).child("omega"))


def _check_pass(mat, pass_name):
    arr = mat.to_dense() if isinstance(mat, MatrixStore) else mat
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values after {pass_name}")


def canonical_qr(b):
    """Reduced QR with the sign convention diag(R) >= 0.

    Fixing the signs makes Q and R unique (for full-rank input), so
    independently computed factorizations can be compared directly.
    """
    q, r = np.linalg.qr(b)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, signs[:, None] * r


def _require_feasible(cfg, m, n):
    s = cfg.basis_cols
    if s > min(m, n):
        raise InfeasibleRankError(
            f"basis width {s} exceeds min(m, n) = {min(m, n)}; adjust_config first"
        )


def structured_compress(a, cfg, reorthogonalize=False, scratch_dir=None):
    """Orthonormal basis for the dominant column space of ``a``.

    Forms the product of ``w`` power passes applied to the test-matrix
    sketch, then orthonormalizes with a (sign-canonical) QR. For a
    file-backed input the whole computation is delegated to the fused
    out-of-core path, which never materializes the sketch.

    Parameters
    ----------
    a : MatrixStore or ndarray, shape (m, n)
    cfg : CompressionConfig
        Must satisfy ``r + r_ov <= min(m, n)``.
    reorthogonalize : bool
        Re-orthonormalize after every multiplication pass. Off by
        default; powers square the condition number, so turn this on for
        ill-conditioned inputs with large ``w``.

    Returns
    -------
    CompressionBasis with kind ``"structured"``.
    """
    a = as_store(a)
    _require_feasible(cfg, a.rows, a.cols)
    if a.is_file_backed:
        from .tsqr import tsqr_compress

        return tsqr_compress(a, cfg, reorthogonalize=reorthogonalize, scratch_dir=scratch_dir)

    dense = a.to_dense()
    omega = draw_test_matrix(cfg, a.cols)
    b = dense @ omega
    _check_pass(b, "pass 0 (sketch)")
    for t in range(cfg.w):
        if reorthogonalize:
            b = canonical_qr(b)[0]
        c = dense.T @ b
        _check_pass(c, f"pass {2 * t + 1} (transpose application)")
        if reorthogonalize:
            c = canonical_qr(c)[0]
        b = dense @ c
        _check_pass(b, f"pass {2 * t + 2} (forward application)")
    q = canonical_qr(b)[0]
    return CompressionBasis(Q=q, kind="structured", config=cfg)


def structured_compress_rows(a, cfg, reorthogonalize=False, scratch_dir=None):
    """Orthonormal basis for the dominant row space of ``a``.

    Equivalent to compressing the transpose, but streamed over ``a``'s
    row blocks so a file-backed matrix never needs transposing on disk.
    Returns a basis whose Q has shape (n, r + r_ov).
    """
    a = as_store(a)
    _require_feasible(cfg, a.rows, a.cols)
    if not a.is_file_backed:
        return structured_compress(a.to_dense().T, cfg, reorthogonalize=reorthogonalize)

    omega = _drawn_in_chunks(a.rows, cfg.basis_cols, Rng(cfg.seed).child("omega"))
    t = matmul_transposed_blocked(a, omega, scratch_dir=scratch_dir)
    _check_pass(t, "pass 0 (sketch)")
    for i in range(cfg.w):
        if reorthogonalize:
            t = _orthonormalize(t, scratch_dir)
        s = matmul_blocked(a, t, scratch_dir=scratch_dir)
        _check_pass(s, f"pass {2 * i + 1} (forward application)")
        if reorthogonalize:
            s = _orthonormalize(s, scratch_dir)
        t = matmul_transposed_blocked(a, s, scratch_dir=scratch_dir)
        _check_pass(t, f"pass {2 * i + 2} (transpose application)")
    q = _orthonormalize(t, scratch_dir)
    return CompressionBasis(Q=q, kind="structured", config=cfg)


def _orthonormalize(mat, scratch_dir):
    if isinstance(mat, MatrixStore):
        from .tsqr import tsqr

        return tsqr(mat, scratch_dir=scratch_dir).Q
    return canonical_qr(mat)[0]


def gaussian_compress(m, s, seed):
    """Data-agnostic baseline: Q = s^(-1/2) * (m-by-s Gaussian matrix).

    Preserves l2 norms in expectation but guarantees no orthonormality.
    """
    if s < 1:
        raise ArgumentError(f"projection width must be >= 1, got {s}")
    omega = gaussian_matrix(m, s, Rng(seed).child("gaussian-projection"))
    cfg = CompressionConfig(r=s, r_ov=0, w=0, seed=seed)
    return CompressionBasis(Q=omega / np.sqrt(s), kind="gaussian", config=cfg)


def compression_error(a, basis, norm="frobenius"):
    """Residual ``||A - Q Q^T A||`` in the Frobenius or spectral norm.

    The spectral norm is estimated with power iteration on the residual
    (at most 100 steps, relative tolerance 1e-6).
    """
    a = ensure_dense(a)
    q = basis.q_dense()
    if q.shape[0] != a.shape[0]:
        raise ArgumentError(f"basis rows {q.shape[0]} != matrix rows {a.shape[0]}")
    resid = a - q @ (q.T @ a)
    if norm == "frobenius":
        return float(np.linalg.norm(resid))
    if norm == "spectral":
        return _power_spectral_norm(resid)
    raise ArgumentError(f"unknown norm {norm!r}")


def _power_spectral_norm(e, max_iter=100, tol=1e-6):
    n = e.shape[1]
    v = Rng(_POWER_NORM_SEED).standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = e @ v
        new_sigma = float(np.linalg.norm(u))
        if new_sigma == 0.0:
            return 0.0
        w = e.T @ (u / new_sigma)
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            return new_sigma
        v = w / wnorm
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma
        sigma = new_sigma
    return sigma
