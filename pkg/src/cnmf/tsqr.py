"""Tall-and-skinny QR over row blocks, and its fusion with compression.

The factorization runs in two passes: per-block QRs whose Q factors go to
scratch storage and whose R factors are stacked for one centralized QR,
then per-block products assemble the final Q. With one level of
R-reduction the only in-core object is the stacked R. All QRs use the
nonnegative-diagonal sign convention, so the R factor equals the one an
in-core QR of the full matrix would produce.

The fused entry point feeds sketch blocks to the factorization as they
are computed, so the sketch itself is never materialized.
"""

from dataclasses import dataclass

import numpy as np

from .compress import CompressionBasis, canonical_qr, draw_test_matrix
from .errors import ArgumentError, BudgetError, NumericError
from .store import (
    InCoreStore,
    MatrixStore,
    _rhs_chunk_product,
    as_store,
    matmul_blocked,
    matmul_transposed_blocked,
    memory_budget_bytes,
    store_from_blocks,
)


@dataclass
class TsqrResult:
    """Orthonormal Q (possibly file-backed) and square upper-triangular R."""

    Q: MatrixStore
    R: np.ndarray


class _SketchStore(MatrixStore):
    """Lazy row blocks of ``base @ rhs``; nothing is stored."""

    def __init__(self, base, rhs, pass_name):
        self._base = base
        self._rhs = rhs
        self._pass_name = pass_name
        self.rows = base.rows
        self.cols = rhs.cols if isinstance(rhs, MatrixStore) else rhs.shape[1]
        self.block_rows = base.block_rows

    @property
    def is_file_backed(self):
        return self._base.is_file_backed

    def block(self, i):
        blk = _rhs_chunk_product(self._base.block(i), self._rhs)
        if not np.isfinite(blk).all():
            raise NumericError(f"non-finite values in {self._pass_name}, block {i}")
        return blk

    def to_dense(self):
        return np.vstack(list(self.iter_blocks())) if self.rows else np.empty((0, self.cols))


def tsqr(a, scratch_dir=None):
    """QR of a tall blocked matrix within the memory budget.

    Parameters
    ----------
    a : MatrixStore or ndarray, shape (m, n)
        Each block must be at least as tall as it is wide, i.e.
        ``n <= block_rows``.
    scratch_dir : str, optional
        Directory for the pass-1 Q scratch file (removed on success).

    Returns
    -------
    TsqrResult
        ``Q`` (m, n) with orthonormal columns, file-backed iff it exceeds
        the memory budget; ``R`` (n, n) upper triangular with nonnegative
        diagonal. ``Q @ R`` reconstructs the input.
    """
    a = as_store(a)
    m, n = a.rows, a.cols
    if n > a.block_rows:
        raise ArgumentError(
            f"blocks of {a.block_rows} rows are narrower than the {n} columns; "
            "increase block_rows so each block is tall or square"
        )
    nblocks = a.n_blocks()
    stack_bytes = nblocks * n * n * 8
    if stack_bytes > memory_budget_bytes():
        raise BudgetError(
            f"stacked R needs {stack_bytes} bytes which exceeds the memory budget; "
            "use larger blocks"
        )

    r_parts = []

    def first_pass():
        for i in range(nblocks):
            q1, r1 = canonical_qr(a.block(i))
            r_parts.append(r1)
            yield q1

    # Pass-1 Q blocks have min(block_rows_i, n) columns; the last block may
    # be short, so they are staged per block rather than as one matrix.
    if nblocks == 0:
        raise ArgumentError("cannot factorize an empty matrix")
    q1_stores = []
    widths = []
    for q1 in first_pass():
        widths.append(q1.shape[1])
        q1_stores.append(
            store_from_blocks(iter((q1,)), q1.shape[0], q1.shape[1], scratch_dir=scratch_dir)
            if a.is_file_backed
            else InCoreStore(q1)
        )

    q2, r = canonical_qr(np.vstack(r_parts))
    r = np.triu(r)
    offsets = np.concatenate(([0], np.cumsum(widths)))

    def second_pass():
        for i in range(nblocks):
            yield q1_stores[i].to_dense() @ q2[offsets[i]:offsets[i + 1]]

    if m * n * 8 <= memory_budget_bytes():
        q_store = InCoreStore(np.vstack(list(second_pass())), a.block_rows)
    else:
        q_store = store_from_blocks(second_pass(), m, n, a.block_rows, scratch_dir)
    for st in q1_stores:
        if hasattr(st, "_finalizer"):
            st._finalizer()
    return TsqrResult(Q=q_store, R=r)


def tsqr_compress(a, cfg, reorthogonalize=False, scratch_dir=None):
    """Out-of-core range finder: compression fused with the blocked QR.

    For ``w = 0`` each sketch block is computed on the fly from the
    corresponding data block and the seeded test matrix, so the sketch
    never exists as a whole. For ``w > 0`` the ``2w + 1`` alternating
    passes materialize only the current skinny intermediate (file-backed
    when over budget) before the final blocked QR.

    The result matches the in-core structured compression for the same
    seed and block order.
    """
    a = as_store(a)
    from .compress import _require_feasible  # shared precondition

    _require_feasible(cfg, a.rows, a.cols)
    omega = draw_test_matrix(cfg, a.cols)
    s = cfg.basis_cols
    if omega.nbytes > memory_budget_bytes():
        omega = store_from_blocks(iter((omega,)), a.cols, s, scratch_dir=scratch_dir)

    if cfg.w == 0:
        sketch = _SketchStore(a, omega, "pass 0 (sketch)")
        q_store = tsqr(sketch, scratch_dir=scratch_dir).Q
    else:
        b = matmul_blocked(a, omega, scratch_dir=scratch_dir)
        _check_finite(b, "pass 0 (sketch)")
        for t in range(cfg.w):
            if reorthogonalize:
                b = _ortho(b, scratch_dir)
            c = matmul_transposed_blocked(a, b, scratch_dir=scratch_dir)
            _check_finite(c, f"pass {2 * t + 1} (transpose application)")
            if reorthogonalize:
                c = _ortho(c, scratch_dir)
            b = matmul_blocked(a, c, scratch_dir=scratch_dir)
            _check_finite(b, f"pass {2 * t + 2} (forward application)")
        q_store = tsqr(as_store(b, a.block_rows), scratch_dir=scratch_dir).Q

    q = q_store if q_store.is_file_backed else q_store.to_dense()
    return CompressionBasis(Q=q, kind="structured", config=cfg)


def _ortho(mat, scratch_dir):
    if isinstance(mat, MatrixStore):
        return tsqr(mat, scratch_dir=scratch_dir).Q
    return canonical_qr(mat)[0]


def _check_finite(mat, pass_name):
    if isinstance(mat, MatrixStore):
        for i in range(mat.n_blocks()):
            if not np.isfinite(mat.block(i)).all():
                raise NumericError(f"non-finite values in {pass_name}, block {i}")
    elif not np.isfinite(mat).all():
        raise NumericError(f"non-finite values in {pass_name}")
