"""Matrix storage and blocked access.

Dense matrices are plain 2-D float64 C-contiguous ndarrays. A
:class:`MatrixStore` presents a matrix as an ordered sequence of row
blocks, either over an in-core array or over a file in the package's
binary format, so the out-of-core algorithms can stream arbitrarily tall
matrices through a fixed memory budget.

Binary format: magic ``CNMF1``, rows (u64 LE), cols (u64 LE), then the
row-major float64 LE payload. The fixed-width header makes row-block
reads a single seek.

Stores are immutable after construction and safe for concurrent reads.
"""

import os
import struct
import tempfile
import weakref

import numpy as np

from .errors import ArgumentError, ParseError

MAGIC = b"CNMF1"
HEADER_BYTES = len(MAGIC) + 16
_BLOCK_BYTES_TARGET = 64 << 20  # one block <= 64 MiB unless overridden
_DEFAULT_BUDGET_MB = 1024


def memory_budget_bytes():
    """In-core ceiling in bytes. Overridden by env var CNMF_MEM_BUDGET_MB."""
    raw = os.environ.get("CNMF_MEM_BUDGET_MB", "")
    if not raw:
        return _DEFAULT_BUDGET_MB << 20
    try:
        budget = int(raw)
    except ValueError:
        raise ArgumentError(f"CNMF_MEM_BUDGET_MB must be an integer, got {raw!r}")
    if budget <= 0:
        raise ArgumentError("CNMF_MEM_BUDGET_MB must be positive")
    return budget << 20


def default_block_rows(cols):
    """Rows per block so that one block stays under the 64 MiB target."""
    return max(1, _BLOCK_BYTES_TARGET // (max(int(cols), 1) * 8))


def ensure_dense(a, name="matrix"):
    """Validate/convert to a 2-D float64 C-contiguous array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


class MatrixStore:
    """Read-only matrix exposed as consecutive row blocks.

    Attributes
    ----------
    rows, cols : int
    block_rows : int
        Rows per block; the last block may be short. Iterating all blocks
        in order yields exactly ``rows`` rows, deterministically.
    """

    rows = 0
    cols = 0
    block_rows = 0

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def is_file_backed(self):
        raise NotImplementedError

    def n_blocks(self):
        return (self.rows + self.block_rows - 1) // self.block_rows if self.rows else 0

    def block_bounds(self, i):
        start = i * self.block_rows
        if not 0 <= start < self.rows:
            raise ArgumentError(f"block index {i} out of range")
        return start, min(start + self.block_rows, self.rows)

    def block(self, i):
        raise NotImplementedError

    def iter_blocks(self):
        for i in range(self.n_blocks()):
            yield self.block(i)

    def to_dense(self):
        """Materialize the full matrix (regardless of the memory budget)."""
        raise NotImplementedError

    def fro_norm(self):
        acc = 0.0
        for blk in self.iter_blocks():
            acc += float(np.sum(blk * blk))
        return float(np.sqrt(acc))


class InCoreStore(MatrixStore):
    """Store over an in-core ndarray."""

    def __init__(self, array, block_rows=None):
        arr = ensure_dense(array)
        self._arr = arr
        self.rows, self.cols = arr.shape
        self.block_rows = int(block_rows) if block_rows else default_block_rows(self.cols)
        if self.block_rows < 1:
            raise ArgumentError("block_rows must be >= 1")

    @property
    def is_file_backed(self):
        return False

    def block(self, i):
        start, stop = self.block_bounds(i)
        return self._arr[start:stop]

    def to_dense(self):
        return self._arr


class FileStore(MatrixStore):
    """Store over a file in the binary format; reads are per-block seeks."""

    def __init__(self, path, block_rows=None, _owns_file=False):
        self.path = os.fspath(path)
        self.rows, self.cols = _read_header(self.path)
        self.block_rows = int(block_rows) if block_rows else default_block_rows(self.cols)
        if self.block_rows < 1:
            raise ArgumentError("block_rows must be >= 1")
        if _owns_file:
            self._finalizer = weakref.finalize(self, _unlink_quiet, self.path)

    @property
    def is_file_backed(self):
        return True

    def block(self, i):
        start, stop = self.block_bounds(i)
        count = (stop - start) * self.cols
        with open(self.path, "rb") as f:
            f.seek(HEADER_BYTES + start * self.cols * 8)
            data = np.fromfile(f, dtype="<f8", count=count)
        if data.size != count:
            raise ParseError(
                f"{self.path}: short read for rows {start}:{stop} "
                f"(byte offset {HEADER_BYTES + start * self.cols * 8})"
            )
        return data.reshape(stop - start, self.cols)

    def with_block_rows(self, block_rows):
        clone = FileStore(self.path, block_rows)
        clone._lifeline = self  # keeps an owning store's temp file alive
        return clone

    def to_dense(self):
        out = np.empty((self.rows, self.cols))
        for i in range(self.n_blocks()):
            start, stop = self.block_bounds(i)
            out[start:stop] = self.block(i)
        return out


def _unlink_quiet(path):
    try:
        os.unlink(path)
    except OSError:
        pass


def as_store(a, block_rows=None):
    """Wrap an ndarray (or pass through a store, re-blocked if requested)."""
    if isinstance(a, MatrixStore):
        if block_rows and block_rows != a.block_rows:
            if isinstance(a, FileStore):
                return a.with_block_rows(block_rows)
            return InCoreStore(a.to_dense(), block_rows)
        return a
    return InCoreStore(a, block_rows)


def _read_header(path):
    try:
        size = os.path.getsize(path)
        with open(path, "rb") as f:
            head = f.read(HEADER_BYTES)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if len(head) < HEADER_BYTES:
        raise ParseError(f"{path}: truncated header (byte offset {len(head)})")
    if head[: len(MAGIC)] != MAGIC:
        raise ParseError(f"{path}: bad magic (byte offset 0)")
    rows, cols = struct.unpack("<QQ", head[len(MAGIC):])
    expected = HEADER_BYTES + rows * cols * 8
    if size != expected:
        raise ParseError(
            f"{path}: payload/dimension mismatch, header says {rows}x{cols} "
            f"({expected} bytes) but file has {size} bytes (byte offset {min(size, expected)})"
        )
    return int(rows), int(cols)


def save_matrix(a, path):
    """Write a dense matrix or store to ``path`` in the binary format.

    The round trip save -> load reproduces every bit of the payload.
    """
    if isinstance(a, MatrixStore):
        _write_blocks(path, a.rows, a.cols, a.iter_blocks())
    else:
        arr = ensure_dense(a)
        _write_blocks(path, arr.shape[0], arr.shape[1], iter((arr,)))
    return path


def _write_blocks(path, rows, cols, blocks):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<QQ", rows, cols))
        written = 0
        for blk in blocks:
            blk = np.ascontiguousarray(blk, dtype="<f8")
            if blk.ndim != 2 or blk.shape[1] != cols:
                raise ArgumentError(f"block shape {blk.shape} incompatible with cols={cols}")
            blk.tofile(f)
            written += blk.shape[0]
    if written != rows:
        _unlink_quiet(path)
        raise ArgumentError(f"blocks supplied {written} rows, header promised {rows}")


def store_from_blocks(blocks, rows, cols, block_rows=None, scratch_dir=None):
    """Stream blocks into a temp file and return an owning FileStore."""
    fd, path = tempfile.mkstemp(suffix=".cnmf", dir=scratch_dir)
    os.close(fd)
    _write_blocks(path, rows, cols, blocks)
    return FileStore(path, block_rows, _owns_file=True)


def _scan_finite_blocks(store, path):
    for i in range(store.n_blocks()):
        blk = store.block(i)
        if not np.isfinite(blk).all():
            start, _ = store.block_bounds(i)
            r, c = np.argwhere(~np.isfinite(blk))[0]
            row = start + int(r)
            offset = HEADER_BYTES + (row * store.cols + int(c)) * 8
            raise ParseError(
                f"{path}: non-finite entry at row {row}, column {int(c)} (byte offset {offset})"
            )


def _parse_csv(path):
    rows = []
    ncols = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if ncols is None:
                ncols = len(fields)
            elif len(fields) != ncols:
                raise ParseError(
                    f"{path}: row {lineno} has {len(fields)} fields, expected {ncols}"
                )
            try:
                rows.append([float(x) for x in fields])
            except ValueError:
                raise ParseError(f"{path}: unparseable value in row {lineno}")
    if not rows:
        raise ParseError(f"{path}: empty file")
    arr = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(arr).all():
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise ParseError(f"{path}: non-finite entry at row {int(r) + 1}, column {int(c)}")
    return arr


def load_matrix(path, format="binary", block_rows=None, out_of_core=None):
    """Load a matrix file into a store.

    Parameters
    ----------
    path : str
    format : {"binary", "csv"}
    block_rows : int, optional
        Override the default (64 MiB) block sizing.
    out_of_core : bool, optional
        Force file-backed (True) or in-core (False). Default: file-backed
        exactly when the matrix exceeds the memory budget.

    Returns
    -------
    MatrixStore

    Raises
    ------
    ParseError
        Malformed header, dimension mismatch, or non-finite entry; the
        message names the byte or row offset.
    """
    if format == "binary":
        fstore = FileStore(path, block_rows)
        _scan_finite_blocks(fstore, path)
        nbytes = fstore.rows * fstore.cols * 8
        backed = out_of_core if out_of_core is not None else nbytes > memory_budget_bytes()
        if backed:
            return fstore
        return InCoreStore(fstore.to_dense(), block_rows)
    if format == "csv":
        arr = _parse_csv(path)
        backed = out_of_core if out_of_core is not None else arr.nbytes > memory_budget_bytes()
        if backed:
            return store_from_blocks(iter((arr,)), arr.shape[0], arr.shape[1], block_rows)
        return InCoreStore(arr, block_rows)
    raise ArgumentError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# Blocked products
# ---------------------------------------------------------------------------


def _rhs_chunk_product(ablock, b):
    """ablock @ b where b may be a store (read in row chunks)."""
    if not isinstance(b, MatrixStore):
        return ablock @ b
    out = np.zeros((ablock.shape[0], b.cols))
    for j in range(b.n_blocks()):
        start, stop = b.block_bounds(j)
        out += ablock[:, start:stop] @ b.block(j)
    return out


def matmul_blocked(a, b, scratch_dir=None):
    """Exact product A @ B streamed over A's row blocks.

    The result is in-core (ndarray) when ``A.rows * B.cols`` doubles fit
    the memory budget, and a file-backed store otherwise.
    """
    a = as_store(a)
    b_rows = b.rows if isinstance(b, MatrixStore) else ensure_dense(b, "b").shape[0]
    b_cols = b.cols if isinstance(b, MatrixStore) else b.shape[1]
    if a.cols != b_rows:
        raise ArgumentError(f"inner dimensions disagree: {a.shape} @ ({b_rows}, {b_cols})")
    out_bytes = a.rows * b_cols * 8
    if out_bytes <= memory_budget_bytes():
        out = np.empty((a.rows, b_cols))
        for i in range(a.n_blocks()):
            start, stop = a.block_bounds(i)
            out[start:stop] = _rhs_chunk_product(a.block(i), b)
        return out
    blocks = (_rhs_chunk_product(a.block(i), b) for i in range(a.n_blocks()))
    return store_from_blocks(blocks, a.rows, b_cols, a.block_rows, scratch_dir)


def matmul_transposed_blocked(a, b, scratch_dir=None):
    """Exact product A.T @ B where B is row-aligned with A's blocks.

    A is (m, n), B is (m, k); the (n, k) result is accumulated in-core
    when it fits the budget, otherwise built column-chunk by column-chunk
    (one full pass over A and B per chunk) into a file-backed store.
    """
    a = as_store(a)
    b = as_store(b, a.block_rows)
    if a.rows != b.rows:
        raise ArgumentError(f"row counts disagree: {a.shape} vs {b.shape}")
    out_bytes = a.cols * b.cols * 8
    if out_bytes <= memory_budget_bytes():
        out = np.zeros((a.cols, b.cols))
        for i in range(a.n_blocks()):
            out += a.block(i).T @ b.block(i)
        return out
    chunk = max(1, memory_budget_bytes() // (b.cols * 8))

    def chunks():
        for start in range(0, a.cols, chunk):
            stop = min(start + chunk, a.cols)
            acc = np.zeros((stop - start, b.cols))
            for i in range(a.n_blocks()):
                acc += a.block(i)[:, start:stop].T @ b.block(i)
            yield acc

    return store_from_blocks(chunks(), a.cols, b.cols, None, scratch_dir)
