import os
import struct

import numpy as np
import pytest

from cnmf import (
    ArgumentError,
    FileStore,
    ParseError,
    Rng,
    as_store,
    load_matrix,
    matmul_blocked,
    matmul_transposed_blocked,
    memory_budget_bytes,
    save_matrix,
)
from cnmf.store import HEADER_BYTES, MAGIC


def test_csv_readback(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3,4\n")
    store = load_matrix(str(path), format="csv")
    assert store.shape == (2, 2)
    assert np.array_equal(store.to_dense(), [[1.0, 2.0], [3.0, 4.0]])


def test_empty_csv_is_parse_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ParseError):
        load_matrix(str(path), format="csv")


def test_ragged_csv_names_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(ParseError, match="row 2"):
        load_matrix(str(path), format="csv")


def test_binary_payload_mismatch(tmp_path):
    path = tmp_path / "bad.cnmf"
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<QQ", 3, 2))
        np.arange(5, dtype="<f8").tofile(f)  # 5 values, header promises 6
    with pytest.raises(ParseError, match="mismatch"):
        load_matrix(str(path))


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.cnmf"
    path.write_bytes(b"NOPE!" + b"\0" * 16)
    with pytest.raises(ParseError, match="magic"):
        load_matrix(str(path))


def test_non_finite_rejected_with_offset(tmp_path):
    a = np.ones((4, 3))
    a[2, 1] = np.nan
    path = tmp_path / "nan.cnmf"
    save_matrix(a, str(path))
    with pytest.raises(ParseError, match="row 2, column 1"):
        load_matrix(str(path))


def test_binary_roundtrip_bit_exact(tmp_path):
    a = Rng(0).standard_normal((37, 11))
    path = tmp_path / "rt.cnmf"
    save_matrix(a, str(path))
    back = load_matrix(str(path))
    assert np.array_equal(back.to_dense(), a)  # every bit


def test_block_iteration_concatenates_to_dense(tmp_path):
    a = Rng(1).standard_normal((103, 7))
    path = tmp_path / "blk.cnmf"
    save_matrix(a, str(path))
    store = load_matrix(str(path), block_rows=16, out_of_core=True)
    assert store.is_file_backed
    stacked = np.vstack(list(store.iter_blocks()))
    assert np.array_equal(stacked, a)
    # iteration is repeatable
    again = np.vstack(list(store.iter_blocks()))
    assert np.array_equal(again, stacked)


def test_budget_decides_backing(tmp_path, monkeypatch):
    a = Rng(2).standard_normal((64, 64))  # 32 KiB
    path = tmp_path / "m.cnmf"
    save_matrix(a, str(path))
    monkeypatch.setenv("CNMF_MEM_BUDGET_MB", "1")
    assert not load_matrix(str(path)).is_file_backed
    assert memory_budget_bytes() == 1 << 20
    big = Rng(3).standard_normal((600, 300))  # ~1.4 MiB > 1 MiB budget
    save_matrix(big, str(path))
    assert load_matrix(str(path)).is_file_backed


def test_matmul_identity():
    b = Rng(4).standard_normal((3, 5))
    out = matmul_blocked(np.eye(3), b)
    assert np.allclose(out, b, atol=1e-15)


def test_matmul_hand_example():
    out = matmul_blocked(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
    assert np.array_equal(out, [[3.0], [7.0]])


def test_matmul_dimension_mismatch():
    with pytest.raises(ArgumentError):
        matmul_blocked(np.ones((2, 3)), np.ones((2, 2)))


def test_matmul_blocked_matches_in_core(tmp_path):
    a = Rng(5).standard_normal((5000, 50))
    b = Rng(6).standard_normal((50, 10))
    path = tmp_path / "a.cnmf"
    save_matrix(a, str(path))
    store = load_matrix(str(path), block_rows=128, out_of_core=True)
    out = matmul_blocked(store, b)
    ref = a @ b
    assert np.linalg.norm(out - ref) <= 1e-12 * np.linalg.norm(ref)


def test_matmul_result_file_backed_when_over_budget(monkeypatch):
    monkeypatch.setenv("CNMF_MEM_BUDGET_MB", "1")
    a = as_store(Rng(7).standard_normal((512, 64)), block_rows=128)
    b = Rng(8).standard_normal((64, 512))  # result 2 MiB > 1 MiB
    out = matmul_blocked(a, b)
    assert isinstance(out, FileStore)
    assert np.allclose(out.to_dense(), a.to_dense() @ b, atol=1e-12)


def test_matmul_transposed_matches_in_core(monkeypatch):
    a = Rng(9).standard_normal((400, 30))
    b = Rng(10).standard_normal((400, 6))
    ref = a.T @ b
    out = matmul_transposed_blocked(as_store(a, 64), b)
    assert np.allclose(out, ref, atol=1e-12)
    # chunked file-backed path
    monkeypatch.setenv("CNMF_MEM_BUDGET_MB", "1")
    wide = Rng(11).standard_normal((64, 3000))
    rhs = Rng(12).standard_normal((64, 100))  # result 3000x100 = 2.4 MB > 1 MB
    out2 = matmul_transposed_blocked(as_store(wide, 16), rhs)
    assert not isinstance(out2, np.ndarray)
    assert np.allclose(out2.to_dense(), wide.T @ rhs, atol=1e-10)


def test_store_rhs_product():
    a = as_store(Rng(13).standard_normal((40, 60)), block_rows=7)
    b = as_store(Rng(14).standard_normal((60, 5)), block_rows=13)
    out = matmul_blocked(a, b)
    assert np.allclose(out, a.to_dense() @ b.to_dense(), atol=1e-12)


def test_out_of_core_flag_in_header_is_size_rule(tmp_path):
    # explicit override wins over the size rule in both directions
    a = Rng(15).standard_normal((8, 8))
    path = tmp_path / "s.cnmf"
    save_matrix(a, str(path))
    assert load_matrix(str(path), out_of_core=True).is_file_backed
    assert not load_matrix(str(path), out_of_core=False).is_file_backed


def test_header_bytes_layout(tmp_path):
    path = tmp_path / "h.cnmf"
    save_matrix(np.zeros((2, 2)), str(path))
    assert os.path.getsize(str(path)) == HEADER_BYTES + 4 * 8


def test_csv_over_budget_becomes_file_backed(tmp_path, monkeypatch):
    def write_csv(arr, path):
        path.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in arr))

    monkeypatch.setenv("CNMF_MEM_BUDGET_MB", "1")
    small = Rng(20).standard_normal((300, 300))  # ~700 KiB
    write_csv(small, tmp_path / "small.csv")
    assert not load_matrix(str(tmp_path / "small.csv"), format="csv").is_file_backed
    big = Rng(21).standard_normal((600, 300))  # ~1.4 MiB > budget
    write_csv(big, tmp_path / "big.csv")
    store = load_matrix(str(tmp_path / "big.csv"), format="csv")
    assert store.is_file_backed
    assert np.array_equal(store.to_dense(), big)  # repr round-trips float64
