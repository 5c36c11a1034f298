import glob
import os

import numpy as np
import pytest

from cnmf import (
    ArgumentError,
    BudgetError,
    CompressionConfig,
    Rng,
    as_store,
    canonical_qr,
    load_matrix,
    save_matrix,
    structured_compress,
    tsqr,
    tsqr_compress,
)


def _file_store(a, tmp_path, block_rows, name="a.cnmf"):
    path = tmp_path / name
    save_matrix(a, str(path))
    return load_matrix(str(path), block_rows=block_rows, out_of_core=True)


def test_orthonormal_input_single_block():
    q0, _ = np.linalg.qr(Rng(0).standard_normal((50, 8)))
    res = tsqr(as_store(q0, block_rows=50))
    assert np.allclose(res.Q.to_dense(), q0, atol=1e-12)
    assert np.allclose(res.R, np.eye(8), atol=1e-12)


def test_reconstruction_orthonormality_triangularity(tmp_path):
    a = Rng(1).standard_normal((10_000, 20))
    store = _file_store(a, tmp_path, 512)
    res = tsqr(store)
    q = res.Q.to_dense()
    assert np.linalg.norm(q.T @ q - np.eye(20)) <= 1e-12 * np.sqrt(20)
    assert np.linalg.norm(q @ res.R - a) <= 1e-12 * np.linalg.norm(a)
    assert np.array_equal(res.R, np.triu(res.R))
    assert np.all(np.diag(res.R) >= 0)


def test_r_matches_in_core_qr_exactly(tmp_path):
    a = Rng(2).standard_normal((4096, 17))
    store = _file_store(a, tmp_path, 300)
    res = tsqr(store)
    _, r_ref = canonical_qr(a)
    assert np.linalg.norm(res.R - r_ref) <= 1e-10 * np.linalg.norm(r_ref)


def test_single_block_degenerates_to_plain_qr():
    a = Rng(3).standard_normal((200, 12))
    res = tsqr(as_store(a, block_rows=200))
    q_ref, r_ref = canonical_qr(a)
    assert np.allclose(res.Q.to_dense(), q_ref, atol=1e-12)
    assert np.allclose(res.R, r_ref, atol=1e-12)


def test_short_last_block_is_handled():
    a = Rng(4).standard_normal((130, 16))  # blocks of 64, 64, 2 rows
    res = tsqr(as_store(a, block_rows=64))
    assert np.linalg.norm(res.Q.to_dense() @ res.R - a) <= 1e-10


def test_block_narrower_than_cols_rejected():
    a = Rng(5).standard_normal((100, 32))
    with pytest.raises(ArgumentError, match="narrower"):
        tsqr(as_store(a, block_rows=16))


def test_stacked_r_budget_error(monkeypatch, tmp_path):
    a = Rng(6).standard_normal((40_000, 128))
    store = _file_store(a, tmp_path, 128)  # 313 blocks -> stack of ~41 MB
    monkeypatch.setenv("CNMF_MEM_BUDGET_MB", "16")
    with pytest.raises(BudgetError, match="larger blocks"):
        tsqr(store)


def test_scratch_files_cleaned_on_success(tmp_path):
    a = Rng(7).standard_normal((3000, 10))
    store = _file_store(a, tmp_path, 256)
    scratch = tmp_path / "scratch"
    scratch.mkdir()
    res = tsqr(store, scratch_dir=str(scratch))
    assert np.linalg.norm(res.Q.to_dense() @ res.R - a) <= 1e-10
    assert glob.glob(os.path.join(str(scratch), "*")) == []


def test_fused_w0_matches_in_core(tmp_path):
    a = Rng(8).standard_normal((20_000, 500))
    store = _file_store(a, tmp_path, 1024)
    cfg = CompressionConfig(r=10, r_ov=10, w=0, seed=9)
    q_ooc = tsqr_compress(store, cfg).q_dense()
    q_ic = structured_compress(a, cfg).q_dense()
    assert np.linalg.norm(q_ooc - q_ic) <= 1e-8


def test_fused_exact_rank_residual(tmp_path):
    rng = Rng(10)
    a = rng.child("x").uniform((5000, 7)) @ rng.child("y").uniform((7, 300))
    store = _file_store(a, tmp_path, 512)
    cfg = CompressionConfig(r=7, r_ov=13, w=0, seed=11)
    q = tsqr_compress(store, cfg).q_dense()
    resid = a - q @ (q.T @ a)
    assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(a)


def test_fused_power_passes_match_in_core(tmp_path):
    a = Rng(12).standard_normal((6000, 200))
    store = _file_store(a, tmp_path, 512)
    cfg = CompressionConfig(r=8, r_ov=12, w=2, seed=13)
    q_ooc = tsqr_compress(store, cfg).q_dense()
    q_ic = structured_compress(a, cfg).q_dense()
    assert np.linalg.norm(q_ooc - q_ic) <= 1e-8


def test_fused_with_reorthogonalization(tmp_path):
    a = Rng(14).standard_normal((3000, 100))
    store = _file_store(a, tmp_path, 512)
    cfg = CompressionConfig(r=5, r_ov=10, w=3, seed=15)
    q_ooc = tsqr_compress(store, cfg, reorthogonalize=True).q_dense()
    q_ic = structured_compress(a, cfg, reorthogonalize=True).q_dense()
    assert np.linalg.norm(q_ooc - q_ic) <= 1e-8
    assert np.linalg.norm(q_ooc.T @ q_ooc - np.eye(15)) <= 1e-10
