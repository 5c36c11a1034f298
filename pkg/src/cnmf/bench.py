"""Synthetic data generators, the timing harness, and report emission.

Generators mirror the evaluation protocols the library is meant for:
noisy sparse low-rank products for classical NMF, Gaussian low-rank
products for separable NMF timing, and near-separable instances with a
known ground-truth column set. All of them are pure functions of their
spec (seed included); noise is drawn in fixed-size row chunks so an
in-core and a file-backed instance of the same spec hold identical
values.
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .compress import CompressionConfig
from .errors import ArgumentError
from .nmf import nmf_admm, nmf_alternating
from .rng import Rng, child_seed
from .snmf import snmf
from .store import InCoreStore, memory_budget_bytes, store_from_blocks

_GEN_CHUNK = 4096

RAW_HEADER = ["variant", "m", "n", "r", "delta", "seed", "time_s", "rel_error", "iterations"]
SUMMARY_HEADER = ["variant", "m", "n", "r", "delta", "repeats", "failures",
                  "mean_time_s", "mean_rel_error"]


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape, rank, density, and seed of a synthetic instance."""

    m: int
    n: int
    r: int
    delta: float = 1.0
    kind: str = "nmf_noisy"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ArgumentError(f"delta must be in (0, 1], got {self.delta}")
        if self.r > min(self.m, self.n):
            raise ArgumentError(f"rank {self.r} exceeds min(m, n)")


@dataclass
class RunReport:
    """One timed run: what ran, how long, how well."""

    variant: str
    time_s: float
    rel_error: float
    iterations: int
    seed: int
    config: dict


def _sparse_uniform(rows, cols, delta, rng):
    vals = rng.child("values").uniform((rows, cols))
    if delta >= 1.0:
        return vals
    mask = rng.child("mask").uniform((rows, cols)) < delta
    return vals * mask


def _assemble(blocks, m, n):
    if m * n * 8 <= memory_budget_bytes():
        return InCoreStore(np.vstack(list(blocks)))
    return store_from_blocks(blocks, m, n)


def gen_nmf_synthetic(spec, return_truth=False):
    """Noisy low-rank product: sparse uniform factors plus sparse noise.

    The ground-truth factors have uniform [0, 1] entries with probability
    ``delta`` (zero otherwise); the additive noise is standard normal
    with probability ``delta**2``. Noise entries are not clipped, so the
    result can dip slightly below zero. With ``return_truth`` the
    ground-truth factors come back alongside the matrix.
    """
    if spec.kind != "nmf_noisy":
        raise ArgumentError(f"expected kind 'nmf_noisy', got {spec.kind!r}")
    rng = Rng(spec.seed)
    x_gt = _sparse_uniform(spec.m, spec.r, spec.delta, rng.child("left-truth"))
    y_gt = _sparse_uniform(spec.r, spec.n, spec.delta, rng.child("right-truth"))
    noise_rng = rng.child("noise")
    noise_p = spec.delta**2

    def blocks():
        for c, start in enumerate(range(0, spec.m, _GEN_CHUNK)):
            stop = min(start + _GEN_CHUNK, spec.m)
            blk = x_gt[start:stop] @ y_gt
            blk += _sparse_normal(stop - start, spec.n, noise_p, noise_rng.child(f"chunk{c}"))
            yield blk

    store = _assemble(blocks(), spec.m, spec.n)
    if return_truth:
        return store, x_gt, y_gt
    return store


def _sparse_normal(rows, cols, p, rng):
    vals = rng.child("values").standard_normal((rows, cols))
    if p >= 1.0:
        return vals
    mask = rng.child("mask").uniform((rows, cols)) < p
    return vals * mask


def gen_snmf_synthetic(spec):
    """Exact low-rank product of standard-normal factors (rank r a.s.)."""
    if spec.kind != "snmf_gaussian":
        raise ArgumentError(f"expected kind 'snmf_gaussian', got {spec.kind!r}")
    rng = Rng(spec.seed)
    x_gt = rng.child("left-truth").standard_normal((spec.m, spec.r))
    y_gt = rng.child("right-truth").standard_normal((spec.r, spec.n))

    def blocks():
        for start in range(0, spec.m, _GEN_CHUNK):
            stop = min(start + _GEN_CHUNK, spec.m)
            yield x_gt[start:stop] @ y_gt

    return _assemble(blocks(), spec.m, spec.n)


def gen_separable_synthetic(m, n, r, noise=0.0, seed=0):
    """Near-separable instance with known extreme columns.

    Builds W (m x r, uniform [0, 1]) and a coefficient matrix holding an
    identity block at r random positions and convex combinations
    elsewhere, then adds ``noise`` times dense standard-normal noise.

    Returns
    -------
    (MatrixStore, ndarray)
        The matrix and the ground-truth column index set.
    """
    if not 1 <= r <= n:
        raise ArgumentError(f"need 1 <= r <= n, got r={r}, n={n}")
    rng = Rng(seed)
    w = rng.child("basis").uniform((m, r))
    anchors = np.asarray(rng.child("anchors").permutation(n)[:r], dtype=np.int64)
    h = np.zeros((r, n))
    others = np.setdiff1d(np.arange(n), anchors)
    coeff = rng.child("weights").uniform((r, others.size))
    h[:, others] = coeff / coeff.sum(axis=0, keepdims=True)
    h[:, anchors] = np.eye(r)
    noise_rng = rng.child("noise")

    def blocks():
        for c, start in enumerate(range(0, m, _GEN_CHUNK)):
            stop = min(start + _GEN_CHUNK, m)
            blk = w[start:stop] @ h
            if noise > 0:
                blk = blk + noise * noise_rng.child(f"chunk{c}").standard_normal(
                    (stop - start, n))
            yield blk

    return _assemble(blocks(), m, n), anchors


def threshold_factors(x, y, top=25):
    """Sparsify factors for cluster display.

    Zeroes the entries of each column of X (row of Y) that fall strictly
    below that column's (row's) mean plus three standard deviations, then
    keeps only the ``top`` largest surviving entries per column of X.
    Entries equal to the threshold survive, so a constant column is kept
    whole rather than vanishing.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.min() < 0 or y.min() < 0:
        raise ArgumentError("factors must be nonnegative")
    cut_x = x.mean(axis=0) + 3.0 * x.std(axis=0)
    xs = np.where(x < cut_x, 0.0, x)
    for j in range(xs.shape[1]):
        nz = np.flatnonzero(xs[:, j])
        if nz.size > top:
            order = nz[np.argsort(xs[nz, j], kind="stable")]
            xs[order[:-top], j] = 0.0
    cut_y = y.mean(axis=1, keepdims=True) + 3.0 * y.std(axis=1, keepdims=True)
    ys = np.where(y < cut_y, 0.0, y)
    return xs, ys


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


def _generate(gen_spec, seed):
    kind = gen_spec.get("kind", "nmf_noisy")
    if kind == "separable":
        store, _ = gen_separable_synthetic(
            gen_spec["m"], gen_spec["n"], gen_spec["r"],
            noise=gen_spec.get("noise", 0.0), seed=seed)
        return store
    spec = SyntheticSpec(m=gen_spec["m"], n=gen_spec["n"], r=gen_spec["r"],
                         delta=gen_spec.get("delta", 1.0), kind=kind, seed=seed)
    if kind == "nmf_noisy":
        return gen_nmf_synthetic(spec)
    if kind == "snmf_gaussian":
        return gen_snmf_synthetic(spec)
    raise ArgumentError(f"unknown generator kind {kind!r}")


def _run_algorithm(alg, store, seed):
    task = alg.get("task", "nmf")
    rank = alg["rank"]
    cfg = CompressionConfig(
        r=rank,
        r_ov=alg.get("oversample", 10),
        w=alg.get("power", 4 if task == "nmf" else 0),
        seed=seed,
    )
    start = time.perf_counter()
    if task == "nmf":
        method = alg.get("method", "activeset")
        compression = alg.get("compression", "structured")
        if method == "admm":
            if compression == "gaussian":
                raise ArgumentError("the ADMM driver has no Gaussian-compressed variant")
            result = nmf_admm(store, rank, compressed=compression == "structured",
                              cfg=cfg, max_iter=alg.get("max_iter", 500),
                              tol=alg.get("tol", 1e-4))
        else:
            result = nmf_alternating(store, rank, method=method,
                                     compression=compression,
                                     cfg=cfg, max_iter=alg.get("max_iter", 500),
                                     tol=alg.get("tol", 1e-5))
        elapsed = time.perf_counter() - start
        return elapsed, result.rel_error, result.iterations
    if task == "snmf":
        result = snmf(store, rank, selector=alg.get("selector", "spa"),
                      reduction=alg.get("reduction", "compressed"), cfg=cfg)
        elapsed = time.perf_counter() - start
        return elapsed, result.rel_error_full, rank
    raise ArgumentError(f"unknown task {task!r}")


def _run_cell(index, cell, suite_seed, default_repeats):
    repeats = cell.get("repeats", default_repeats)
    gen_spec = cell["generator"]
    alg = cell["algorithm"]
    variant = cell.get("name") or "-".join(
        str(alg.get(k)) for k in ("task", "method", "compression") if alg.get(k))
    rows = []
    failures = []
    for rep in range(repeats):
        seed = child_seed(suite_seed, f"cell{index}-rep{rep}")
        row = {
            "variant": variant,
            "m": gen_spec["m"], "n": gen_spec["n"],
            "r": alg.get("rank", gen_spec.get("r")),
            "delta": gen_spec.get("delta", 1.0),
            "seed": seed,
        }
        try:
            store = _generate(gen_spec, child_seed(seed, "data"))
            elapsed, rel, iters = _run_algorithm(alg, store, seed)
            row.update(time_s=elapsed, rel_error=rel, iterations=iters)
        except Exception as exc:  # noqa: BLE001 - failed cells become failed rows
            row.update(time_s=float("nan"), rel_error=float("nan"), iterations=0)
            failures.append({"variant": variant, "repeat": rep, "error": str(exc)})
        rows.append(row)
    return rows, failures


def run_benchmark(suite_path, out_dir, parallel=False):
    """Run a benchmark suite file and emit CSV/JSON reports.

    The suite is a JSON object with a ``seed``, an optional default
    ``repeats`` (10 unless set), and a list of ``cells``; each cell names
    a generator, an algorithm, and optionally its own repeat count. Every
    repeat uses a fresh derived seed. Failed runs become rows with NaN
    errors and are listed in the manifest; the suite continues.

    Writes ``raw.csv`` (one row per run), ``summary.csv`` (one row per
    cell, errors averaged over repeats), and ``manifest.json``.
    """
    with open(suite_path, "r", encoding="utf-8") as f:
        suite = json.load(f)
    cells = suite.get("cells", [])
    suite_seed = suite.get("seed", 0)
    default_repeats = suite.get("repeats", 10)
    os.makedirs(out_dir, exist_ok=True)

    if parallel and cells:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(
                lambda ic: _run_cell(ic[0], ic[1], suite_seed, default_repeats),
                enumerate(cells)))
    else:
        results = [_run_cell(i, cell, suite_seed, default_repeats)
                   for i, cell in enumerate(cells)]

    all_rows = [row for rows, _ in results for row in rows]
    all_failures = [f for _, fails in results for f in fails]

    raw_path = os.path.join(out_dir, "raw.csv")
    _write_csv(raw_path, RAW_HEADER, all_rows)

    summary_rows = []
    for (rows, fails), cell in zip(results, cells):
        ok = [r for r in rows if np.isfinite(r["rel_error"])]
        base = rows[0] if rows else {}
        summary_rows.append({
            "variant": base.get("variant", ""),
            "m": base.get("m", ""), "n": base.get("n", ""), "r": base.get("r", ""),
            "delta": base.get("delta", ""),
            "repeats": len(rows), "failures": len(fails),
            "mean_time_s": float(np.mean([r["time_s"] for r in ok])) if ok else float("nan"),
            "mean_rel_error": float(np.mean([r["rel_error"] for r in ok])) if ok else float("nan"),
        })
    summary_path = os.path.join(out_dir, "summary.csv")
    _write_csv(summary_path, SUMMARY_HEADER, summary_rows)

    manifest = {
        "suite": suite,
        "seed": suite_seed,
        "cells": [c.get("name") for c in cells],
        "failures": all_failures,
        "outputs": {"raw": raw_path, "summary": summary_path},
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return {"raw": raw_path, "summary": summary_path, "manifest": manifest_path}


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(row.get(h, "")) for h in header) + "\n")
