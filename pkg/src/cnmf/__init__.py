"""Randomly compressed NMF: classical and separable, in and out of core.

The package factorizes a nonnegative matrix A as X Y (X, Y >= 0) or as
A[:, K] Y (separable form), after shrinking the working matrices with a
randomized range finder. A blocked tall-and-skinny QR lets the
compression itself run over file-backed matrices within a fixed memory
budget, so neither dimension of A has to fit in RAM.
"""

from .bench import (
    RunReport,
    SyntheticSpec,
    gen_nmf_synthetic,
    gen_separable_synthetic,
    gen_snmf_synthetic,
    run_benchmark,
    threshold_factors,
)
from .compress import (
    CompressionBasis,
    CompressionConfig,
    SpectrumReport,
    adjust_config,
    canonical_qr,
    compression_error,
    gaussian_compress,
    spectrum_report,
    structured_compress,
    structured_compress_rows,
)
from .errors import (
    ArgumentError,
    BudgetError,
    CnmfError,
    ConvergenceError,
    DivergenceError,
    InfeasibleRankError,
    NumericError,
    ParseError,
    RankDeficiencyError,
    UndefinedMetricError,
)
from .nmf import (
    AdmmState,
    FactorPair,
    KktResidual,
    kkt_residual,
    mu_step,
    nmf_admm,
    nmf_alternating,
    relative_error,
)
from .nnls import nnls_solve
from .rng import Rng, child_seed, gaussian_matrix
from .snmf import (
    SnmfResult,
    select_columns_spa,
    select_columns_xray,
    snmf,
    snmf_right_factor,
)
from .store import (
    FileStore,
    InCoreStore,
    MatrixStore,
    as_store,
    default_block_rows,
    load_matrix,
    matmul_blocked,
    matmul_transposed_blocked,
    memory_budget_bytes,
    save_matrix,
    store_from_blocks,
)
from .tsqr import TsqrResult, tsqr, tsqr_compress

__version__ = "0.1.0"

__all__ = [
    "AdmmState", "ArgumentError", "BudgetError", "CnmfError", "CompressionBasis",
    "CompressionConfig", "ConvergenceError", "DivergenceError", "FactorPair",
    "FileStore", "InCoreStore", "InfeasibleRankError", "KktResidual", "MatrixStore",
    "NumericError", "ParseError", "RankDeficiencyError", "Rng", "RunReport",
    "SnmfResult", "SpectrumReport", "SyntheticSpec", "TsqrResult",
    "UndefinedMetricError", "adjust_config", "as_store", "canonical_qr",
    "child_seed", "compression_error", "default_block_rows", "gaussian_compress",
    "gaussian_matrix", "gen_nmf_synthetic", "gen_separable_synthetic",
    "gen_snmf_synthetic", "kkt_residual", "load_matrix", "matmul_blocked",
    "matmul_transposed_blocked", "memory_budget_bytes", "mu_step", "nmf_admm",
    "nmf_alternating", "nnls_solve", "relative_error", "run_benchmark",
    "save_matrix", "select_columns_spa", "select_columns_xray", "snmf",
    "snmf_right_factor", "spectrum_report", "store_from_blocks",
    "structured_compress", "structured_compress_rows", "threshold_factors",
    "tsqr", "tsqr_compress",
]
