"""Measurement operators, noise, paired datasets and Q diagnostics"""
from .dataset import (
    MeasurementPair,
    PairDataset,
    build_pair_dataset,
    load_dataset,
    load_sealed_parameters,
    save_dataset,
)
from .distributions import ParamDistribution, sample_motion_kernel
from .gram import QRankReport, gram_expectation, gram_of_operators, q_rank_report, smallest_eigenvalue
from .kernels import kernel_spectrum, random_walk_kernel
from .operators import (
    CompressivePatchOp,
    ConvolutionOp,
    GaussianNoise,
    MatrixOp,
    MeasurementOp,
    adjoint_input,
    measure,
    orthonormal_rows,
)
from .partitions import shifted_partitions

__all__ = [
    "CompressivePatchOp",
    "ConvolutionOp",
    "GaussianNoise",
    "MatrixOp",
    "MeasurementOp",
    "MeasurementPair",
    "PairDataset",
    "ParamDistribution",
    "QRankReport",
    "adjoint_input",
    "build_pair_dataset",
    "gram_expectation",
    "gram_of_operators",
    "kernel_spectrum",
    "load_dataset",
    "load_sealed_parameters",
    "measure",
    "orthonormal_rows",
    "q_rank_report",
    "random_walk_kernel",
    "sample_motion_kernel",
    "save_dataset",
    "shifted_partitions",
    "smallest_eigenvalue",
]
