"""Nearest structured rank-deficient matrix via semidefinite relaxation."""

from stls.baseline import LocalConfig, init_smallest_singular, local_solve
from stls.experiments import ExperimentSpec, default_spec, format_csv, format_table, run_bench
from stls.extract import (
    StlsSolution,
    extract_solution,
    rank_deficiency_residual,
    rank_one_ratio,
    solve_instance,
)
from stls.lift import LiftedProblem, block_sym, build_lifted, constraint_matrix, qcqp_residuals
from stls.sdp import (
    CertificateCheck,
    SdpProblem,
    SdpSolution,
    SolverConfig,
    assemble_primal,
    export_problem,
    naive_relaxation_value,
    solve,
    verify_certificate,
)
from stls.structure import (
    AffineStructure,
    ProblemInstance,
    WeightSpec,
    complex_to_real,
    evaluate,
    fractional_structure,
    hankel_structure,
    instance_from_descriptor,
    resectioning_structure,
    structure_from_descriptor,
    sylvester_structure,
    triangulation_structure,
)

__all__ = [
    "AffineStructure",
    "CertificateCheck",
    "ExperimentSpec",
    "LiftedProblem",
    "LocalConfig",
    "ProblemInstance",
    "SdpProblem",
    "SdpSolution",
    "SolverConfig",
    "StlsSolution",
    "WeightSpec",
    "assemble_primal",
    "block_sym",
    "build_lifted",
    "complex_to_real",
    "constraint_matrix",
    "default_spec",
    "evaluate",
    "export_problem",
    "extract_solution",
    "format_csv",
    "format_table",
    "fractional_structure",
    "hankel_structure",
    "init_smallest_singular",
    "instance_from_descriptor",
    "local_solve",
    "naive_relaxation_value",
    "qcqp_residuals",
    "rank_deficiency_residual",
    "rank_one_ratio",
    "resectioning_structure",
    "run_bench",
    "solve",
    "solve_instance",
    "structure_from_descriptor",
    "sylvester_structure",
    "triangulation_structure",
    "verify_certificate",
]
