"""Averaged many-body (Lindblad) engine in the Pauli-string basis."""

from .lindblad_engine import (
    H0Spec,
    RankReport,
    RelaxationReport,
    StructureMatrix,
    Superoperator,
    build_generator,
    build_structure_matrix,
    dissipation_rates,
    evolve_density,
    heisenberg_evolve,
    lr_commutator,
    pauli_expectations,
    rank_condition_report,
    relaxation_check,
    validate_density,
)
from .pauli_algebra import (
    PauliOperatorRep,
    embed_single_site,
    pauli_commutator,
    pauli_digits,
    trace_distance,
)

__all__ = [
    "H0Spec",
    "PauliOperatorRep",
    "RankReport",
    "RelaxationReport",
    "StructureMatrix",
    "Superoperator",
    "build_generator",
    "build_structure_matrix",
    "dissipation_rates",
    "embed_single_site",
    "evolve_density",
    "heisenberg_evolve",
    "lr_commutator",
    "pauli_commutator",
    "pauli_digits",
    "pauli_expectations",
    "rank_condition_report",
    "relaxation_check",
    "trace_distance",
    "validate_density",
]
