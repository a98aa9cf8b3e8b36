"""Discrete-variable topology optimization with trust-region cuts."""

from ._dvto import (
    BinaryProgram,
    MilpResult,
    Row,
    RunResult,
    Spec,
    analyze,
    brute_force,
    build_spec,
    diagnose_conditioning,
    exponential_targets,
    initial_design,
    material_map,
    measure,
    preset_names,
    run,
    solve_milp,
    stage_schedule,
    write_artifacts,
)

__all__ = [
    "BinaryProgram",
    "MilpResult",
    "Row",
    "RunResult",
    "Spec",
    "analyze",
    "brute_force",
    "build_spec",
    "diagnose_conditioning",
    "exponential_targets",
    "initial_design",
    "material_map",
    "measure",
    "preset_names",
    "run",
    "solve_milp",
    "stage_schedule",
    "write_artifacts",
]
