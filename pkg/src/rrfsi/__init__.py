"""Explicit parallel Robin-Robin partitioned solver for linear fluid-structure interaction.

Stokes flow (Taylor-Hood P2-P1) is coupled to linear elastodynamics (P2)
across a fixed interface; both subproblems are advanced by backward Euler and
exchange interface data through a traction ledger, so they can be solved
concurrently within each step.
"""

from .ale import HarmonicExtension, MeshMotion, compute_tau_m, extend_displacement, mesh_quality_report
from .config import ConfigError, RunConfig, parse_config
from .coupling import TractionLedger, update_tractions
from .fem import Field, FESpace, FormKind, NormKind, ParameterError, TraceSpace, assemble, norm
from .fluid import FluidStepSystem, fluid_step
from .harness import ManufacturedCase, ErrorReport, convergence_study, forcing_terms, stability_study
from .mesh import CoupledMesh, GeometryError, Rect, Tag, Triangulation, build_layered_rect_mesh
from .orchestrator import (
    EnergyLedger,
    Parameters,
    SimState,
    StepError,
    advance_step,
    build_systems,
    initial_state,
    record_energy,
    run_steps,
)
from .sparse import SolverError, SparseSystem
from .structure import StructureStepSystem, structure_step

__version__ = "0.1.0"
