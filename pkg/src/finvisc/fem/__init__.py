"""Mixed P2/P1 tetrahedral finite elements for the viscoelastic model."""

from .assembly import Assembler, BVPConfig, DirichletBC, DofMap, QPState, TractionBC
from .mesh import Mesh, generate_cube_mesh, generate_shell_mesh, read_mesh, write_mesh
from .problems import (convergence_study, homogeneity, patch_test_config, shell_config,
                       solve_shell)
from .solver import FEState, outer_pressure_fe, run, solve_step

__all__ = ["Assembler", "BVPConfig", "DirichletBC", "DofMap", "QPState", "TractionBC",
           "Mesh", "generate_cube_mesh", "generate_shell_mesh", "read_mesh", "write_mesh",
           "convergence_study", "homogeneity", "patch_test_config", "shell_config",
           "solve_shell", "FEState", "outer_pressure_fe", "run", "solve_step"]
