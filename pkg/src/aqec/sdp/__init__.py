"""Block SDP data model, dense interior point solver and SDPA file I/O."""
from .model import (
    Presolved,
    SdpBuilder,
    SdpProblem,
    SdpSolution,
    Status,
    embed_real,
    hermitian_basis_rows,
    independent_rows,
    presolve,
)
from .sdpa import SdpaParseError, import_sdpa_solution, read_sdpa, write_sdpa, write_solution
from .solver import SolverOptions, solve

export_sdpa = write_sdpa
import_sdpa = read_sdpa

__all__ = [
    "Presolved", "SdpBuilder", "SdpProblem", "SdpSolution", "Status", "SolverOptions",
    "SdpaParseError", "embed_real", "export_sdpa", "hermitian_basis_rows", "import_sdpa",
    "import_sdpa_solution", "independent_rows", "presolve", "read_sdpa", "solve",
    "write_sdpa", "write_solution",
]
