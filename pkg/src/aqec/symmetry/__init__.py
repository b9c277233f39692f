"""Permutation groups on tensor positions, characters, commutants and block diagonalization."""
from .blocks import (BlockDiagonalizer, BlockSpec, DecompositionError, SymmetryError, block_diagonalize,
                     check_problem_invariance, lift_solution, reduce_sdp)
from .cg import cg_basis_lll, cg_matrix
from .characters import (CharacterTable, FactorAction, MultiplicityError, combined_multiplicities, copies_action,
                         grid_action, multiplicities_by_characters, mn_character, product_table, symmetric_table,
                         unitary_sector_multiplicities)
from .commutant import (CommutantBasis, OrbitGuardError, TensorAction, commutant_orbit_basis, permutation_operator,
                        schur_weyl_commutant)
from .groups import (GroupTooLarge, JointSymmetry, PermGroup, Verdict, extension_structure, from_cycles,
                     global_group_order, grid_extension_group, grid_global_group, grid_iid_group,
                     group_from_generators, joint_symmetry_check, symmetric_group)
from .report import example_pair, extendibility_blocks, symmetry_report

__all__ = [
    "BlockDiagonalizer", "BlockSpec", "CharacterTable", "CommutantBasis", "DecompositionError", "FactorAction",
    "GroupTooLarge", "JointSymmetry", "MultiplicityError", "OrbitGuardError", "PermGroup", "SymmetryError",
    "TensorAction", "Verdict", "block_diagonalize", "cg_basis_lll", "cg_matrix", "check_problem_invariance",
    "combined_multiplicities", "commutant_orbit_basis", "copies_action", "example_pair", "extendibility_blocks",
    "extension_structure", "from_cycles", "global_group_order", "grid_action", "grid_extension_group",
    "grid_global_group", "grid_iid_group", "group_from_generators", "joint_symmetry_check", "lift_solution",
    "mn_character", "multiplicities_by_characters", "permutation_operator", "product_table", "reduce_sdp",
    "schur_weyl_commutant", "symmetric_group", "symmetry_report", "unitary_sector_multiplicities",
]
