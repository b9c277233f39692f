"""JSON summary of the symmetry structure of a level-n instance on m physical qubits."""
from __future__ import annotations

import json
from math import prod

from .characters import (combined_multiplicities, copies_action, grid_action, multiplicities_by_characters,
                         product_table, symmetric_table)
from .groups import (PermGroup, extension_structure, from_cycles, global_group_order, grid_extension_group,
                     grid_iid_group, grid_position, joint_symmetry_check)


def _label(x) -> str:
    if isinstance(x, tuple) and x and isinstance(x[0], tuple):
        return "|".join(_label(p) for p in x)
    return "[" + ",".join(str(i) for i in x) + "]"


def example_pair() -> tuple[PermGroup, PermGroup]:
    """Two swaps on six points whose product set is not a group."""
    u = PermGroup(6, (from_cycles(6, [(1, 4), (2, 5)]),))
    v = PermGroup(6, (from_cycles(6, [(2, 3), (5, 6)]),))
    return u, v


def _commuting_iid(m: int, n: int) -> PermGroup:
    """Rows permuted in parallel in every column, which commutes with column swaps."""
    deg = m * (n + 1)
    gens = []
    for r in range(m - 1):
        p = list(range(deg))
        for c in range(n + 1):
            a, b = grid_position(r, c, n), grid_position(r + 1, c, n)
            p[a], p[b] = b, a
        gens.append(tuple(p))
    return PermGroup(deg, tuple(gens))


def _verdict(u: PermGroup, v: PermGroup) -> dict:
    j = joint_symmetry_check(u, v)
    return {"verdict": j.verdict.value, "is_group": j.is_group, "product_set": j.product_order,
            "closure_order": j.closure_order, "order_u": j.order_u, "order_v": j.order_v,
            "intersection": j.intersection_order, "product_formula": j.product_formula_holds}


def extendibility_blocks(m: int, n: int) -> dict:
    """Sizes m_λ of the blocks left by copy permutations alone (no other symmetry)."""
    copy = 2 ** (m + 1)
    mult = multiplicities_by_characters(copies_action(copy, n, copy), product_table(symmetric_table(n)))
    return {_label(k): v for k, v in mult.items()}


def symmetry_report(m: int, n: int, include_unitary: bool = True, seed: int = 2024) -> dict:
    if not (1 <= m <= 4 and 1 <= n <= 3):
        raise ValueError("report covers m <= 4 physical qubits and levels n <= 3")
    rep: dict = {"m": m, "n": n, "seed": seed, "total_dim": 2 ** ((m + 1) * (n + 1))}
    ext = extendibility_blocks(m, n)
    rep["extendibility"] = {"group": f"S{n}", "order": prod(range(1, n + 1)), "blocks": ext,
                            "block_sizes": sorted(ext.values(), reverse=True)}
    if m >= 2:
        table = product_table(symmetric_table(m), symmetric_table(n))
        grid = multiplicities_by_characters(grid_action(m, n), table)
        rep["grid"] = {"group": f"S{m}xS{n}", "order": table.order, "classes": len(table.classes),
                       "multiplicities": {_label(k): v for k, v in grid.items()}}
        if include_unitary:
            comb = combined_multiplicities(m, n)
            rep["combined"] = {"group": f"S{m}xS{n}xU(2)", "blocks": {_label(k): v for k, v in comb.items()},
                               "block_sizes": sorted(comb.values(), reverse=True),
                               "variables": sum(v * v for v in comb.values())}
        u, v = grid_iid_group(m, n), grid_extension_group(m, n)
        st = extension_structure(m, n)
        rep["joint"] = {
            "iid_first_column_vs_extension": _verdict(u, v),
            "iid_all_columns_vs_extension": _verdict(_commuting_iid(m, n), v),
            "example_pair": _verdict(*example_pair()),
            "global_order_formula": global_group_order(m, n),
            "global_order_closure": st.order,
            "kernel_order": st.kernel_order,
            "kernel_even": st.kernel_all_even,
        }
    return rep


def report_json(m: int, n: int, include_unitary: bool = True, seed: int = 2024) -> str:
    return json.dumps(symmetry_report(m, n, include_unitary, seed), indent=2)
