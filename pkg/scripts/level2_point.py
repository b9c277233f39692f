"""Level-2 outer bound for three-qubit replacement depolarizing noise at one or more q."""
import argparse
import time

from aqec.channels import iid_power, replacement_depolarizing
from aqec.hierarchy import HierarchyProblem, solve_outer


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("q", type=float, nargs="+")
    ap.add_argument("--symmetry", default="auto")
    args = ap.parse_args()
    print("q,value,symmetry,seconds")
    for q in args.q:
        t0 = time.perf_counter()
        hp = HierarchyProblem(iid_power(replacement_depolarizing(q), 3), 2, 2, ppt_marginal=True, ns=True)
        r = solve_outer(hp, args.symmetry, keep_state=False)
        print(f"{q},{r.value:.9f},{r.symmetry},{time.perf_counter() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
