"""Independent SDP oracle: cvxopt on the dual form  min b·y  s.t.  Σ y_i A_i − C ⪰ 0."""
import numpy as np
from cvxopt import matrix, solvers

from aqec.sdp import SdpSolution, Status, embed_real, presolve


def cvx_solve(p, tol=1e-9):
    """Solve a (real-embedded, presolved) copy of ``p``; returns (problem, solution)."""
    q = presolve(embed_real(p)).problem
    gs, hs = [], []
    for n, c, a in zip(q.blocks, q.objective, q.a):
        rows = a.toarray().reshape(q.m, n, n)
        # column-major vec of −A_i
        g = -np.transpose(rows, (0, 2, 1)).reshape(q.m, n * n).T
        gs.append(matrix(np.ascontiguousarray(g, dtype=float)))
        hs.append(matrix(-np.asarray(c, dtype=float)))
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": 200}
    res = solvers.sdp(matrix(q.b.astype(float)), Gs=gs, hs=hs, options=opts)
    xs = [np.array(z) for z in res["zs"]]
    ss = [np.array(s) for s in res["ss"]]
    y = np.array(res["x"]).ravel()
    pval = q.objective_value(xs)
    dval = float(q.b @ y)
    status = Status.OPTIMAL if res["status"] == "optimal" else Status.INACCURATE
    return q, SdpSolution(xs, y, ss, pval, dval, abs(dval - pval), status)
