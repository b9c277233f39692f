"""Primal-dual interior point method (HKM direction, Mehrotra predictor-corrector).

Works on real symmetric blocks; complex problems are embedded first.  The
Schur complement is formed densely and factored by Cholesky.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .model import SdpProblem, SdpSolution, Status, embed_real, presolve, unembed_matrix

MAX_BLOCK = 600
MAX_SCHUR = 12000


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 100
    step: float = 0.95
    presolve_tol: float = 1e-12
    verbose: bool = False


class _Data:
    """Scaled real problem in the layout the iterations need."""

    def __init__(self, p: SdpProblem):
        self.blocks = p.blocks
        self.m = p.m
        a_all = sp.hstack(p.a, format="csr") if p.m else None
        norms = np.sqrt(np.asarray(a_all.multiply(a_all).sum(axis=1)).ravel()) if p.m else np.zeros(0)
        norms[norms == 0] = 1.0
        self.row_scale = norms
        scale = sp.diags(1 / norms)
        self.b = p.b / norms
        self.a = [sp.csr_matrix(scale @ a) for a in p.a]
        cn = np.sqrt(sum(np.sum(np.asarray(c) ** 2) for c in p.objective))
        self.c_scale = max(1.0, cn)
        self.c = [np.asarray(c, dtype=float) / self.c_scale for c in p.objective]
        self.rows = []
        self.dense = []
        for n, a in zip(self.blocks, self.a):
            rows = np.flatnonzero(np.diff(a.indptr))
            sub = a[rows]
            self.rows.append(rows)
            density = sub.nnz / max(1, sub.shape[0] * sub.shape[1])
            self.dense.append(sub.toarray() if density > 0.1 else None)

    def amap(self, xs) -> np.ndarray:
        out = np.zeros(self.m)
        for a, x in zip(self.a, xs):
            out += a @ x.reshape(-1)
        return out

    def aadj(self, y: np.ndarray) -> list[np.ndarray]:
        return [(a.T @ y).reshape(n, n) for n, a in zip(self.blocks, self.a)]

    def schur(self, xs, zinvs) -> np.ndarray:
        m = np.zeros((self.m, self.m))
        for n, a, rows, dense, x, zi in zip(self.blocks, self.a, self.rows, self.dense, xs, zinvs):
            if rows.size == 0:
                continue
            sub = dense if dense is not None else a[rows]
            if n <= 12:
                k = np.kron(x, zi)
                if dense is not None:
                    blk = (dense @ k) @ dense.T
                else:
                    t = np.asarray((sub @ k))
                    blk = np.asarray((sub @ t.T)).T
            else:
                # X A_j Z^{-1} per row, then pair with every A_i
                blk = np.empty((rows.size, rows.size))
                csub = sub if dense is None else None
                step = max(1, int(2e7 // (n * n)))
                for s in range(0, rows.size, step):
                    e = min(rows.size, s + step)
                    g = (dense[s:e] if dense is not None else csub[s:e].toarray()).reshape(e - s, n, n)
                    t = np.matmul(np.matmul(x, g), zi).reshape(e - s, n * n)
                    blk[:, s:e] = dense @ t.T if dense is not None else np.asarray(csub @ t.T)
            m[np.ix_(rows, rows)] += blk
        return (m + m.T) / 2


def _max_step(x_chol: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD, given the Cholesky factor of X."""
    li = sla.solve_triangular(x_chol, np.eye(x_chol.shape[0]), lower=True)
    w = np.linalg.eigvalsh(li @ dx @ li.T)
    lo = w.min()
    return np.inf if lo >= 0 else -1.0 / lo


def _chol(x: np.ndarray) -> np.ndarray | None:
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return None


def solve(p: SdpProblem, tol: float = 1e-8, options: SolverOptions | None = None) -> SdpSolution:
    opts = options or SolverOptions(tol=tol)
    opts.tol = tol if options is None else opts.tol
    if opts.tol < 1e-9 * (1 - 1e-12):
        raise ValueError("tolerance below 1e-9 is not supported by the dense solver")
    for n in p.blocks:
        if n > MAX_BLOCK:
            raise ValueError(f"block of dimension {n} exceeds the dense solver guard {MAX_BLOCK}")
    t0 = time.perf_counter()
    orig = p
    realp = embed_real(p)
    pre = presolve(realp, opts.presolve_tol)
    if pre.inconsistency > 1e-8:
        return _infeasible(orig, realp, pre, t0)
    q = pre.problem
    if q.m > MAX_SCHUR:
        raise ValueError(f"{q.m} independent constraints exceed the Schur complement guard {MAX_SCHUR}")
    sol = _ipm(q, opts)
    # map back
    y_full = np.zeros(realp.m)
    y_full[pre.kept] = sol.dual
    sol.dual = y_full
    if orig.is_complex:
        sol.primal = [unembed_matrix(x) for x in sol.primal]
        sol.slack = [unembed_matrix(z) for z in sol.slack]
    sol.seconds = time.perf_counter() - t0
    sol.info["presolve_kept"] = int(pre.kept.size)
    sol.info["presolve_dropped"] = int(realp.m - pre.kept.size)
    return sol


def _infeasible(orig, realp, pre, t0) -> SdpSolution:
    xs = [np.zeros((n, n)) for n in orig.blocks]
    return SdpSolution(xs, np.zeros(realp.m), [x.copy() for x in xs], -np.inf, -np.inf, np.inf,
                       Status.INFEASIBLE, 0, seconds=time.perf_counter() - t0,
                       info={"inconsistency": pre.inconsistency})


def _ipm(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    d = _Data(p)
    nb = len(d.blocks)
    ntot = sum(d.blocks)
    # initial point
    xs, zs = [], []
    for n, a, c in zip(d.blocks, d.a, d.c):
        anorm = np.sqrt(np.asarray(a.multiply(a).sum(axis=1)).ravel()) if d.m else np.zeros(1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(anorm > 0, (1 + np.abs(d.b)) / (1 + anorm), 0)
        xi = max(10.0, np.sqrt(n), np.sqrt(n) * np.max(ratio, initial=0))
        eta = max(10.0, np.sqrt(n), np.max(anorm, initial=0), np.linalg.norm(c))
        xs.append(xi * np.eye(n))
        zs.append(eta * np.eye(n))
    y = np.zeros(d.m)
    bnorm = np.linalg.norm(d.b)
    cnorm = np.sqrt(sum(np.sum(c * c) for c in d.c))
    status = Status.INACCURATE
    best = None
    it = 0
    hist = []
    for it in range(1, opts.max_iters + 1):
        rp = d.b - d.amap(xs)
        aty = d.aadj(y)
        rd = [at - z - c for at, z, c in zip(aty, zs, d.c)]
        pobj = sum(np.sum(c * x) for c, x in zip(d.c, xs))
        dobj = float(d.b @ y)
        mu = sum(np.sum(x * z) for x, z in zip(xs, zs)) / ntot
        pinf = np.linalg.norm(rp) / (1 + bnorm)
        dinf = np.sqrt(sum(np.sum(r * r) for r in rd)) / (1 + cnorm)
        relgap = abs(dobj - pobj) / (1 + abs(pobj) + abs(dobj))
        hist.append((pobj, dobj, pinf, dinf, relgap))
        if opts.verbose:
            print(f"{it:3d} p={pobj:+.10e} d={dobj:+.10e} pinf={pinf:.1e} dinf={dinf:.1e} gap={relgap:.1e} mu={mu:.1e}")
        merit = max(pinf, dinf, relgap)
        if best is None or merit < best[0]:
            best = (merit, [x.copy() for x in xs], y.copy(), [z.copy() for z in zs], pobj, dobj, pinf, dinf, relgap)
        if merit <= opts.tol:
            status = Status.OPTIMAL
            break
        # infeasibility heuristics
        ynorm = np.linalg.norm(y)
        if it > 20 and dobj < -1e8 * max(1.0, abs(pobj)) and dinf < 1e-6:
            status = Status.INFEASIBLE
            break
        xnorm = max(np.linalg.norm(x) for x in xs)
        if it > 20 and pobj > 1e8 and pinf < 1e-6:
            status = Status.UNBOUNDED
            break
        lx = [_chol(x) for x in xs]
        lz = [_chol(z) for z in zs]
        if any(l is None for l in lx + lz):
            break
        zinv = [sla.cho_solve((l, True), np.eye(l.shape[0])) for l in lz]
        zinv = [(zi + zi.T) / 2 for zi in zinv]
        mmat = d.schur(xs, zinv)
        try:
            fac = sla.cho_factor(mmat, lower=True, check_finite=False)
            solve_m = lambda r: sla.cho_solve(fac, r, check_finite=False)
        except np.linalg.LinAlgError:
            reg = 1e-12 * max(1.0, np.max(np.diag(mmat)))
            try:
                fac = sla.cho_factor(mmat + reg * np.eye(d.m), lower=True, check_finite=False)
                solve_m = lambda r: sla.cho_solve(fac, r, check_finite=False)
            except np.linalg.LinAlgError:
                lu = sla.lu_factor(mmat + reg * np.eye(d.m))
                solve_m = lambda r: sla.lu_solve(lu, r)

        def direction(sigma_mu, corr):
            base = []
            for k in range(nb):
                t = sigma_mu * zinv[k] - xs[k] - xs[k] @ rd[k] @ zinv[k]
                if corr is not None:
                    t = t + corr[k]
                base.append(t)
            h = d.amap(base) - rp
            dy = solve_m(h)
            atdy = d.aadj(dy)
            dz = [atdy[k] + rd[k] for k in range(nb)]
            dx = []
            for k in range(nb):
                t = sigma_mu * zinv[k] - xs[k] - xs[k] @ dz[k] @ zinv[k]
                if corr is not None:
                    t = t + corr[k]
                dx.append((t + t.T) / 2)
            return dx, dy, dz

        def steps(dx, dz):
            ap = min(_max_step(l, v) for l, v in zip(lx, dx))
            ad = min(_max_step(l, v) for l, v in zip(lz, dz))
            return ap, ad

        dx, dy, dz = direction(0.0, None)
        ap, ad = steps(dx, dz)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(np.sum((x + ap * u) * (z + ad * v)) for x, u, z, v in zip(xs, dx, zs, dz)) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr = [-(u @ v @ zi) for u, v, zi in zip(dx, dz, zinv)]
        dx, dy, dz = direction(sigma * mu, corr)
        ap, ad = steps(dx, dz)
        ap = min(1.0, opts.step * ap)
        ad = min(1.0, opts.step * ad)
        xs = [x + ap * u for x, u in zip(xs, dx)]
        xs = [(x + x.T) / 2 for x in xs]
        y = y + ad * dy
        zs = [z + ad * v for z, v in zip(zs, dz)]
        zs = [(z + z.T) / 2 for z in zs]
    else:
        it = opts.max_iters
    merit, bx, by, bz, pobj, dobj, pinf, dinf, relgap = best
    if status == Status.OPTIMAL:
        bx, by, bz = xs, y, zs
        pobj = sum(np.sum(c * x) for c, x in zip(d.c, xs))
        dobj = float(d.b @ y)
    cs = d.c_scale
    primal = [x for x in bx]
    slack = [z * cs for z in bz]
    dual = by / d.row_scale * cs
    pval = pobj * cs
    dval = dobj * cs
    return SdpSolution(primal, dual, slack, float(pval), float(dval), float(abs(dval - pval)), status, it,
                       float(pinf), float(dinf), info={"relgap": float(relgap), "history": hist})
