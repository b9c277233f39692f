"""SDPA sparse (.dat-s) problem files and CSDP-style solution files.

The standard form here (max <C,X>, <A_i,X> = b_i) is the dual of SDPA's primal,
so C is written as matrix 0 and A_i as matrix i, with b as the cost vector.
Solution files hold the dual vector on the first line, then
``matno blkno i j value`` entries: matno 1 is the dual slack Z, matno 2 is X.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import SdpProblem, SdpSolution, Status, embed_real


class SdpaParseError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.line_no = line_no


def _g(v: float) -> str:
    return f"{float(v):.17g}"


def write_sdpa(p: SdpProblem, path: str | Path, comment: str | None = None) -> None:
    q = embed_real(p)
    lines = [f'"{comment or q.name}']
    lines.append(str(q.m))
    lines.append(str(len(q.blocks)))
    lines.append(" ".join(str(n) for n in q.blocks))
    lines.append(" ".join(_g(v) for v in q.b) if q.m else "")
    entries = []
    for k, (n, c) in enumerate(zip(q.blocks, q.objective)):
        c = np.asarray(c, dtype=float)
        iu, ju = np.triu_indices(n)
        vals = c[iu, ju]
        for i, j, v in zip(iu, ju, vals):
            if v != 0:
                entries.append((0, k + 1, i + 1, j + 1, v))
    for k, (n, a) in enumerate(zip(q.blocks, q.a)):
        coo = a.tocoo()
        i, j = np.divmod(coo.col, n)
        upper = i <= j
        for r, ii, jj, v in zip(coo.row[upper], i[upper], j[upper], coo.data[upper]):
            if v != 0:
                entries.append((int(r) + 1, k + 1, int(ii) + 1, int(jj) + 1, float(v)))
    entries.sort(key=lambda e: e[:4])
    lines.extend(f"{m} {b} {i} {j} {_g(v)}" for m, b, i, j, v in entries)
    Path(path).write_text("\n".join(lines) + "\n")


_SPLIT = re.compile(r"[\s,{}()]+")


def _tokens(line: str) -> list[str]:
    return [t for t in _SPLIT.split(line.strip()) if t]


def read_sdpa(path: str | Path) -> SdpProblem:
    raw = Path(path).read_text().splitlines()
    body = [(no, line) for no, line in enumerate(raw, 1)
            if line.strip() and not line.lstrip().startswith(('"', "*"))]
    it = iter(body)

    def take(what):
        try:
            return next(it)
        except StopIteration:
            raise SdpaParseError(path, len(raw), f"unexpected end of file while reading {what}") from None

    no, line = take("constraint count")
    try:
        m = int(_tokens(line)[0])
    except (ValueError, IndexError):
        raise SdpaParseError(path, no, f"bad constraint count {line!r}") from None
    no, line = take("block count")
    try:
        nblocks = int(_tokens(line)[0])
    except (ValueError, IndexError):
        raise SdpaParseError(path, no, f"bad block count {line!r}") from None
    sizes: list[int] = []
    while len(sizes) < nblocks:
        no, line = take("block sizes")
        try:
            sizes += [int(float(t)) for t in _tokens(line)]
        except ValueError:
            raise SdpaParseError(path, no, f"bad block size list {line!r}") from None
    if len(sizes) != nblocks:
        raise SdpaParseError(path, no, f"expected {nblocks} block sizes, got {len(sizes)}")
    b: list[float] = []
    while len(b) < m:
        no, line = take("right-hand side")
        try:
            b += [float(t) for t in _tokens(line)]
        except ValueError:
            raise SdpaParseError(path, no, f"bad right-hand side {line!r}") from None
    if len(b) != m:
        raise SdpaParseError(path, no, f"expected {m} right-hand side values, got {len(b)}")
    dims = [abs(s) for s in sizes]
    objs = [np.zeros((n, n)) for n in dims]
    trip = [([], [], []) for _ in dims]
    for no, line in it:
        tok = _tokens(line)
        if len(tok) != 5:
            raise SdpaParseError(path, no, f"expected 'matno blkno i j value', got {line!r}")
        try:
            mat, blk, i, j = (int(t) for t in tok[:4])
            v = float(tok[4])
        except ValueError:
            raise SdpaParseError(path, no, f"non-numeric entry {line!r}") from None
        if not (0 <= mat <= m) or not (1 <= blk <= nblocks):
            raise SdpaParseError(path, no, f"matrix/block index out of range in {line!r}")
        n = dims[blk - 1]
        if not (1 <= i <= n and 1 <= j <= n):
            raise SdpaParseError(path, no, f"entry index out of range in {line!r}")
        if sizes[blk - 1] < 0 and i != j:
            raise SdpaParseError(path, no, "off-diagonal entry in a diagonal block")
        i, j = min(i, j) - 1, max(i, j) - 1
        if mat == 0:
            objs[blk - 1][i, j] = v
            objs[blk - 1][j, i] = v
        else:
            r, c, d = trip[blk - 1]
            r.append(mat - 1); c.append(i * n + j); d.append(v)
            if i != j:
                r.append(mat - 1); c.append(j * n + i); d.append(v)
    a = [sp.csr_matrix((d, (r, c)), shape=(m, n * n)) for (r, c, d), n in zip(trip, dims)]
    p = SdpProblem(tuple(dims), objs, a, np.array(b), name=Path(path).stem)
    p.meta["diagonal_blocks"] = [k for k, s in enumerate(sizes) if s < 0]
    return p


def write_solution(sol: SdpSolution, path: str | Path) -> None:
    lines = [" ".join(_g(v) for v in sol.dual)]
    for matno, mats in ((1, sol.slack), (2, sol.primal)):
        for k, x in enumerate(mats):
            x = np.real(np.asarray(x))
            n = x.shape[0]
            iu, ju = np.triu_indices(n)
            for i, j in zip(iu, ju):
                if x[i, j] != 0:
                    lines.append(f"{matno} {k + 1} {i + 1} {j + 1} {_g(x[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_sdpa_solution(path: str | Path, problem: SdpProblem | None = None,
                         blocks: tuple[int, ...] | None = None) -> SdpSolution:
    """Read a solution file; block sizes come from ``problem`` or ``blocks``."""
    raw = Path(path).read_text().splitlines()
    body = [(no, line) for no, line in enumerate(raw, 1)
            if line.strip() and not line.lstrip().startswith(('"', "*"))]
    if not body:
        raise SdpaParseError(path, 1, "empty solution file")
    no, line = body[0]
    try:
        y = np.array([float(t) for t in _tokens(line)])
    except ValueError:
        raise SdpaParseError(path, no, f"bad dual vector line {line!r}") from None
    if problem is not None:
        q = embed_real(problem)
        blocks = q.blocks
    entries = []
    for no, line in body[1:]:
        tok = _tokens(line)
        if len(tok) != 5:
            raise SdpaParseError(path, no, f"expected 'matno blkno i j value', got {line!r}")
        try:
            mat, blk, i, j = (int(t) for t in tok[:4])
            v = float(tok[4])
        except ValueError:
            raise SdpaParseError(path, no, f"non-numeric entry {line!r}") from None
        if mat not in (1, 2):
            raise SdpaParseError(path, no, f"matrix number must be 1 (slack) or 2 (primal), got {mat}")
        entries.append((no, mat, blk, i, j, v))
    if blocks is None:
        nb = max((e[2] for e in entries), default=0)
        dims = [0] * nb
        for _, _, blk, i, j, _ in entries:
            dims[blk - 1] = max(dims[blk - 1], i, j)
        blocks = tuple(dims)
    zs = [np.zeros((n, n)) for n in blocks]
    xs = [np.zeros((n, n)) for n in blocks]
    for no, mat, blk, i, j, v in entries:
        if not 1 <= blk <= len(blocks) or not (1 <= i <= blocks[blk - 1] and 1 <= j <= blocks[blk - 1]):
            raise SdpaParseError(path, no, "entry index out of range")
        tgt = zs if mat == 1 else xs
        tgt[blk - 1][i - 1, j - 1] = v
        tgt[blk - 1][j - 1, i - 1] = v
    pval = dval = float("nan")
    if problem is not None:
        pval = q.objective_value(xs)
        dval = float(q.b @ y) if y.size == q.m else float("nan")
    gap = abs(dval - pval) if np.isfinite(pval) and np.isfinite(dval) else float("nan")
    return SdpSolution(xs, y, zs, pval, dval, gap, Status.OPTIMAL, info={"source": str(path)})
