"""Expander families, constant-block projections, polynomial band
approximation of spectral projections, and the multi-column counterexample
space built from them."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np
from numpy.polynomial import chebyshev as C

from .ideals import IdealFamily
from .operator import BandOperator
from .space import GraphSpace, SpaceError


class ExpanderError(ValueError):
    pass


@dataclass(frozen=True)
class RegularGraph:
    n: int
    degree: int
    edges: tuple
    seed: int
    second_eigenvalue: float  # modulus of the largest non-trivial eigenvalue

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A


@dataclass(frozen=True)
class ExpanderFamily:
    graphs: tuple  # RegularGraph, sizes strictly increasing
    gap_threshold: float

    def __post_init__(self):
        sizes = [g.n for g in self.graphs]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ExpanderError("graph sizes must strictly increase")
        for g in self.graphs:
            if g.second_eigenvalue > self.gap_threshold:
                raise ExpanderError(
                    f"graph of size {g.n} misses the gap threshold")


def second_eigenvalue(A, degree):
    """Modulus of the largest adjacency eigenvalue besides the trivial one
    at `degree` (dense solve; the certificate for acceptance)."""
    evals = np.linalg.eigvalsh(A)
    # drop one copy of the trivial eigenvalue
    idx = int(np.argmin(np.abs(evals - degree)))
    rest = np.delete(evals, idx)
    return float(np.abs(rest).max()) if rest.size else 0.0


def random_regular_expander(n, d, lam_max, seed=0, retries=20):
    """Random simple d-regular graph, resampled until the dense eigensolver
    certifies second eigenvalue modulus <= lam_max."""
    if (n * d) % 2 != 0:
        raise ExpanderError(f"n*d = {n}*{d} must be even")
    if d < 3:
        raise ExpanderError("degree must be at least 3")
    best = None
    for attempt in range(retries):
        g = nx.random_regular_graph(d, n, seed=seed + attempt)
        if not nx.is_connected(g):
            continue
        edges = tuple(sorted((min(u, v), max(u, v)) for u, v in g.edges()))
        graph = RegularGraph(n=n, degree=d, edges=edges, seed=seed + attempt,
                             second_eigenvalue=0.0)
        lam = second_eigenvalue(graph.adjacency(), d)
        graph = RegularGraph(n=n, degree=d, edges=edges, seed=seed + attempt,
                             second_eigenvalue=lam)
        if lam <= lam_max:
            return graph
        if best is None or lam < best.second_eigenvalue:
            best = graph
    raise ExpanderError(
        f"no graph with gap <= {lam_max} in {retries} tries; best was "
        f"{best.second_eigenvalue if best else float('nan'):.4f}")


def constant_projection(space, blocks):
    """Direct sum over blocks of the projections onto constants: entries
    1/|B| on B x B."""
    blocks = [sorted(b) for b in blocks]
    seen = set()
    for b in blocks:
        bs = set(b)
        if seen & bs:
            raise ExpanderError("projection blocks overlap")
        seen |= bs
    rows, cols, vals = [], [], []
    for b in blocks:
        w = 1.0 / len(b)
        for x in b:
            for y in b:
                rows.append(x)
                cols.append(y)
                vals.append(w)
    return BandOperator(space, rows, cols, vals)


def chebyshev_degree_for(gap_ratio, target):
    """Least degree m with the Chebyshev envelope 1 / T_m(1 / b) <= target
    on [-b, b], b = gap_ratio."""
    inv = 1.0 / gap_ratio
    m = 0
    while True:
        m += 1
        if 1.0 / _cheb_at(m, inv) <= target:
            return m
        if m > 1000:
            raise ExpanderError("no feasible approximation degree")


def _cheb_at(m, x):
    # T_m(x) for x >= 1
    return float(np.cosh(m * np.arccosh(x)))


def chebyshev_band_approx(graph, lam_certificate, degree, space=None,
                          offset=0):
    """Degree-`degree` polynomial band approximation of the projection onto
    constants of a connected regular graph.

    Uses the scaled Chebyshev polynomial T_m((A/d) / b) / T_m(1 / b) with
    b = lam_certificate / d, which is 1 at the top of the spectrum and at
    most 1 / T_m(1 / b) on the certified bulk; that envelope is returned as
    the error bound.  Entries can be placed into a larger ambient space via
    `offset`.
    """
    d = graph.degree
    if lam_certificate >= d:
        raise ExpanderError("no spectral gap certified; approximation refused")
    b = lam_certificate / d
    A = graph.adjacency() / d
    evals = np.sort(np.linalg.eigvalsh(A))
    bulk = evals[:-1]  # everything except the trivial eigenvalue at 1
    distinct = np.unique(np.round(bulk, 9))
    if degree == 0:
        mat = np.eye(graph.n)
        poly_at = lambda x: np.ones_like(x)
    elif distinct.size <= degree:
        # spectrum small enough to interpolate exactly: p vanishes on every
        # bulk eigenvalue and p(1) = 1, so p(A) is the projection itself
        denom = float(np.prod(1.0 - distinct))
        mat = np.eye(graph.n) / denom
        for r in distinct:
            mat = mat @ (A - r * np.eye(graph.n))
        poly_at = lambda x: np.prod(x[:, None] - distinct[None, :],
                                    axis=1) / denom
    else:
        scale = _cheb_at(degree, 1.0 / b)
        # evaluate T_m(A / b) by the three-term recurrence
        M = A / b
        t_prev = np.eye(graph.n)
        t_cur = M.copy()
        for _ in range(degree - 1):
            t_prev, t_cur = t_cur, 2.0 * (M @ t_cur) - t_prev
        mat = t_cur / scale

        def poly_at(x, _s=scale, _b=b):
            y = np.asarray(x, dtype=float) / _b
            out = np.empty_like(y)
            inside = np.abs(y) <= 1.0
            out[inside] = np.cos(degree * np.arccos(y[inside]))
            big = ~inside
            out[big] = np.sign(y[big]) ** degree * \
                np.cosh(degree * np.arccosh(np.abs(y[big])))
            return out / _s
    # exact bound via the dense eigensolve: || a - P || is the largest
    # |p| over the bulk spectrum (padded slightly for float slack)
    bound = float(np.abs(poly_at(np.asarray(bulk))).max()) + 1e-12 \
        if bulk.size else 0.0
    if space is None:
        space = GraphSpace(graph.edges, n=graph.n)
    rows, cols = np.nonzero(np.abs(mat) >= 1e-14)
    op = BandOperator(space, rows + offset, cols + offset, mat[rows, cols])
    return op, bound


@dataclass(frozen=True)
class ColumnSpace:
    """Disjoint union of graph blocks arranged in columns, with block
    separations given by an outpost schedule indexed by i + j."""

    space: GraphSpace
    blocks: tuple       # tuple of (i, j, point tuple)
    columns: tuple      # tuple of point frozensets, one per i

    def column(self, i):
        return self.columns[i - 1]

    def block_points(self, i, j):
        for bi, bj, pts in self.blocks:
            if (bi, bj) == (i, j):
                return pts
        raise KeyError((i, j))


def build_column_space(block_graphs, j_max, separation_schedule):
    """Blocks Y_{i,j} (copies of graph i for j = 1..j_max) with the graph
    metric inside each block and outpost distances s_{i+j-2} across blocks,
    so cross distances grow with i + j as the schedule increases."""
    sched = list(separation_schedule)
    n_cols = len(block_graphs)
    need = n_cols + j_max - 1
    if len(sched) < need:
        raise ExpanderError(
            f"separation schedule has {len(sched)} entries, need {need}")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ExpanderError("separation schedule must strictly increase")
    edges = []
    comp_sched = []
    blocks = []
    offset = 0
    for i, graph in enumerate(block_graphs, start=1):
        for j in range(1, j_max + 1):
            for u, v in graph.edges:
                edges.append((u + offset, v + offset))
            blocks.append((i, j, tuple(range(offset, offset + graph.n))))
            comp_sched.append(sched[i + j - 2])
            offset += graph.n
    space = GraphSpace(edges, n=offset, separation_schedule=comp_sched)
    columns = []
    for i in range(1, n_cols + 1):
        pts = frozenset(p for bi, _, blk in blocks if bi == i for p in blk)
        columns.append(pts)
    return ColumnSpace(space=space, blocks=tuple(blocks),
                       columns=tuple(columns))


def expander_column_space(family, j_max, separation_schedule,
                          k_grid=(0, 1, 2, 3, 5, 8)):
    """The counterexample pipeline space: expander columns, the block
    projection onto constants, and the ideal family generated by the
    columns.  Returns (ColumnSpace, P, family)."""
    col = build_column_space(family.graphs, j_max, separation_schedule)
    P = constant_projection(col.space,
                            [pts for _, _, pts in col.blocks])
    ideal = IdealFamily(col.space, tuple(col.columns), k_grid=tuple(k_grid))
    return col, P, ideal


def resistance_blocks(family, kappa_target, S_schedule,
                      separation_schedule=None, approx_slack=0.05):
    """Chebyshev-approximated constant projections on growing expanders,
    arranged as disjoint blocks of a common space, sized so that each block
    resists localization at its scheduled window diameter.

    Growth condition per block: sqrt(max ball(S_n) / n_n) + approx error
    must not exceed kappa_target.  Returns (space, [(T_n, B_n)], certified
    kappa).
    """
    graphs = family.graphs
    if len(S_schedule) != len(graphs):
        raise ExpanderError("schedule length does not match family size")
    if separation_schedule is None:
        base = 4.0 * max(S_schedule) + 4.0
        separation_schedule = [base * (k + 1) for k in range(len(graphs))]
    edges = []
    offsets = []
    offset = 0
    for g in graphs:
        for u, v in g.edges:
            edges.append((u + offset, v + offset))
        offsets.append(offset)
        offset += g.n
    space = GraphSpace(edges, n=offset,
                       separation_schedule=separation_schedule)
    blocks = []
    constants = []
    for g, off, S in zip(graphs, offsets, S_schedule):
        sub = GraphSpace(g.edges, n=g.n)
        ball_bound = sub.geometry_profile(int(np.floor(S / 2.0)))
        slack = kappa_target - np.sqrt(ball_bound / g.n)
        if slack <= 0:
            raise ExpanderError(
                f"block of size {g.n} cannot resist windows of diameter {S} "
                f"at kappa {kappa_target}")
        delta = min(approx_slack, 0.9 * slack)
        m = chebyshev_degree_for(g.second_eigenvalue / g.degree, delta)
        op, bound = chebyshev_band_approx(g, g.second_eigenvalue, m,
                                          space=space, offset=off)
        pts = frozenset(range(off, off + g.n))
        blocks.append((op, pts))
        constants.append(np.sqrt(ball_bound / g.n) + bound)
    from .witness import resistance_check
    ok, details = resistance_check(blocks, kappa_target, S_schedule)
    if not ok:
        raise ExpanderError("computed blocks fail their own certificate")
    certified = max(d["constant"] for d in details)
    return space, blocks, certified
