"""Almost-invariant partition witnesses, positive-type kernels, and the
windowed operator-norm localization search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operator import OperatorError, operator_norm
from .space import GridSpace

L1_NORMALIZATION_TOL = 1e-12
PSD_EIGENVALUE_TOL = -1e-9
PSD_SUBSET_LIMIT = 2000


class WitnessError(ValueError):
    pass


@dataclass(frozen=True)
class WitnessFunction:
    """Family of non-negative unit ell^1 vectors xi_x, one per domain point,
    each supported within distance `support_radius` of its anchor."""

    domain: tuple
    vectors: dict  # x -> {point: weight}
    support_radius: float

    def validate(self, space):
        if not self.domain:
            raise WitnessError("empty witness domain")
        for x in self.domain:
            vec = self.vectors[x]
            total = sum(vec.values())
            if abs(total - 1.0) > L1_NORMALIZATION_TOL:
                raise WitnessError(f"vector at {x} has l1 mass {total}")
            if any(w < 0 for w in vec.values()):
                raise WitnessError(f"vector at {x} has negative weights")
            ball = set(space.ball(x, self.support_radius))
            if not set(vec) <= ball:
                raise WitnessError(
                    f"vector at {x} escapes its support ball")
        return self


@dataclass(frozen=True)
class Kernel:
    points: tuple
    matrix: np.ndarray

    def value(self, x, y):
        idx = {p: i for i, p in enumerate(self.points)}
        return float(self.matrix[idx[x], idx[y]])


@dataclass(frozen=True)
class LocalizationReport:
    S: float
    best_constant: float
    window_norm: float
    operator_norm: float
    witness_window: tuple
    witness_center: int
    witness_vector: dict
    mode: str


def averaging_witness_grid(space, D, S):
    """xi_x = normalized characteristic function of B(x, S)."""
    if S < 1:
        raise WitnessError("averaging radius must be at least 1")
    vectors = {}
    for x in D:
        ball = space.ball(x, S)
        w = 1.0 / len(ball)
        vectors[x] = {p: w for p in ball}
    return WitnessFunction(tuple(sorted(D)), vectors, S)


def delta_witness(space, D):
    """Point masses; the zero-quality baseline."""
    return WitnessFunction(tuple(sorted(D)), {x: {x: 1.0} for x in D}, 0)


def l1_difference(u, v):
    keys = set(u) | set(v)
    return sum(abs(u.get(k, 0.0) - v.get(k, 0.0)) for k in keys)


def check_partition_witness(space, witness, R):
    """Max of ||xi_x - xi_y||_1 over domain pairs at distance <= R, and the
    pair achieving it."""
    witness.validate(space)
    domain = set(witness.domain)
    worst, worst_pair = 0.0, None
    for x in witness.domain:
        for y in space.ball(x, R):
            if y <= x or y not in domain:
                continue
            var = l1_difference(witness.vectors[x], witness.vectors[y])
            if var > worst:
                worst, worst_pair = var, (x, y)
    return worst, worst_pair


def kernel_from_witness(witness, space=None):
    """Gram kernel of the square-rooted witness vectors.

    The square root carries unit ell^1 vectors to unit ell^2 vectors, so
    k(x, x) = 1, k is symmetric, and k vanishes beyond twice the support
    radius."""
    domain = witness.domain
    support = sorted({p for x in domain for p in witness.vectors[x]})
    idx = {p: i for i, p in enumerate(support)}
    V = np.zeros((len(domain), len(support)))
    for i, x in enumerate(domain):
        for p, w in witness.vectors[x].items():
            V[i, idx[p]] = np.sqrt(w)
    return Kernel(points=tuple(domain), matrix=V @ V.T)


def check_positive_type(kernel, subsets):
    """True when every principal submatrix over the given index subsets is
    positive semidefinite (least eigenvalue above -1e-9)."""
    idx = {p: i for i, p in enumerate(kernel.points)}
    for subset in subsets:
        subset = sorted(subset)
        if len(subset) > PSD_SUBSET_LIMIT:
            raise WitnessError(
                f"subset of {len(subset)} points exceeds the "
                f"{PSD_SUBSET_LIMIT} limit")
        rows = [idx[p] for p in subset]
        sub = kernel.matrix[np.ix_(rows, rows)]
        if np.linalg.eigvalsh(sub)[0] < PSD_EIGENVALUE_TOL:
            return False
    return True


def default_margin(space, S):
    """Grid boundary points within S of an edge; finite windows of a grid
    under-report interior norms near edges."""
    if not isinstance(space, GridSpace):
        return frozenset()
    out = set()
    for x in space.points:
        c = space.coords(x)
        if any(v < S or v >= space.side - S for v in c):
            out.add(x)
    return frozenset(out)


def candidate_windows(space, S, margin):
    """(center, window) candidates of diameter <= S, one per allowed center.

    One-dimensional grids use runs of S + 1 consecutive points (the maximal
    diameter-S sets there); other spaces use balls of radius S / 2."""
    S = int(S)
    windows = []
    if isinstance(space, GridSpace) and space.dims == 1:
        n = space.n
        for c in space.points:
            if c in margin:
                continue
            lo = max(0, min(c - (S + 1) // 2, n - 1 - S))
            hi = min(n - 1, lo + S)
            windows.append((c, tuple(range(lo, hi + 1))))
    else:
        for c in space.points:
            if c in margin:
                continue
            windows.append((c, tuple(space.ball(c, S / 2.0))))
    return windows


def localization_constant(T, S, margin=None, mode="two_sided", tol=1e-9):
    """Sweep diameter-S windows and report the best localized-norm fraction.

    mode "two_sided" measures the corner norm ||chi_W T chi_W||; mode
    "column" measures ||T chi_W||, the best norm achievable on unit vectors
    supported in the window.  Ties break toward the lowest center id.
    """
    if T.is_zero():
        raise WitnessError("localization of the zero operator is undefined")
    if S < 0:
        raise WitnessError("window diameter must be non-negative")
    space = T.space
    if margin is None:
        margin = default_margin(space, S)
    windows = [w for w in candidate_windows(space, S, margin) if w[1]]
    if not windows:
        raise WitnessError("no candidate windows left after margin exclusion")

    dense = T.to_dense() if space.n <= 2000 else None
    if mode == "column":
        gram_op = T.adjoint() @ T
        gram = gram_op.to_dense() if space.n <= 2000 else gram_op.to_csr()
    elif mode != "two_sided":
        raise WitnessError(f"unknown localization mode {mode!r}")

    best_norm, best_center, best_window, best_vec = -1.0, None, None, None
    for center, window in windows:
        w = np.asarray(window)
        if mode == "two_sided":
            if dense is not None:
                block = dense[np.ix_(w, w)]
            else:
                block = T.to_csr()[np.ix_(w, w)].toarray()
            u, s, vh = np.linalg.svd(block)
            norm, vec = float(s[0]), np.conj(vh[0])
        else:
            sub = (gram[np.ix_(w, w)] if isinstance(gram, np.ndarray)
                   else gram[np.ix_(w, w)].toarray())
            evals, evecs = np.linalg.eigh(sub)
            norm, vec = float(np.sqrt(max(evals[-1], 0.0))), evecs[:, -1]
        if norm > best_norm:
            best_norm, best_center, best_window = norm, center, window
            best_vec = vec
    op_norm = operator_norm(T, tol)
    witness_vector = {int(p): complex(v)
                      for p, v in zip(best_window, best_vec)
                      if abs(v) >= 1e-15}
    return LocalizationReport(
        S=S, best_constant=best_norm / op_norm, window_norm=best_norm,
        operator_norm=op_norm, witness_window=tuple(best_window),
        witness_center=int(best_center), witness_vector=witness_vector,
        mode=mode)


def resistance_check(blocks, kappa, S_schedule, tol=1e-9, mode="column"):
    """Verify a localization-resistance certificate.

    blocks: list of (operator, point set) pairs on a common space, pairwise
    disjoint, each of norm one (within 5%).  True when every block operator
    localizes to at most kappa at its scheduled window diameter.
    """
    if len(blocks) != len(S_schedule):
        raise WitnessError("schedule length does not match block count")
    if any(b >= a for a, b in zip(S_schedule[1:], S_schedule[:-1])):
        raise WitnessError("window schedule must be strictly increasing")
    sets = [frozenset(b) for _, b in blocks]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if sets[i] & sets[j]:
                raise WitnessError(f"blocks {i} and {j} overlap")
    details = []
    ok = True
    for (op, block), S in zip(blocks, S_schedule):
        if op.is_zero():
            details.append({"S": S, "constant": 0.0, "norm": 0.0})
            continue
        norm = operator_norm(op, tol)
        if abs(norm - 1.0) > 0.05:
            raise WitnessError(f"block operator norm {norm:.4f} is not ~1")
        report = localization_constant(op, S, margin=frozenset(),
                                       mode=mode, tol=tol)
        details.append({"S": S, "constant": report.best_constant,
                        "norm": norm})
        if report.best_constant > kappa:
            ok = False
    return ok, details
