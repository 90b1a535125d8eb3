"""
Dense two-phase simplex with Bland's rule, plus the LP-based helpers used by
the benchmark sampler: variable supports, Frechet boxes and sequential-LP
sampling.
"""
from dataclasses import dataclass

import numpy as np

from .polytope import PolytopeError

PIVOT_TOL = 1e-9


class IterationLimitError(RuntimeError):
    """Simplex exceeded its pivot budget."""


class InfeasibleError(ValueError):
    """The constraint system has no feasible point."""


@dataclass
class LinearProgram:
    """Maximize ``c @ x`` subject to rows and bounds.

    ``A_eq @ x = b_eq``, ``A_ub @ x <= b_ub`` and ``lower <= x <= upper``.
    Missing bounds default to ``0 <= x < inf``.
    """

    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        self.lower = np.zeros(n) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self):
        return self.c.size


def _rows(A, b, n, name):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.size, n):
        raise ValueError(f"A_{name} has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LPResult:
    status: str
    x: np.ndarray = None
    value: float = None

    @property
    def ok(self):
        return self.status == "optimal"


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _simplex(T, basis, allowed, max_iter):
    """Minimize the last row of tableau ``T`` in place with Bland's rule."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        cost = T[-1, :-1]
        cand = np.flatnonzero((cost < -PIVOT_TOL) & allowed)
        if cand.size == 0:
            return "optimal"
        j = cand[0]
        col = T[:m, j]
        pos = col > PIVOT_TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + PIVOT_TOL * max(1.0, abs(best)))
        r = ties[np.argmin(np.asarray(basis)[ties])]
        _pivot(T, r, j)
        basis[r] = j
    raise IterationLimitError(f"simplex did not terminate in {max_iter} pivots")


def _standard_form(lp):
    """Rewrite as ``A y = b, y >= 0`` with ``x = x0 + S y``."""
    n = lp.n
    cols, x0 = [], np.zeros(n)
    extra_rows, extra_b = [], []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            x0[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                extra_rows.append(len(cols) - 1)
                extra_b.append(hi - lo)
        elif np.isfinite(hi):
            x0[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    S = np.array(cols).T
    k = S.shape[1]
    Aeq = lp.A_eq @ S
    beq = lp.b_eq - lp.A_eq @ x0
    Aub = lp.A_ub @ S
    bub = lp.b_ub - lp.A_ub @ x0
    if extra_rows:
        U = np.zeros((len(extra_rows), k))
        U[np.arange(len(extra_rows)), extra_rows] = 1.0
        Aub = np.vstack([Aub, U])
        bub = np.concatenate([bub, extra_b])
    n_slack = Aub.shape[0]
    A = np.vstack([np.hstack([Aeq, np.zeros((Aeq.shape[0], n_slack))]),
                   np.hstack([Aub, np.eye(n_slack)])])
    b = np.concatenate([beq, bub])
    c = np.concatenate([lp.c @ S, np.zeros(n_slack)])
    return A, b, c, S, x0, k


def solve(lp, max_iter=50000):
    """Solve ``lp`` with a dense two-phase simplex.

    Returns
    -------
    LPResult
        ``status`` is ``optimal``, ``infeasible`` or ``unbounded``.
    """
    A, b, c, S, x0, k = _standard_form(lp)
    m, N = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase one: artificial per row
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :N] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(N, N + m))
    allowed = np.ones(N + m, dtype=bool)
    _simplex(T, basis, allowed, max_iter)
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if -T[-1, -1] > 1e-9 * scale:
        return LPResult("infeasible")
    # drive artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= N:
            nz = np.flatnonzero(np.abs(T[r, :N]) > PIVOT_TOL)
            if nz.size == 0:
                continue
            _pivot(T, r, nz[0])
            basis[r] = nz[0]
        keep.append(r)
    T2 = np.zeros((len(keep) + 1, N + 1))
    T2[:-1, :N] = T[keep, :N]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]
    cost = -c
    T2[-1, :N] = cost
    for r, j in enumerate(basis):
        T2[-1] -= cost[j] * T2[r]
    status = _simplex(T2, basis, np.ones(N, dtype=bool), max_iter)
    if status == "unbounded":
        return LPResult("unbounded")
    y = np.zeros(N)
    for r, j in enumerate(basis):
        y[j] = T2[r, -1]
    x = x0 + S @ y[:k]
    return LPResult("optimal", x, float(lp.c @ x))


def frechet_interval(b1, b2):
    """Frechet-Hoeffding box ``[max(0, b1 + b2 - 1), min(b1, b2)]``."""
    return max(0.0, b1 + b2 - 1.0), min(b1, b2)


def _reduced_system(poly, fixed):
    """Rows of ``poly`` with pinned cells substituted out."""
    n = poly.n
    free = np.ones(n, dtype=bool)
    val = np.zeros(n)
    for i, v in fixed.items():
        free[i] = False
        val[i] = v
    Aeq, beq = poly.effective_equalities()
    C, d = poly.inequality_system()
    return (free, Aeq[:, free], beq - Aeq[:, ~free] @ val[~free],
            C[:, free], d - C[:, ~free] @ val[~free])


def variable_support(poly, cell, fixed=None):
    """Range of ``p[cell]`` over ``poly`` with the cells in ``fixed`` pinned.

    Parameters
    ----------
    poly : ConstraintPolytope
    cell : int
    fixed : dict[int, float], optional

    Returns
    -------
    (float, float)
    """
    fixed = fixed or {}
    if cell in fixed:
        return fixed[cell], fixed[cell]
    free, Aeq, beq, C, d = _reduced_system(poly, fixed)
    pos = int(np.flatnonzero(free).searchsorted(cell))
    c = np.zeros(Aeq.shape[1])
    c[pos] = 1.0
    out = []
    for sign in (-1.0, 1.0):
        res = solve(LinearProgram(sign * c, Aeq, beq, C, d, lower=poly.kappa))
        if res.status == "infeasible":
            raise InfeasibleError(f"pins {sorted(fixed)} leave no feasible point")
        if not res.ok:
            raise PolytopeError("cell support is unbounded")
        out.append(res.x[pos])
    return out[0], out[1]


def free_variable_order(poly):
    """Lexicographically first cells whose complement solves the equalities.

    Cells are scanned in flat order and kept as free while the remaining
    columns still span the equality rows.
    """
    A = poly.eq_rows
    m, n = A.shape
    need = n - m
    mask = np.ones(n, dtype=bool)
    free = []
    for i in range(n):
        if len(free) == need:
            break
        mask[i] = False
        if np.linalg.matrix_rank(A[:, mask]) == m:
            free.append(i)
        else:
            mask[i] = True
    return free


def sequential_lp_sample(poly, rng, order=None, draw=None):
    """One density from sequential variable-support LPs.

    Each free cell is pinned to a draw from its current support; the
    remaining cells then follow from the equality rows.

    Parameters
    ----------
    poly : ConstraintPolytope
        Exact (``epsilon = 0``) polytope.
    rng : numpy.random.Generator
    order : sequence of int, optional
        Free cells; defaults to :func:`free_variable_order`.
    draw : callable, optional
        ``draw(lo, hi, rng)``; uniform by default.
    """
    if poly.epsilon != 0:
        raise PolytopeError("sequential LP sampling needs an exact polytope")
    order = free_variable_order(poly) if order is None else list(order)
    draw = draw or (lambda lo, hi, g: g.uniform(lo, hi) if hi > lo else lo)
    fixed = {}
    for cell in order:
        lo, hi = variable_support(poly, cell, fixed)
        fixed[cell] = draw(lo, hi, rng)
    A, b = poly.eq_rows, poly.eq_targets
    p = np.zeros(poly.n)
    pinned = np.zeros(poly.n, dtype=bool)
    for i, v in fixed.items():
        p[i] = v
        pinned[i] = True
    rest = A[:, ~pinned]
    sol, *_ = np.linalg.lstsq(rest, b - A[:, pinned] @ p[pinned], rcond=None)
    p[~pinned] = sol
    if np.abs(rest @ sol - (b - A[:, pinned] @ p[pinned])).max() > 1e-8:
        raise InfeasibleError("residual system is inconsistent")
    return p
