"""
Causal bounds over a density polytope.

Bounds come from the range of an effect functional over hit-and-run samples,
optionally sharpened by running a projected-gradient local optimizer from
a subset of the samples in both directions.
"""
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .effects import evaluate
from .hit_and_run import null_basis, run_chain, step_range
from .lp import LinearProgram, solve
from .polytope import ConstraintPolytope, FloorViolationError, PolytopeError, product_init

PROVENANCES = ("sampling", "sampling+oracle", "analytic")


@dataclass(frozen=True)
class CausalBounds:
    """Interval ``[lower, upper]`` with a separately reported error ``err``."""

    lower: float
    upper: float
    err: float = 0.0
    provenance: str = "sampling"

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")
        if self.err < 0:
            raise ValueError("err must be non-negative")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def inflated(self):
        """``(lower - err, upper + err)``."""
        return self.lower - self.err, self.upper + self.err

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, other, tol=0.0):
        return self.lower <= other.lower + tol and other.upper <= self.upper + tol


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    warning: str = ""


def bounds_by_sampling(samples, query, grid):
    """Range of ``query`` over a set of densities."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("no samples")
    v = evaluate(query, samples, grid)
    return CausalBounds(float(v.min()), float(v.max()), 0.0, "sampling")


def _numeric_grad(f, x, rel=1e-6):
    h = rel * np.maximum(np.abs(x), 1e-3)
    n = x.size
    X = np.repeat(x[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    X[idx, idx] += h
    X[n + idx, idx] -= h
    fx = f(X)
    return (fx[:n] - fx[n:]) / (2 * h)


def _project(g, Q, E):
    """Component of ``g`` in span(Q) orthogonal to the rows of ``E``."""
    y = Q.T @ g
    if E.shape[0]:
        M = E @ Q
        coef, *_ = np.linalg.lstsq(M @ M.T, M @ y, rcond=None)
        y = y - M.T @ coef
    return Q @ y


def local_optimize(poly, objective, init, sense="max", tol=1e-8, max_iters=500,
                   basis=None, act_tol=1e-10, max_halvings=40):
    """Projected-gradient local search for ``objective`` over ``poly``.

    Gradients come from central differences; the search direction is the
    gradient projected onto the equality kernel and onto the face of
    constraints that are active and blocking.  Steps never leave the
    feasible chord along the direction.

    Parameters
    ----------
    poly : ConstraintPolytope
    objective : callable
        Maps an array of shape ``(..., n)`` to ``(...)``.
    init : ndarray
        Feasible starting point.
    sense : {"max", "min"}
    tol : float
        Stop when the projected gradient norm falls below this.
    max_iters : int

    Returns
    -------
    OptimizeResult
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    s = 1.0 if sense == "max" else -1.0

    def f(X):
        return s * objective(X)

    Q = (basis or null_basis(poly)).Q
    C, b = poly.inequality_system()
    kappa = poly.kappa
    x = np.array(init, dtype=float)
    fx = float(f(x))
    lam = 1.0
    it, converged, warn = 0, False, ""
    for it in range(1, max_iters + 1):
        g = _numeric_grad(f, x)
        v = C @ x
        at_floor = np.flatnonzero(x <= kappa + act_tol)
        at_row = np.flatnonzero(v >= b - act_tol)
        cells, rows = [], []
        for _ in range(x.size + C.shape[0] + 1):
            E = np.vstack([np.eye(x.size)[cells], C[rows]])
            d = _project(g, Q, E)
            new_c = [i for i in at_floor if d[i] < -1e-14 and i not in cells]
            cd = C[at_row] @ d if at_row.size else np.zeros(0)
            new_r = [j for j, c in zip(at_row, cd) if c > 1e-14 and j not in rows]
            if not new_c and not new_r:
                break
            cells += new_c
            rows += new_r
        # working-set components are zero up to round-off; make it exact
        d[cells] = 0.0
        gnorm = np.linalg.norm(d)
        if gnorm < tol:
            converged = True
            break
        c = C @ d
        c[rows] = np.minimum(c[rows], 0.0)
        _, hi = step_range(x, v, d, C, b, kappa, c)
        if hi <= 0:
            converged = True
            break
        step = min(hi, 2.0 * lam)
        for _ in range(max_halvings):
            xn = x + step * d
            fn = float(f(xn))
            if fn >= fx + 1e-4 * step * gnorm ** 2 or (step == hi and fn > fx):
                break
            step *= 0.5
        else:
            warn = "line search failed"
            break
        x, fx, lam = xn, fn, step
    return OptimizeResult(x, s * fx, it, converged, warn)


def feasible_start(poly):
    """Deepest point of ``poly``: maximize ``t`` with every slack ``>= t``."""
    n = poly.n
    A, beq = poly.effective_equalities()
    C, d = poly.inequality_system()
    Aeq = np.hstack([A, np.zeros((A.shape[0], 1))])
    Aub = np.vstack([np.hstack([C, np.ones((C.shape[0], 1))]),
                     np.hstack([-np.eye(n), np.ones((n, 1))])])
    bub = np.concatenate([d, -poly.kappa * np.ones(n)])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    lower = np.concatenate([np.full(n, -np.inf), [0.0]])
    upper = np.concatenate([np.full(n, np.inf), [1.0]])
    res = solve(LinearProgram(c, Aeq, beq, Aub, bub, lower, upper))
    if not res.ok:
        raise PolytopeError("polytope has no feasible point")
    return res.x[:n]


def _start(poly):
    if poly.is_pocb:
        try:
            return product_init(poly.grid, poly.marginal_ayw, poly.marginal_u, poly.kappa)
        except FloorViolationError:
            pass
    return feasible_start(poly)


def envelope(poly, objective, T=2000, rng=None, restarts=50, burn_in=None, init=None,
             tol=1e-8, max_iters=500):
    """Sampling-plus-oracle range of ``objective`` over ``poly``.

    Returns
    -------
    (float, float, float, float)
        Accelerated lower and upper followed by the sampling-only range.
    """
    rng = np.random.default_rng(rng)
    basis = null_basis(poly)
    init = _start(poly) if init is None else init
    samples = run_chain(poly, init, T, burn_in=burn_in, rng=rng, basis=basis)
    if samples.shape[0] == 0:
        samples = init[None, :]
    vals = objective(samples)
    s_lo, s_hi = float(vals.min()), float(vals.max())
    lo, hi = s_lo, s_hi
    picks = np.unique(np.linspace(0, samples.shape[0] - 1, restarts).astype(int))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in picks:
            for sense in ("min", "max"):
                r = local_optimize(poly, objective, samples[i], sense, tol, max_iters, basis)
                lo, hi = min(lo, r.value), max(hi, r.value)
    return lo, hi, s_lo, s_hi


def bounds_accelerated(poly, query, T=2000, rng=None, restarts=50, burn_in=None,
                       init=None, tol=1e-8, max_iters=500):
    """Bounds of ``query`` over ``poly`` from chain samples and local search."""
    grid = poly.grid
    query.validate(grid)
    lo, hi, _, _ = envelope(poly, lambda X: evaluate(query, X, grid), T, rng, restarts,
                            burn_in, init, tol, max_iters)
    return CausalBounds(lo, hi, 0.0, "sampling+oracle")


def frechet_region(grid, marginal_ayw, marginal_u, a, weights, kappa=1e-6):
    """Polytope of the marginal-only program for action ``a``.

    For each context ``w`` and level ``u`` the variables are
    ``q_j = P(a, y_j, w, u)`` for outcomes with nonzero weight,
    ``b = P(w, u)`` and ``c = P(a, w, u)``.  Each sits in its Frechet box,
    sums over ``u`` match the observed marginals, and ``b >= c >= q_j``.

    Returns
    -------
    (ConstraintPolytope, callable)
        The region and the objective ``sum_{w,u} (sum_j y_j q_j) b / c``.
    """
    m = np.asarray(marginal_ayw, dtype=float).reshape(grid.n_a, grid.n_y, grid.n_w)
    mu = np.asarray(marginal_u, dtype=float)
    J = [j for j in range(grid.n_y) if weights[j] != 0]
    nj, nw, nu = len(J), grid.n_w, grid.n_u
    per = nj + 2
    n = nw * nu * per

    def col(w, u, k):
        return (w * nu + u) * per + k

    eq, beq, ub, bub = [], [], [], []
    lo_box, hi_box = np.zeros(n), np.zeros(n)

    def add_sum(w, k, target):
        row = np.zeros(n)
        for u in range(nu):
            row[col(w, u, k)] = 1.0
        eq.append(row)
        beq.append(target)

    for w in range(nw):
        targets = [m[a, j, w] for j in J] + [m[:, :, w].sum(), m[a, :, w].sum()]
        for k, q in enumerate(targets):
            add_sum(w, k, q)
            for u in range(nu):
                lo_box[col(w, u, k)], hi_box[col(w, u, k)] = (
                    max(0.0, q + mu[u] - 1.0), min(q, mu[u]))
        for u in range(nu):
            cb, cc = col(w, u, nj), col(w, u, nj + 1)
            row = np.zeros(n)
            row[cc], row[cb] = 1.0, -1.0
            ub.append(row)
            bub.append(0.0)
            for k in range(nj):
                row = np.zeros(n)
                row[col(w, u, k)], row[cc] = 1.0, -1.0
                ub.append(row)
                bub.append(0.0)
    lo_box = np.maximum(lo_box, kappa)
    hi_box = np.maximum(hi_box, lo_box)
    ub.extend(np.eye(n))
    bub.extend(hi_box)
    ub.extend(-np.eye(n))
    bub.extend(-lo_box)
    A, beq = np.array(eq), np.array(beq)
    keep = _independent_rows(A)
    poly = ConstraintPolytope(A[keep], beq[keep], np.array(ub), np.array(bub),
                              kappa=0.0, normalized=False)
    wv = np.array([weights[j] for j in J])

    def objective(X):
        X = np.asarray(X).reshape(np.shape(X)[:-1] + (nw, nu, per))
        num = np.einsum("...k,k->...", X[..., :nj], wv)
        c = X[..., nj + 1]
        return (num * X[..., nj] / np.where(c > 0, c, 1.0)).sum(axis=(-2, -1))

    return poly, objective


def _independent_rows(A):
    keep = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[keep + [i]]) == len(keep) + 1:
            keep.append(i)
    return keep


def frechet_only_bounds(grid, marginal_ayw, marginal_u, query, T=2000, rng=None,
                        restarts=50, kappa=1e-6):
    """Baseline bounds from the marginal-only Frechet program.

    Only ``mean_do_a`` and ``prob_do_a`` queries are supported.
    """
    if query.kind == "mean_do_a":
        weights = list(grid.y_values)
    elif query.kind == "prob_do_a":
        weights = [1.0 if j == query.y else 0.0 for j in range(grid.n_y)]
    else:
        raise ValueError("the marginal-only program covers unconditional queries only")
    if not any(weights):
        return CausalBounds(0.0, 0.0, 0.0, "analytic")
    poly, obj = frechet_region(grid, marginal_ayw, marginal_u, query.a, weights, kappa)
    lo, hi, _, _ = envelope(poly, obj, T, rng, restarts)
    return CausalBounds(lo, hi, 0.0, "sampling+oracle")


def nonparametric_bounds(marginal_ay, a, y):
    """``rho(a, y) <= P(y | do(a)) <= 1 - sum_{y' != y} rho(a, y')``."""
    m = np.asarray(marginal_ay, dtype=float)
    return CausalBounds(float(m[a, y]), float(1.0 - m[a].sum() + m[a, y]), 0.0, "analytic")


def propagate_error(b, L_V, L_H, eps_N):
    """Attach the perturbation error ``L_V * L_H * eps_N`` to ``b``."""
    if min(L_V, L_H, eps_N) < 0:
        raise ValueError("constants must be non-negative")
    return replace(b, err=float(L_V * L_H * eps_N))


def hausdorff_constant(poly, slater_delta, slater_gamma=None, M=1.0):
    """Rate constant ``L_H`` of the relaxed-set Hausdorff distance.

    Parameters
    ----------
    poly : ConstraintPolytope
    slater_delta : float
        Lower bound on the entries of a Slater point.
    slater_gamma : float, optional
        Minimum inequality margin at the Slater point; required when the
        polytope has inequality rows.
    M : float
        Bound on the L2 norm of feasible densities.
    """
    A = poly.eq_rows
    rows = np.vstack([A, poly.ineq_rows])
    a_max = np.linalg.norm(rows, axis=1).max()
    m = A.shape[0]
    K0 = np.sqrt(np.linalg.norm(np.linalg.inv(A @ A.T), 2))
    C = 2 * np.sqrt(poly.n) * K0 * np.sqrt(m) / slater_delta
    if poly.ineq_rows.shape[0]:
        if slater_gamma is None:
            raise ValueError("slater_gamma is required with inequality rows")
        C = max(C, 2 * (a_max * K0 * np.sqrt(m) + 1) / slater_gamma)
    return 2 * K0 * np.sqrt(m) + 2 * C * (M + K0 * np.sqrt(m))
