"""
Linear-constraint polytopes of joint densities over a finite grid.

A joint density over A x Y x W x U is stored as a flat vector ``p`` in
row-major (i, j, k, l) order, so cell ``(i, j, k, l)`` lives at
``((i * n_y + j) * n_w + k) * n_u + l``.  The feasible set is

    eq_rows @ p = eq_targets,  ineq_rows @ p <= ineq_targets,  p >= kappa

and a slack ``epsilon`` relaxes every row except normalization to

    |eq_rows @ p - eq_targets| <= epsilon,  ineq_rows @ p <= ineq_targets + epsilon.
"""
from dataclasses import dataclass, field, replace

import numpy as np


class PolytopeError(ValueError):
    """Invalid constraint system or marginal input."""


class FloorViolationError(PolytopeError):
    """A density entry falls below the positivity floor."""


@dataclass(frozen=True)
class GridSpec:
    """Support sizes of (A, Y, W, U) and the outcome levels of Y."""

    n_a: int
    n_y: int
    n_w: int
    n_u: int
    y_values: tuple = None

    def __post_init__(self):
        for name in ("n_a", "n_y", "n_w", "n_u"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise PolytopeError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        y = self.y_values
        if y is None:
            y = tuple(float(j) for j in range(self.n_y))
        y = tuple(float(v) for v in y)
        if len(y) != self.n_y:
            raise PolytopeError(f"y_values has length {len(y)}, expected {self.n_y}")
        object.__setattr__(self, "y_values", y)

    @property
    def shape(self):
        return (self.n_a, self.n_y, self.n_w, self.n_u)

    @property
    def n(self):
        return self.n_a * self.n_y * self.n_w * self.n_u

    @property
    def n_ayw(self):
        return self.n_a * self.n_y * self.n_w

    def index(self, i, j, k, l):
        """Flat index of cell (i, j, k, l)."""
        return int(np.ravel_multi_index((i, j, k, l), self.shape))

    def to_dict(self):
        return {"n_a": self.n_a, "n_y": self.n_y, "n_w": self.n_w,
                "n_u": self.n_u, "y_values": list(self.y_values)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_a"], d["n_y"], d["n_w"], d["n_u"], d.get("y_values"))


@dataclass(frozen=True, eq=False)
class ConstraintPolytope:
    """Equality and inequality rows with a positivity floor and a slack.

    Parameters
    ----------
    eq_rows, eq_targets : ndarray
        Full-row-rank equality system. The all-ones vector must lie in the
        row space when ``normalized`` is set, and normalization then stays
        exact under relaxation.
    ineq_rows, ineq_targets : ndarray
        Rows read as ``ineq_rows @ p <= ineq_targets``.
    kappa : float
        Entry-wise floor.
    epsilon : float
        Slack applied to every non-normalization row.
    grid, marginal_ayw, marginal_u : optional
        Set by :func:`build_pocb_constraints`; enables the Kronecker basis.
    """

    eq_rows: np.ndarray
    eq_targets: np.ndarray
    ineq_rows: np.ndarray = None
    ineq_targets: np.ndarray = None
    kappa: float = 0.0
    epsilon: float = 0.0
    normalized: bool = True
    grid: GridSpec = None
    marginal_ayw: np.ndarray = field(default=None, repr=False)
    marginal_u: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.eq_rows, dtype=float))
        b = np.asarray(self.eq_targets, dtype=float).ravel()
        n = A.shape[1]
        C = self.ineq_rows
        C = np.zeros((0, n)) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        d = self.ineq_targets
        d = np.zeros(0) if d is None else np.asarray(d, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise PolytopeError("eq_rows and eq_targets disagree in length")
        if C.shape[0] != d.size or (C.shape[0] and C.shape[1] != n):
            raise PolytopeError("ineq_rows and ineq_targets are inconsistent")
        if self.epsilon < 0:
            raise PolytopeError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kappa < 0:
            raise PolytopeError(f"kappa must be >= 0, got {self.kappa}")
        if self.kappa > 0 and self.normalized and self.kappa * n >= 1:
            raise PolytopeError(f"kappa * n = {self.kappa * n} must be < 1")
        if A.shape[0]:
            rank = np.linalg.matrix_rank(A)
            if rank < A.shape[0]:
                raise PolytopeError(
                    f"equality rows are rank deficient ({rank} < {A.shape[0]})")
        if self.normalized:
            ones = np.ones(n)
            if A.shape[0] == 0:
                raise PolytopeError("normalized polytope needs equality rows")
            coef, *_ = np.linalg.lstsq(A.T, ones, rcond=None)
            if np.abs(A.T @ coef - ones).max() > 1e-8:
                raise PolytopeError("all-ones row is not in the equality row space")
            object.__setattr__(self, "_norm_coef", coef)
        for arr in (A, b, C, d):
            arr.setflags(write=False)
        object.__setattr__(self, "eq_rows", A)
        object.__setattr__(self, "eq_targets", b)
        object.__setattr__(self, "ineq_rows", C)
        object.__setattr__(self, "ineq_targets", d)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def n(self):
        return self.eq_rows.shape[1]

    @property
    def is_pocb(self):
        return self.grid is not None and self.marginal_u is not None

    def __eq__(self, other):
        if not isinstance(other, ConstraintPolytope):
            return NotImplemented
        return (self.kappa == other.kappa and self.epsilon == other.epsilon
                and self.normalized == other.normalized and self.grid == other.grid
                and _same(self.eq_rows, other.eq_rows)
                and _same(self.eq_targets, other.eq_targets)
                and _same(self.ineq_rows, other.ineq_rows)
                and _same(self.ineq_targets, other.ineq_targets))

    __hash__ = None

    def inequality_system(self):
        """All one-sided rows ``C @ p <= d`` implied by the polytope.

        With ``epsilon > 0`` each equality row becomes a pair of one-sided
        rows of half-width ``epsilon``; normalization is handled separately.
        """
        C, d = self.ineq_rows, self.ineq_targets + self.epsilon
        if self.epsilon > 0:
            A, b, e = self.eq_rows, self.eq_targets, self.epsilon
            C = np.vstack([C, A, -A])
            d = np.concatenate([d, b + e, -b + e])
        return C, d

    def effective_equalities(self):
        """Equality rows that the sampler must keep exactly."""
        if self.epsilon == 0:
            return self.eq_rows, self.eq_targets
        if self.normalized:
            return np.ones((1, self.n)), np.ones(1)
        return np.zeros((0, self.n)), np.zeros(0)

    def to_dict(self):
        if not self.is_pocb:
            raise PolytopeError("only POCB polytopes have a JSON descriptor")
        return {"grid": self.grid.to_dict(),
                "marginal_ayw": [float(v) for v in self.marginal_ayw],
                "marginal_u": [float(v) for v in self.marginal_u],
                "kappa": self.kappa, "epsilon": self.epsilon}


def _same(x, y):
    return x.shape == y.shape and np.array_equal(x, y)


@dataclass
class FeasibilityReport:
    """Outcome of :func:`check_feasible`."""

    ok: bool
    max_violation: float
    worst: str
    violated: tuple = ()

    def __bool__(self):
        return self.ok


def _check_marginal(v, name, tol):
    v = np.asarray(v, dtype=float).ravel()
    if np.any(v < 0):
        raise PolytopeError(f"{name} has negative entries")
    s = v.sum()
    if abs(s - 1.0) > tol:
        raise PolytopeError(f"{name} sums to {s!r}, not 1 (tolerance {tol})")
    return v / s


def build_pocb_constraints(grid, marginal_ayw, marginal_u, kappa=0.0, epsilon=0.0,
                           normalize_tol=1e-9):
    """Constraint polytope for a known (A, Y, W) marginal and U marginal.

    Parameters
    ----------
    grid : GridSpec
    marginal_ayw : array_like, length n_a * n_y * n_w
        Observational law of (A, Y, W), flattened in (i, j, k) order.
    marginal_u : array_like, length n_u
    kappa : float
        Floor on every cell.
    epsilon : float
        Relaxation slack.
    normalize_tol : float
        Marginals off from unit mass by at most this much are rescaled;
        larger deviations are rejected.

    Returns
    -------
    ConstraintPolytope
        Rows ``I (x) 1^T`` for the (A, Y, W) marginal followed by
        ``1^T (x) I`` for the U marginal with its last row removed, so the
        system has rank ``n_ayw + n_u - 1``.
    """
    m_ayw = _check_marginal(marginal_ayw, "marginal_ayw", normalize_tol)
    m_u = _check_marginal(marginal_u, "marginal_u", normalize_tol)
    if m_ayw.size != grid.n_ayw:
        raise PolytopeError(f"marginal_ayw has {m_ayw.size} entries, expected {grid.n_ayw}")
    if m_u.size != grid.n_u:
        raise PolytopeError(f"marginal_u has {m_u.size} entries, expected {grid.n_u}")
    rows_ayw = np.kron(np.eye(grid.n_ayw), np.ones((1, grid.n_u)))
    rows_u = np.kron(np.ones((1, grid.n_ayw)), np.eye(grid.n_u))
    A = np.vstack([rows_ayw, rows_u[:-1]])
    b = np.concatenate([m_ayw, m_u[:-1]])
    return ConstraintPolytope(A, b, kappa=kappa, epsilon=epsilon, grid=grid,
                              marginal_ayw=m_ayw, marginal_u=m_u)


def product_init(grid, marginal_ayw, marginal_u, kappa=0.0):
    """Independence coupling ``p_ijkl = beta_ijk * beta_l``.

    Raises
    ------
    FloorViolationError
        If some cell is below ``kappa``.
    """
    m_ayw = np.asarray(marginal_ayw, dtype=float).ravel()
    m_u = np.asarray(marginal_u, dtype=float).ravel()
    p = np.outer(m_ayw, m_u).ravel()
    if p.size != grid.n:
        raise PolytopeError(f"marginals give {p.size} cells, grid has {grid.n}")
    low = np.flatnonzero(p < kappa)
    if low.size:
        cell = np.unravel_index(low[0], grid.shape)
        raise FloorViolationError(
            f"cell {tuple(int(c) for c in cell)} has mass {p[low[0]]:.3g} < kappa={kappa}")
    return p


def check_feasible(p, poly, tol=1e-9):
    """Evaluate every constraint of ``poly`` at ``p``.

    Returns
    -------
    FeasibilityReport
        ``ok`` is true when no residual exceeds its allowance.  ``worst``
        names the row with the largest excess, e.g. ``"eq[3]"`` or
        ``"pos[5]"``; ``violated`` lists every row over its allowance.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (poly.n,):
        raise PolytopeError(f"density has shape {p.shape}, polytope expects ({poly.n},)")
    excess, names = [], []
    if poly.eq_rows.shape[0]:
        r = np.abs(poly.eq_rows @ p - poly.eq_targets) - poly.epsilon
        excess.append(r)
        names.append("eq")
    if poly.ineq_rows.shape[0]:
        excess.append(poly.ineq_rows @ p - poly.ineq_targets - poly.epsilon)
        names.append("ineq")
    excess.append(poly.kappa - p)
    names.append("pos")
    if poly.normalized:
        excess.append(np.array([abs(p.sum() - 1.0)]))
        names.append("norm")
    worst_val, worst_name, violated = -np.inf, "", []
    for name, r in zip(names, excess):
        i = int(np.argmax(r))
        if r[i] > worst_val:
            worst_val, worst_name = float(r[i]), f"{name}[{i}]"
        violated += [f"{name}[{j}]" for j in np.flatnonzero(r > tol)]
    return FeasibilityReport(worst_val <= tol, max(worst_val, 0.0), worst_name,
                             tuple(violated))


def relax(poly, epsilon):
    """Copy of ``poly`` with slack ``epsilon``."""
    if epsilon < 0:
        raise PolytopeError(f"epsilon must be >= 0, got {epsilon}")
    return replace(poly, epsilon=float(epsilon))


def polytope_from_dict(d, normalize_tol=1e-9):
    """Build a POCB polytope from its JSON descriptor."""
    try:
        grid = GridSpec.from_dict(d["grid"])
        return build_pocb_constraints(grid, d["marginal_ayw"], d["marginal_u"],
                                      kappa=d.get("kappa", 0.0),
                                      epsilon=d.get("epsilon", 0.0),
                                      normalize_tol=normalize_tol)
    except KeyError as exc:
        raise PolytopeError(f"polytope descriptor is missing field {exc}") from None
