"""
Hit-and-run sampling over a :class:`~causalbounds.polytope.ConstraintPolytope`.

Each step draws a Gaussian direction inside the kernel of the equality rows,
computes the closed-form chord through the current point and moves to a
uniform point on it.  Inequality values ``v = C @ p`` are updated
incrementally and refreshed every ``refresh`` steps to bound drift.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .polytope import PolytopeError, check_feasible

STEP_CLIP = 1e6


class ChainError(RuntimeError):
    """The chain reached a numerically infeasible state."""


@dataclass(frozen=True)
class NullBasis:
    """Orthonormal basis ``Q`` (n x r) of the equality kernel."""

    Q: np.ndarray

    @property
    def r(self):
        return self.Q.shape[1]


def helmert(n):
    """Orthonormal basis of the complement of the all-ones vector.

    Column ``k`` (1-based) has ``1/sqrt(k(k+1))`` in its first ``k`` rows and
    ``-k/sqrt(k(k+1))`` in row ``k + 1``.

    Returns
    -------
    ndarray of shape (n, n - 1)
    """
    H = np.zeros((n, n - 1))
    for k in range(1, n):
        c = 1.0 / np.sqrt(k * (k + 1))
        H[:k, k - 1] = c
        H[k, k - 1] = -k * c
    return H


def null_basis(poly):
    """Kernel basis of the rows the sampler keeps exact.

    POCB systems use ``H_{n_ayw} (x) H_{n_u}``; relaxed normalized systems
    use ``H_n``; anything else falls back to an SVD kernel.
    """
    A, _ = poly.effective_equalities()
    if poly.epsilon == 0 and poly.is_pocb:
        g = poly.grid
        return NullBasis(np.kron(helmert(g.n_ayw), helmert(g.n_u)))
    if poly.normalized and A.shape[0] == 1 and np.all(A == 1):
        return NullBasis(helmert(poly.n))
    if A.shape[0] == 0:
        return NullBasis(np.eye(poly.n))
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise PolytopeError("equality rows are rank deficient")
    return NullBasis(scipy.linalg.null_space(A))


def projector_basis(A):
    """Kernel basis from ``I - A^T (A A^T)^{-1} A`` via its eigenvectors."""
    A = np.atleast_2d(A)
    P = np.eye(A.shape[1]) - A.T @ np.linalg.solve(A @ A.T, A)
    w, V = np.linalg.eigh(P)
    return NullBasis(V[:, w > 0.5])


def sample_direction(basis, rng):
    """``Q z`` with ``z`` standard normal."""
    return basis.Q @ rng.standard_normal(basis.r)


def step_range(p, v, d, C, b, kappa, c=None, clip=STEP_CLIP):
    """Feasible step interval ``[lam_min, lam_max]`` along ``d``.

    Parameters
    ----------
    p : ndarray
        Current point.
    v : ndarray
        Cached ``C @ p``.
    d : ndarray
        Direction in the equality kernel.
    C, b : ndarray
        One-sided rows ``C @ p <= b``.
    kappa : float
        Entry-wise floor.
    c : ndarray, optional
        Precomputed ``C @ d``.

    Returns
    -------
    (float, float)
    """
    if c is None:
        c = C @ d
    # slack clipped at zero so tiny round-off never excludes lam = 0
    slack_row = np.maximum(b - v, 0.0)
    slack_pos = np.minimum(kappa - p, 0.0)
    lo, hi = -np.inf, np.inf
    if c.size:
        up, dn = c > 0, c < 0
        if up.any():
            hi = min(hi, np.min(slack_row[up] / c[up]))
        if dn.any():
            lo = max(lo, np.max(slack_row[dn] / c[dn]))
    up, dn = d > 0, d < 0
    if up.any():
        lo = max(lo, np.max(slack_pos[up] / d[up]))
    if dn.any():
        hi = min(hi, np.min(slack_pos[dn] / d[dn]))
    norm = np.linalg.norm(d)
    bound = clip / norm if norm > 0 else clip
    return max(lo, -bound), min(hi, bound)


class ChainState:
    """Single hit-and-run chain with its own generator."""

    def __init__(self, poly, init, rng, basis=None, refresh=1000):
        self.poly = poly
        self.basis = basis if basis is not None else null_basis(poly)
        self.C, self.b = poly.inequality_system()
        self.p = np.array(init, dtype=float)
        self.v = self.C @ self.p
        self.rng = rng
        self.refresh = refresh
        self.steps = 0

    def step(self):
        d = sample_direction(self.basis, self.rng)
        c = self.C @ d
        lo, hi = step_range(self.p, self.v, d, self.C, self.b, self.poly.kappa, c)
        if lo > hi:
            raise ChainError(f"empty step range [{lo}, {hi}] at step {self.steps}")
        lam = self.rng.uniform(lo, hi) if hi > lo else lo
        self.p += lam * d
        self.v += lam * c
        self.steps += 1
        if self.steps % self.refresh == 0:
            self.v = self.C @ self.p
        return hi > lo


def run_chain(poly, init, T, burn_in=None, thin=1, rng=None, basis=None,
              check=False, tol=1e-9, max_degenerate=1000):
    """Run ``T`` hit-and-run steps and keep every ``thin``-th after burn-in.

    Parameters
    ----------
    poly : ConstraintPolytope
    init : array_like
        Feasible starting density.
    T : int
        Total steps.
    burn_in : int, optional
        Discarded steps; defaults to ``10 * r``.
    thin : int
    rng : numpy.random.Generator or int, optional
    check : bool
        Assert feasibility of every retained sample.
    max_degenerate : int
        Abort after this many consecutive zero-length chords.

    Returns
    -------
    ndarray of shape (floor((T - burn_in) / thin), n)
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(rng)
    report = check_feasible(init, poly, tol)
    if not report:
        raise PolytopeError(f"infeasible init: {report.worst} off by {report.max_violation:.3g}")
    state = ChainState(poly, init, rng, basis)
    if burn_in is None:
        burn_in = 10 * state.basis.r
    burn_in = min(burn_in, T)
    keep = (T - burn_in) // thin
    out = np.empty((keep, poly.n))
    stuck = 0
    if state.basis.r == 0:
        out[:] = state.p
        return out
    for t in range(burn_in + keep * thin):
        stuck = 0 if state.step() else stuck + 1
        if stuck >= max_degenerate:
            raise ChainError(f"{stuck} consecutive degenerate chords")
        s = t - burn_in + 1
        if s > 0 and s % thin == 0:
            out[s // thin - 1] = state.p
            if check:
                rep = check_feasible(state.p, poly, tol)
                if not rep:
                    raise ChainError(f"step {t}: {rep.worst} off by {rep.max_violation:.3g}")
    return out


def chain_seeds(seed, chains):
    """Independent generators for ``chains`` chains derived from one seed."""
    return [np.random.default_rng([seed, i]) for i in range(chains)]


def run_chains(poly, init, T, chains=1, seed=0, threads=1, **kw):
    """Run several chains and stack their samples in chain order."""
    basis = kw.pop("basis", None) or null_basis(poly)
    rngs = chain_seeds(seed, chains)

    def one(i):
        return run_chain(poly, init, T, rng=rngs[i], basis=basis, **kw)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, range(chains)))
    else:
        parts = [one(i) for i in range(chains)]
    return np.vstack(parts)
