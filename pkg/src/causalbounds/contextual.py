"""
Contextual bandits with a linear reward class pruned by causal bounds.

The class is ``f_theta(a, w) = theta @ phi(a, w)`` with ``|theta|_inf <= 1``;
the pruned class additionally requires ``l(a, w) <= f_theta(a, w) <= h(a, w)``
for every pair.  The policy refits ``theta`` at the start of each doubling
epoch and samples arms by inverse-gap weighting over a per-context candidate
set.
"""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .lp import LinearProgram, solve

MODES = ("lp", "box", "full")
S_TOL = -1e-9


@dataclass(frozen=True)
class ContextBoundTable:
    """Bounds ``lower[w, a] <= mu(a, w) <= upper[w, a]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 2:
            raise ValueError("bound tables must be matching (contexts, arms) arrays")
        if np.any(lo > hi):
            raise ValueError("lower exceeds upper for some (a, w)")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class LinearFunctionClass:
    """Features ``phi[w, a]`` in R^d, a parameter box and optional causal box."""

    phi: np.ndarray
    bounds: ContextBoundTable = None
    radius: float = 1.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 3 or phi.shape[2] < 1:
            raise ValueError("phi must have shape (contexts, arms, d) with d >= 1")
        if self.bounds is not None and self.bounds.lower.shape != phi.shape[:2]:
            raise ValueError("bound table does not match the feature table")
        object.__setattr__(self, "phi", phi)

    @property
    def d(self):
        return self.phi.shape[2]

    @property
    def n_contexts(self):
        return self.phi.shape[0]

    @property
    def n_arms(self):
        return self.phi.shape[1]

    def unpruned(self):
        return LinearFunctionClass(self.phi, None, self.radius)

    def constraints(self, w=None):
        """Rows ``G theta <= g`` of the causal box (empty when unpruned).

        With ``w`` given only the rows of that context are returned.
        """
        if self.bounds is None:
            return np.zeros((0, self.d)), np.zeros(0)
        sl = slice(None) if w is None else slice(w, w + 1)
        Phi = self.phi[sl].reshape(-1, self.d)
        G = np.vstack([Phi, -Phi])
        g = np.concatenate([self.bounds.upper[sl].ravel(), -self.bounds.lower[sl].ravel()])
        return G, g

    def contains(self, theta, tol=1e-12):
        theta = np.asarray(theta, dtype=float)
        if np.abs(theta).max() > self.radius + tol:
            return False
        G, g = self.constraints()
        return bool(np.all(G @ theta <= g + tol))


def candidate_actions_box(w, bounds):
    """``{a : h(a, w) >= max_i l(i, w)}``."""
    return np.flatnonzero(bounds.upper[w] >= bounds.lower[w].max())


def best_margin(w, a, fclass):
    """Largest ``s`` with ``f(a, w) >= f(i, w) + s`` for all ``i != a``.

    ``theta`` ranges over the parameter box intersected with the causal
    box of context ``w``.  Returns ``inf`` when nothing bounds ``s`` (a
    single arm) and ``None`` when the feasible set is empty.
    """
    d = fclass.d
    phi = fclass.phi[w]
    others = [i for i in range(fclass.n_arms) if i != a]
    G, g = fclass.constraints(w)
    rows = [np.append(phi[i] - phi[a], 1.0) for i in others]
    rows += [np.append(r, 0.0) for r in G]
    A_ub = np.array(rows) if rows else None
    b_ub = np.concatenate([np.zeros(len(others)), g]) if rows else None
    c = np.zeros(d + 1)
    c[-1] = 1.0
    lower = np.append(np.full(d, -fclass.radius), -np.inf)
    upper = np.append(np.full(d, fclass.radius), np.inf)
    res = solve(LinearProgram(c, A_ub=A_ub, b_ub=b_ub, lower=lower, upper=upper))
    if res.status == "unbounded":
        return np.inf
    if res.status == "infeasible":
        return None
    return res.value


def candidate_actions_linear(w, fclass):
    """Arms that are greedy for some member of the class at context ``w``."""
    margins = [best_margin(w, a, fclass) for a in range(fclass.n_arms)]
    if all(m is None for m in margins):
        raise ValueError("function class is empty: the bound table is inconsistent")
    return np.array([a for a, m in enumerate(margins) if m >= S_TOL], dtype=int)


def feasible_theta(fclass):
    """Any member of the class, from a phase-one LP."""
    G, g = fclass.constraints()
    res = solve(LinearProgram(np.zeros(fclass.d), A_ub=G if G.size else None,
                              b_ub=g if G.size else None,
                              lower=-fclass.radius, upper=fclass.radius))
    if not res.ok:
        raise ValueError("function class is empty")
    return res.x


def constrained_least_squares(X, y, fclass, theta0=None):
    """Least squares over the class.

    Parameters
    ----------
    X : ndarray of shape (t, d)
        Features of the played pairs.
    y : ndarray of shape (t,)
    fclass : LinearFunctionClass
    theta0 : ndarray, optional
        Warm start; must lie in the class.

    Returns
    -------
    ndarray of shape (d,)
    """
    X = np.asarray(X, dtype=float).reshape(-1, fclass.d)
    y = np.asarray(y, dtype=float).ravel()
    start = feasible_theta(fclass) if theta0 is None else np.asarray(theta0, dtype=float)
    if y.size == 0:
        return start
    H = X.T @ X
    r = X.T @ y
    scale = max(1.0, np.abs(H).max())
    G, g = fclass.constraints()
    cons = []
    if G.size:
        cons.append({"type": "ineq", "fun": lambda th: g - G @ th, "jac": lambda th: -G})
    bnds = [(-fclass.radius, fclass.radius)] * fclass.d
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(lambda th: (th @ H @ th - 2 * r @ th) / scale, start,
                       jac=lambda th: 2 * (H @ th - r) / scale, bounds=bnds,
                       constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
    theta = np.clip(res.x, -fclass.radius, fclass.radius)
    if not fclass.contains(theta, 1e-8):
        return start
    return theta


def covering_proxy(diam, d, T):
    """``d * log(3 T diam)``, a log-cardinality proxy for an infinite class."""
    if diam <= 0:
        raise ValueError("diam must be positive")
    return d * np.log(3 * T * diam)


def gamma_t(n_actions, tau_prev, eta, delta, logF, T, epoch):
    """Exploration scale; the first epoch uses 1."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if epoch <= 1:
        return 1.0
    return float(np.sqrt(eta * n_actions * tau_prev
                         / (np.log(2 / delta) + logF + np.log(np.log(T)))))


def igw_distribution(fhat, gamma):
    """Inverse-gap weights over a candidate set.

    Parameters
    ----------
    fhat : array_like
        Predicted rewards of the candidate arms.
    gamma : float

    Returns
    -------
    ndarray
        Probabilities in the order of ``fhat``; the first maximizer takes
        the remaining mass.
    """
    fhat = np.asarray(fhat, dtype=float)
    if gamma < 0 or fhat.size == 0:
        raise ValueError("need gamma >= 0 and a non-empty action set")
    k = fhat.size
    best = int(np.argmax(fhat))
    p = 1.0 / (k + gamma * (fhat[best] - fhat))
    p[best] = 0.0
    p[best] = 1.0 - p.sum()
    assert p[best] >= -1e-12
    return p


def rejection_theta(fclass, rng, max_proposals=100000, batch=1000):
    """Uniform draw from the class by rejection from the parameter box."""
    G, g = fclass.constraints()
    tried = 0
    while tried < max_proposals:
        m = min(batch, max_proposals - tried)
        cand = rng.uniform(-fclass.radius, fclass.radius, size=(m, fclass.d))
        ok = np.all(cand @ G.T <= g, axis=1) if G.size else np.ones(m, dtype=bool)
        tried += m
        if ok.any():
            return cand[np.argmax(ok)]
    raise RuntimeError(f"no feasible parameter in {max_proposals} proposals")


@dataclass
class ContextualResult:
    label: str
    regret: np.ndarray


def candidate_table(fclass, mode, bounds):
    """Candidate arms for every context under ``mode``."""
    if mode == "lp":
        return [candidate_actions_linear(w, fclass) for w in range(fclass.n_contexts)]
    if mode == "box":
        return [candidate_actions_box(w, bounds) for w in range(fclass.n_contexts)]
    if mode == "full":
        return [np.arange(fclass.n_arms)] * fclass.n_contexts
    raise ValueError(f"unknown mode {mode!r}")


def _one_trial(fclass, learn_class, sets, theta_star, T, rng, eta, delta, logF, sigma):
    phi = fclass.phi
    mean = phi @ theta_star
    best = mean.max(axis=1)
    X = np.empty((T, fclass.d))
    y = np.empty(T)
    regret = np.empty(T)
    acc = 0.0
    theta = feasible_theta(learn_class)
    t, epoch, tau_prev = 0, 1, 0
    while t < T:
        tau = min(2 ** epoch, T)
        if t > 0:
            theta = constrained_least_squares(X[:t], y[:t], learn_class, theta)
        while t < tau:
            w = rng.integers(fclass.n_contexts)
            arms = sets[w]
            fhat = phi[w, arms] @ theta
            g = gamma_t(arms.size, tau_prev, eta, delta, logF, T, epoch)
            a = arms[rng.choice(arms.size, p=igw_distribution(fhat, g))]
            X[t] = phi[w, a]
            y[t] = mean[w, a] + sigma * rng.standard_normal()
            acc += best[w] - mean[w, a]
            regret[t] = acc
            t += 1
        tau_prev = tau
        epoch += 1
    return regret


def run_contextual(fclass, mode, T=10000, trials=50, seed=0, eta=1.0, delta=0.1,
                   sigma=0.1, prune_class=True, diam=None, threads=1):
    """Simulate the inverse-gap-weighting policy.

    Parameters
    ----------
    fclass : LinearFunctionClass
        Pruned class holding the causal bound table.
    mode : {"lp", "box", "full"}
        Candidate set: LP-exact, box superset or every arm.
    prune_class : bool
        Fit over the pruned class; ``False`` with ``mode="full"`` is the
        causal-free baseline.
    diam : float, optional
        Class diameter for the covering proxy; defaults to the box diagonal
        for the unpruned class.

    Returns
    -------
    ContextualResult
        ``regret`` has shape ``(trials, T)``.
    """
    learn_class = fclass if prune_class else fclass.unpruned()
    sets = candidate_table(fclass, mode, fclass.bounds)
    if diam is None:
        diam = 2 * fclass.radius * np.sqrt(fclass.d)
    logF = covering_proxy(diam, fclass.d, T)

    def one(k):
        rng = np.random.default_rng([seed, k])
        theta_star = rejection_theta(fclass, rng)
        return _one_trial(fclass, learn_class, sets, theta_star, T, rng, eta, delta,
                          logF, sigma)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, range(trials)))
    else:
        rows = [one(k) for k in range(trials)]
    label = mode if prune_class else f"{mode}-unpruned"
    return ContextualResult(label, np.vstack(rows))
