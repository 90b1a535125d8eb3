"""
Multi-armed bandits with causal bounds on the arm means.

Index functions accept pull counts and reward sums of shape ``(..., K)`` so
the same code drives a single state and a batch of independent trials.
Ties between arms are always broken toward the lowest index.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

ALGORITHMS = ("plain_ucb", "alg3", "alg4", "warm_ucb")


@dataclass(frozen=True)
class ArmBoundSet:
    """Per-arm interval ``[lower, upper]`` with estimation error ``eps``."""

    lower: np.ndarray
    upper: np.ndarray
    eps: np.ndarray = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        eps = np.zeros_like(lo) if self.eps is None else np.broadcast_to(
            np.asarray(self.eps, dtype=float), lo.shape).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValueError("lower and upper must be equal-length non-empty vectors")
        if np.any(lo > hi):
            raise ValueError("lower exceeds upper for some arm")
        if np.any(eps < 0):
            raise ValueError("eps must be non-negative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "eps", eps)

    @property
    def K(self):
        return self.lower.size


class MabState:
    """Pull counts and reward sums, optionally batched over trials."""

    def __init__(self, K, batch=None):
        shape = (K,) if batch is None else (batch, K)
        self.counts = np.zeros(shape)
        self.sums = np.zeros(shape)
        self.t = 1

    @property
    def means(self):
        return np.divide(self.sums, self.counts, out=np.zeros_like(self.sums),
                         where=self.counts > 0)

    def update(self, arm, reward):
        arm = np.asarray(arm)
        if self.counts.ndim == 1:
            self.counts[arm] += 1
            self.sums[arm] += reward
        else:
            rows = np.arange(self.counts.shape[0])
            self.counts[rows, arm] += 1
            self.sums[rows, arm] += reward
        self.t += 1


def prune_arms(bounds):
    """Arms whose upper bound reaches the best lower bound."""
    return np.flatnonzero(bounds.upper >= bounds.lower.max())


def prune_arms_noisy(bounds):
    """Arms not ruled out once every interval is widened by its error."""
    best = (bounds.lower - bounds.eps).max()
    return np.flatnonzero(~(bounds.upper + bounds.eps < best))


def max_variance(l, h):
    """``max mu (1 - mu)`` over ``[l, h]`` within ``[0, 1]``."""
    l = np.asarray(l, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(l > h) or np.any(l < 0) or np.any(h > 1):
        raise ValueError("need 0 <= l <= h <= 1")
    inside = (l <= 0.5) & (h >= 0.5)
    return np.where(inside, 0.25, np.maximum(l * (1 - l), h * (1 - h)))


def _bonus(var, t, delta, n):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(2 * var * np.log(2 * t / delta) / n)


def _argmax(index, active):
    masked = np.where(active, index, -np.inf)
    return np.argmax(masked, axis=-1)


def _mask(K, arms):
    m = np.zeros(K, dtype=bool)
    m[arms] = True
    return m


def truncated_ucb_indices(state, bounds, delta):
    """Truncated index ``min(U_a, h(a))``; unpulled arms score ``min(1, h(a))``."""
    var = max_variance(bounds.lower, bounds.upper)
    n = state.counts
    U = np.where(n > 0, np.minimum(1.0, state.means + _bonus(var, state.t, delta, n)), 1.0)
    return np.minimum(U, bounds.upper)


def truncated_ucb_step(state, bounds, delta):
    """Arm chosen by the valid-bounds algorithm."""
    active = _mask(bounds.K, prune_arms(bounds))
    return _argmax(truncated_ucb_indices(state, bounds, delta), active)


def warm_start_mean(state, bounds):
    """Empirical mean shrunk toward ``h`` with prior weight ``eps**-2``."""
    n = state.counts
    with np.errstate(divide="ignore"):
        w = bounds.eps ** -2.0
    exact = bounds.eps == 0
    w_fin = np.where(exact, 1.0, w)
    mu = (n * state.means + w_fin * bounds.upper) / (n + w_fin)
    return np.where(exact | (n == 0), bounds.upper, mu), w_fin


def warm_start_indices(state, bounds, delta):
    """Plain and warm-start upper indices ``(U, U_eps)``.

    ``U`` uses the variance cap of the widened interval and is infinite for
    unpulled arms.  ``U_eps`` shrinks the empirical mean toward ``h`` with
    prior weight ``eps**-2``; ``eps = 0`` gives ``U_eps = h`` exactly.
    """
    lo = np.clip(bounds.lower - bounds.eps, 0.0, 1.0)
    hi = np.clip(bounds.upper + bounds.eps, 0.0, 1.0)
    var = max_variance(lo, hi)
    n = state.counts
    log_term = np.log(2 * state.t / delta)
    U = np.where(n > 0, state.means + _bonus(var, state.t, delta, n), np.inf)
    mu_eps, w_fin = warm_start_mean(state, bounds)
    U_eps = mu_eps + np.sqrt((2 * var * log_term + 1) / (n + w_fin))
    U_eps = np.where(bounds.eps == 0, bounds.upper, U_eps)
    return U, U_eps


def noisy_bounds_step(state, bounds, delta):
    """Arm chosen by the noisy-bounds algorithm."""
    active = _mask(bounds.K, prune_arms_noisy(bounds))
    U, U_eps = warm_start_indices(state, bounds, delta)
    return _argmax(np.minimum(U, U_eps), active)


def ucb_step(state, delta, var=0.25):
    """Plain UCB with variance cap ``var``; unpulled arms go first."""
    n = state.counts
    U = np.where(n > 0, state.means + _bonus(var, state.t, delta, n), np.inf)
    return _argmax(U, np.ones(n.shape[-1], dtype=bool))


def warm_ucb_step(state, delta, prior_means, prior_counts, var=0.25):
    """UCB that treats offline estimates as pseudo-observations."""
    n = state.counts + prior_counts
    s = state.sums + prior_counts * np.asarray(prior_means)
    mean = np.divide(s, n, out=np.zeros_like(s), where=n > 0)
    U = np.where(n > 0, mean + _bonus(var, state.t, delta, n), np.inf)
    return _argmax(U, np.ones(n.shape[-1], dtype=bool))


def hardness(mu_star, upper, eps):
    """``H_a = eps**-2 * (mu_star - h(a))_+**2``."""
    gap = np.maximum(mu_star - np.asarray(upper, dtype=float), 0.0)
    return gap ** 2 / np.asarray(eps, dtype=float) ** 2


def tau_star(var, eps, T):
    """Root ``tau`` of ``sum_a (var_a tau - eps_a**-2)_+ = T``."""
    var = np.asarray(var, dtype=float)
    w = np.asarray(eps, dtype=float) ** -2.0

    def g(tau):
        return np.maximum(var * tau - w, 0.0).sum() - T

    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 0.0, hi)


@dataclass
class MabResult:
    """Per-trial cumulative pseudo-regret and final pull counts."""

    algorithm: str
    regret: np.ndarray
    pulls: np.ndarray

    @property
    def final_regret(self):
        return self.regret[:, -1]


def _simulate(means, bounds, algorithm, T, noise, delta, sigma, options):
    trials = noise.shape[0]
    K = means.size
    state = MabState(K, trials)
    best = means.max()
    regret = np.empty((trials, T))
    acc = np.zeros(trials)
    rows = np.arange(trials)
    for t in range(T):
        if algorithm == "alg3":
            arm = truncated_ucb_step(state, bounds, delta)
        elif algorithm == "alg4":
            arm = noisy_bounds_step(state, bounds, delta)
        elif algorithm == "plain_ucb":
            arm = ucb_step(state, delta)
        else:
            arm = warm_ucb_step(state, delta, options["prior_means"], options["prior_counts"])
        state.update(arm, means[arm] + sigma * noise[rows, t])
        acc += best - means[arm]
        regret[:, t] = acc
    return regret, state.counts


def run_mab(means, bounds, algorithm, T=10000, trials=50, seed=0, delta=0.1, sigma=0.1,
            threads=1, **options):
    """Simulate ``trials`` independent runs of one algorithm.

    Rewards are ``means[a] + sigma * z`` with ``z`` drawn from a per-trial
    stream seeded by ``(seed, trial)``, so algorithms run on common
    random numbers.

    Parameters
    ----------
    means : array_like
        True arm means.
    bounds : ArmBoundSet or None
        Required by ``alg3`` and ``alg4``.
    algorithm : str
        ``plain_ucb``, ``alg3``, ``alg4`` or ``warm_ucb``; the last needs
        ``prior_means`` and ``prior_counts`` options.

    Returns
    -------
    MabResult
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm in ("alg3", "alg4") and bounds is None:
        raise ValueError(f"{algorithm} needs causal bounds")
    if algorithm == "warm_ucb":
        options = {"prior_means": np.asarray(options["prior_means"], dtype=float),
                   "prior_counts": np.asarray(options["prior_counts"], dtype=float)}
    means = np.asarray(means, dtype=float)
    noise = np.stack([np.random.default_rng([seed, k]).standard_normal(T)
                      for k in range(trials)])
    chunks = np.array_split(np.arange(trials), max(1, min(threads, trials)))

    def one(idx):
        return _simulate(means, bounds, algorithm, T, noise[idx], delta, sigma, options)

    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as ex:
            parts = list(ex.map(one, chunks))
    else:
        parts = [one(chunks[0])]
    regret = np.vstack([p[0] for p in parts])
    pulls = np.vstack([p[1] for p in parts])
    return MabResult(algorithm, regret, pulls)
