"""
Causal-effect functionals of a discrete joint density.

All evaluators accept a single flat density of length ``grid.n`` or a stack
of shape ``(..., grid.n)`` and return a scalar or an array accordingly.
"""
from dataclasses import dataclass

import numpy as np

KINDS = ("mean_do_a", "mean_do_a_given_w", "prob_do_a")


class SingularStratumError(ZeroDivisionError):
    """A stratum with positive weight has a zero conditioning mass."""


@dataclass(frozen=True)
class EffectQuery:
    """Which functional to evaluate.

    Attributes
    ----------
    kind : str
        One of ``mean_do_a``, ``mean_do_a_given_w`` or ``prob_do_a``.
    a : int
        Action index.
    w : int, optional
        Context index, required for ``mean_do_a_given_w``.
    y : int, optional
        Outcome index, required for ``prob_do_a``.
    """

    kind: str
    a: int
    w: int = None
    y: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown effect kind {self.kind!r}")
        if self.kind == "mean_do_a_given_w" and self.w is None:
            raise ValueError("mean_do_a_given_w needs w")
        if self.kind == "prob_do_a" and self.y is None:
            raise ValueError("prob_do_a needs y")

    def validate(self, grid):
        if not 0 <= self.a < grid.n_a:
            raise ValueError(f"a={self.a} outside 0..{grid.n_a - 1}")
        if self.w is not None and not 0 <= self.w < grid.n_w:
            raise ValueError(f"w={self.w} outside 0..{grid.n_w - 1}")
        if self.y is not None and not 0 <= self.y < grid.n_y:
            raise ValueError(f"y={self.y} outside 0..{grid.n_y - 1}")

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "w": self.w, "y": self.y}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], int(d["a"]), d.get("w"), d.get("y"))

    def label(self):
        parts = [f"a={self.a}"]
        if self.w is not None:
            parts.append(f"w={self.w}")
        if self.y is not None:
            parts.append(f"y={self.y}")
        return f"{self.kind}({','.join(parts)})"


def _tensor(p, grid):
    p = np.asarray(p, dtype=float)
    return p.reshape(p.shape[:-1] + grid.shape)


def _ratio(num, den, weight, kappa_floor):
    bad = (weight > 0) & ((den <= 0) | (den < kappa_floor))
    if np.any(bad):
        idx = np.argwhere(bad)[0][-2:]
        raise SingularStratumError(
            f"stratum (k, l) = {tuple(int(i) for i in idx)} has positive weight "
            "but zero conditioning mass")
    safe = np.where(den > 0, den, 1.0)
    return np.where(weight > 0, num / safe, 0.0)


def _adjusted(p, grid, a, yvec, kappa_floor):
    P = _tensor(p, grid)
    Pa = P[..., a, :, :, :]
    num = np.einsum("...jkl,j->...kl", Pa, yvec)
    den = Pa.sum(axis=-3)
    weight = P.sum(axis=(-4, -3))
    return _ratio(num, den, weight, kappa_floor), weight


def effect_do_a(p, grid, a, kappa_floor=0.0):
    """Back-door adjusted mean ``E[Y | do(A=a)]``.

    ``sum_{k,l} E[Y | a, w_k, u_l] P(w_k, u_l)``; strata of zero weight add 0.
    """
    cond, weight = _adjusted(p, grid, a, np.asarray(grid.y_values), kappa_floor)
    return (cond * weight).sum(axis=(-2, -1))


def effect_do_a_given_w(p, grid, a, w, kappa_floor=0.0):
    """``E[Y | do(A=a), W=w] = sum_l E[Y | a, w, u_l] rho(u_l | w)``."""
    cond, weight = _adjusted(p, grid, a, np.asarray(grid.y_values), kappa_floor)
    wk = weight[..., w, :]
    tot = wk.sum(axis=-1)
    if np.any(tot <= 0):
        raise SingularStratumError(f"context w={w} has zero mass")
    return (cond[..., w, :] * wk).sum(axis=-1) / tot


def prob_do_a(p, grid, a, y, kappa_floor=0.0):
    """Interventional probability ``P(Y = y_j | do(A=a))``."""
    ind = np.zeros(grid.n_y)
    ind[y] = 1.0
    cond, weight = _adjusted(p, grid, a, ind, kappa_floor)
    return (cond * weight).sum(axis=(-2, -1))


def evaluate(query, p, grid, kappa_floor=0.0):
    """Evaluate ``query`` at one density or a stack of densities."""
    if query.kind == "mean_do_a":
        return effect_do_a(p, grid, query.a, kappa_floor)
    if query.kind == "mean_do_a_given_w":
        return effect_do_a_given_w(p, grid, query.a, query.w, kappa_floor)
    return prob_do_a(p, grid, query.a, query.y, kappa_floor)


def counting_measures(grid):
    """Counting-measure sizes of the supports entering the Lipschitz constants."""
    return {"Z": grid.n_w * grid.n_u, "AY": grid.n_a * grid.n_y, "Y": grid.n_y,
            "U": grid.n_u, "AYU": grid.n_a * grid.n_y * grid.n_u}


def lipschitz_L_V(kind, M, kappa1, kappa2, nu):
    """Lipschitz constant of an effect functional in the L2 norm.

    Parameters
    ----------
    kind : str
        ``mean_do_a`` or ``prob_do_a`` (same constant with ``M = 1``), or
        ``mean_do_a_given_w``.
    M : float
        Bound on ``|y|``.
    kappa1, kappa2 : float
        Lower and upper bounds on the density.
    nu : dict
        Measure sizes with keys ``Z``, ``AY``, ``Y`` and, for the
        conditional functional, ``U`` and ``AYU``.

    Returns
    -------
    float
    """
    if kappa1 <= 0:
        raise ValueError("kappa1 must be positive")
    if kind in ("mean_do_a", "prob_do_a"):
        return (M * np.sqrt(nu["Z"] * nu["AY"])
                + 2 * M * kappa2 * np.sqrt(nu["Z"] * nu["Y"]) * nu["AY"] / kappa1)
    if kind == "mean_do_a_given_w":
        c1 = kappa1 * nu["AYU"]
        c2 = M * kappa2 * nu["AYU"]
        inner = (2 * kappa2 * nu["AY"] * np.sqrt(nu["U"] * nu["Y"]) / kappa1
                 + np.sqrt(nu["U"]) * nu["AY"])
        return M / c1 * inner + c2 / c1 ** 2 * np.sqrt(nu["AYU"])
    raise ValueError(f"unknown effect kind {kind!r}")
