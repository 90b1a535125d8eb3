"""
Built-in experiment instances.

Arms and contexts are 0-based here; context ``w`` in the tables below is
``w + 1`` in one-based labelling.
"""
import copy

import numpy as np

POCB_INSTANCE = {
    "grid": {"n_a": 2, "n_y": 2, "n_w": 2, "n_u": 2, "y_values": [0.0, 1.0]},
    # (a, y, w) = 000, 001, 010, 011, 100, 101, 110, 111
    "marginal_ayw": [0.2328, 0.1784, 0.1351, 0.1467, 0.0304, 0.1183, 0.0149, 0.1433],
    "marginal_u": [0.9, 0.1],
    "kappa": 1e-6,
    "epsilon": 0.0,
}

MAB_INSTANCE = {
    "means": [0.3, 0.4, 0.5, 0.7, 0.7, 0.8],
    "lower": [0.25, 0.35, 0.45, 0.55, 0.65, 0.75],
    "upper": [0.50, 0.60, 0.70, 0.78, 0.85, 0.90],
    "eps": [0.1] * 6,
    "sigma": 0.1,
}

NEGATIVE_TRANSFER = {
    "means": MAB_INSTANCE["means"],
    "prior_means": [0.5, 0.6, 0.7, 0.78, 0.85, 0.75],
    "base_count": 30,
    "test_counts": [100, 1000, 1500, 2000, 2500, 3000],
    "sigma": 0.1,
}

_FEATURES = [
    [[1, 0], [0, 1], [1, 1], [.5, .5], [2, 0]],
    [[1, 0], [0, 1], [.5, .5], [1, 1], [0, 1]],
    [[.8, 0], [0, .8], [0, 0], [0, 0], [0, 0]],
    [[1.2, 0], [0, 1.2], [0, 0], [0, 0], [0, 0]],
    [[1, 0], [0, 1], [1, 1], [.5, .5], [0, 0]],
    [[1, 0], [0, 1], [.5, .5], [1, 1], [1, .5]],
    [[1, 0], [0, 1], [.5, .5], [.5, .5], [2, 0]],
    [[1.5, 0], [0, 1], [.7, .7], [.1, .1], [.1, .1]],
    [[1, 0], [0, 1], [.1, .1], [0, 1], [.1, .1]],
    [[.5, 0], [0, .5], [.5, .5], [.5, .5], [.5, .5]],
    [[1, 0], [0, 1], [0, 0], [1, 1], [.1, 2]],
]

_BOUNDS = [
    [[.5, .95], [.5, .95], [.95, 1.9], [0, .85], [1.7, 1.9]],
    [[.5, .95], [.5, .95], [0, .85], [.95, 1.9], [0, .94]],
    [[.6, 1.05], [0, .85], [0, .5], [0, .5], [0, .7]],
    [[0, 1.1], [.8, 1.05], [0, .01], [0, .01], [0, .01]],
    [[0, .9], [0, .9], [.95, 1.9], [0, .9], [0, .01]],
    [[.5, .95], [.5, .95], [0, .85], [.95, 1.9], [.95, 1.9]],
    [[.5, .95], [.5, .95], [0, .85], [0, .85], [1.4, 1.9]],
    [[.8, 1.35], [.8, .95], [.7, 1.9], [0, .2], [0, .2]],
    [[.5, .95], [.8, .95], [0, .4], [.8, .95], [0, .4]],
    [[0, 1], [0, 1], [0, 1], [0, 1], [0, 1]],
    [[.5, .95], [.5, .95], [0, 1], [0, 1.9], [0, 1.9]],
]

# expected candidate sets, 0-based arms
_BOX_SETS = [[2, 4], [0, 1, 3], [0, 1, 4], [0, 1], [2], [0, 1, 3, 4], [4], [0, 1, 2],
             [0, 1, 3], [0, 1, 2, 3, 4], [0, 1, 2, 3, 4]]
_LP_SETS = [[2, 4], [3], [0, 1], [0, 1], [2], [3], [4], [0, 2], [0, 1, 3],
            [0, 1, 2, 3, 4], [3, 4]]

CB_CONTEXTS = {
    "features": _FEATURES,
    "lower": [[b[0] for b in row] for row in _BOUNDS],
    "upper": [[b[1] for b in row] for row in _BOUNDS],
    "box_sets": _BOX_SETS,
    "lp_sets": _LP_SETS,
    "diam_full": 2 * np.sqrt(2),
    "diam_pruned": np.sqrt(2) / 20,
    "eta": 1.0,
    "delta": 0.1,
    "sigma": 0.1,
}

_BUILTINS = {
    "pocb_table3": POCB_INSTANCE,
    "mab_table4": MAB_INSTANCE,
    "negative_transfer": NEGATIVE_TRANSFER,
    "cb_contexts": CB_CONTEXTS,
}


def builtin_instance(name):
    """Deep copy of a named built-in instance."""
    try:
        return copy.deepcopy(_BUILTINS[name])
    except KeyError:
        raise KeyError(f"unknown instance {name!r}; known: {sorted(_BUILTINS)}") from None


def builtin_names():
    return sorted(_BUILTINS)


def pocb_polytope(kappa=None, epsilon=0.0):
    """Built-in POCB polytope; the four-decimal marginal is rescaled to unit mass."""
    from .polytope import GridSpec, build_pocb_constraints

    d = POCB_INSTANCE
    return build_pocb_constraints(GridSpec.from_dict(d["grid"]), d["marginal_ayw"],
                                  d["marginal_u"],
                                  kappa=d["kappa"] if kappa is None else kappa,
                                  epsilon=epsilon, normalize_tol=1e-3)


def mab_bounds(eps=None):
    from .mab import ArmBoundSet

    d = MAB_INSTANCE
    return ArmBoundSet(d["lower"], d["upper"], d["eps"] if eps is None else eps)


def cb_function_class():
    from .contextual import ContextBoundTable, LinearFunctionClass

    d = CB_CONTEXTS
    return LinearFunctionClass(np.array(d["features"], dtype=float),
                               ContextBoundTable(d["lower"], d["upper"]))
