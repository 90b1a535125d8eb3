"""
Causal-effect bounds from constrained density polytopes, and bandits that use them.

Bounds come from hit-and-run samples over the polytope of joint densities
compatible with observed marginals, refined by a local optimizer.  The bandit
modules prune arms and truncate or warm-start their indices with those bounds.
"""
from .bounds import (CausalBounds, bounds_accelerated, bounds_by_sampling, envelope,
                     frechet_only_bounds, hausdorff_constant, local_optimize,
                     nonparametric_bounds, propagate_error)
from .contextual import (ContextBoundTable, LinearFunctionClass, candidate_actions_box,
                         candidate_actions_linear, igw_distribution, run_contextual)
from .effects import EffectQuery, evaluate, lipschitz_L_V
from .fixtures import builtin_instance
from .harness import ConfigError, ExperimentConfig, run_experiment
from .hit_and_run import null_basis, run_chain, run_chains
from .lp import LinearProgram, solve, sequential_lp_sample, variable_support
from .mab import ArmBoundSet, hardness, run_mab
from .polytope import (ConstraintPolytope, GridSpec, build_pocb_constraints, check_feasible,
                       product_init, relax)

__version__ = "0.1.0"
