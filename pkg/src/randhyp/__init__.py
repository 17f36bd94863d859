"""Randomization tests, invariance groups, and randomization-hypothesis checks."""

from .core import *  # noqa: F401,F403
from .engine import Decision, apply_transform, group_average_phi, phi_batch, run_randomization_test
from .groups import (
    ExplicitGroup,
    GeneratedGroup,
    SampledGroup,
    atom_swap_group,
    block_rotation_group,
    generate_cyclic,
    group_from_json,
    group_to_json,
    haar_orthogonal_sampler,
    permutation_group,
    sign_change_group,
    verify_group_axioms,
    witness_to_group,
)
from .statistics import TestStatistic, get_statistic

__version__ = "0.1.0"
