"""Asymmetric-information exchange economies: equilibria, private cores and
veto-power characterizations at desk scale."""

from .blocking import (AubinSearchPolicy, BlockingCertificate, aubin_block, ex_post_block,
                       fine_dominate, private_block, private_core_membership, privately_dominated)
from .continuum import (CoalitionProfile, continuum_block, lemma_shrink, resize_to_measure,
                        vind_resize)
from .economy import Agent, Economy, UtilitySpec, audit_assumptions, expected_utility
from .equilibrium import SolverConfig, solve_equilibrium, verify_equilibrium
from .information import Partition, Prior, StateSpace, join
from .programs import SolverIndeterminate

__version__ = "0.1.0"

__all__ = [
    "Agent", "AubinSearchPolicy", "BlockingCertificate", "CoalitionProfile", "Economy",
    "Partition", "Prior", "SolverConfig", "SolverIndeterminate", "StateSpace", "UtilitySpec",
    "aubin_block", "audit_assumptions", "continuum_block", "ex_post_block", "expected_utility",
    "fine_dominate", "join", "lemma_shrink", "private_block", "private_core_membership",
    "privately_dominated", "resize_to_measure", "solve_equilibrium", "verify_equilibrium",
    "vind_resize", "__version__",
]
