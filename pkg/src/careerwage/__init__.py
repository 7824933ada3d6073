"""Robust wage policies under career concerns, with a brute-force equilibrium oracle."""
from .environment import (CareerValueFn, Environment, LinearWeights, PiecewiseLinearBinary,
                          SchemaError, build_career_value_fn, career_value,
                          complementarity_check, effective_cost, environment_from_dict,
                          example_environment, informed_example_environment, linear_criterion,
                          load_environment, posteriors)
from .informed import (AssumptionReport, InformedSolution, assumptions_check,
                       critical_wages_informed, greedy_policy, greedy_policy_multi,
                       implementable, robust_policy_informed, robust_policy_informed_Q)
from .oracle import (EquilibriumRecord, Verdict, approximating_policy, enumerate_informed,
                     enumerate_informed_binary, enumerate_uninformed, fully_implements)
from .comparative import SweepResult, sweep
from .uninformed import (UninformedSolution, critical_wages, qbar, robust_policy,
                         robust_policy_partial, strategic_uncertainty)
from .wage_policy import TailWagePolicy, WagePolicy, more_dispersed, stats

__version__ = "0.1.0"
