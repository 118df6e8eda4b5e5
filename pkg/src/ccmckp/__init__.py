"""Data-driven chance-constrained multiple-choice knapsack toolkit."""
from .baselines import (BaselineResult, EdaParams, GaParams, eda, gaussian_baseline,
                        genetic_algorithm, greedy)
from .evaluate import (EvalOutcome, Evaluator, Method, accelerated_mc, bernstein_lower_bound,
                       brute_force_confidence, brute_force_feasible, build_screen_tuples,
                       exact_feasibility, fast_screen, gaussian_feasibility,
                       hoeffding_lower_bound, monte_carlo_confidence, picked_moments,
                       popped_sums_prefix, required_sample_size, violation_allowance)
from .generator import (BenchmarkSpec, DistributionSpec, TruthModel, generate, generate_app,
                        generate_lab, preset, preset_benchmarks, real_confidence,
                        sample_true_delay)
from .harness import (ExperimentReport, RunConfig, amc_speed_probe, evaluator_selection,
                      run_ablation, run_experiment)
from .instance import (Instance, Item, ParseError, Solution, SolutionError, ValidationError,
                       load_instance, loads_instance, total_cost)
from .search import DdalsParams, DdalsResult, constructive_procedure, ddals, sfe_select

__version__ = "0.1.0"
