"""Byzantine-robust distributed gradient descent via geometric median of means."""

from .adversary import (AttackSpec, FixedFaultSet, ResampledFaultSet, RoundReports,
                        apply_attack, select_fault_set, silent)
from .aggregation import (AggregatorConfig, AllTrimmedError, MedianResult, c_alpha,
                          check_robustness_bound, geometric_median, median_of_means, trim_by_norm)
from .engine import RoundTrace, RunConfig, gd_step, run_byzantine_gd, run_standard_bgd
from .problem import (DataShard, Dataset, LinearRegression, LossModel, ProblemSpec, Sample,
                      generate_linear_regression, local_empirical_gradient, population_gradient,
                      sample_gradient, shard_dataset)

__version__ = "0.1.0"
