"""Architecture-model driven scheduling analysis and ACC co-simulation."""
from ._kernels import BACKEND
from .model import (ArchModel, Diagnostic, ModelError, TaskSet, TaskSpec, extract_task_set,
                    instantiate, validate)
from .parser import ADLSyntaxError, parse, parse_file, pretty_print, tokenize
from .schedulability import (best_fit_allocate, hyperperiod, ll_bound, ll_feasible,
                             min_feasible_period, response_time_analysis, simulate_schedule,
                             utilization)

__version__ = "0.1.0"
