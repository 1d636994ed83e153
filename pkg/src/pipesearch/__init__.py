"""pipesearch: budgeted AutoML pipeline search with pluggable strategies,
post-processing, structured run logs, and a control API."""

from .components import default_space
from .orchestrator import Budget, RunConfig, RunResult, run_automl
from .space import Pipeline, SearchSpace

__version__ = "0.1.0"

__all__ = ["Budget", "RunConfig", "RunResult", "run_automl", "default_space",
           "Pipeline", "SearchSpace", "__version__"]
