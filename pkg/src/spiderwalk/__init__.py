"""Simple random walks on spiders: exact urn analytics and Monte Carlo limit checks."""
from .config import ExperimentConfig, n_steps
from .errors import (InvalidArgumentError, InvalidConfigurationError, InvalidPolylineError,
                     ResourceBudgetError, SpiderWalkError)
from .rng import RandomSource, RngStream, source_for, split_stream
from .spider import BODY, SpiderSite, WalkSummary, event_A, event_M, min_leg_max, step_spider, walk_spider

__version__ = "0.1.0"
