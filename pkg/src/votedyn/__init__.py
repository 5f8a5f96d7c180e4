"""Stochastic model of vote accumulation on a social news site."""

from .model import (
    ListState,
    SiteParams,
    StoryParams,
    StoryState,
    fan_increment,
    front_page,
    ode_rhs,
    page_fraction,
    upcoming_page,
    visibility_rates,
)
from .observations import ObservationSeries
from .ode import SolveControls, SolverError, Trajectory, promotion_time, solve_story

__version__ = "0.1.0"
