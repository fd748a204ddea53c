"""Level-1 limit order book model with time-inhomogeneous order flow.

Modules
-------
specfun
    Bessel, incomplete gamma and exponential integral functions.
birth_death
    Single queue: extinction density, survival, time change, simulation.
lob
    Two-queue book: configuration, simulation, CSV records.
analytics
    Up-move probability, tails of the first price change, sign chain,
    limit constants and the meander density.
estimation
    Calibration from order-flow and price logs.
verification
    Independent oracles and statistical suites.
cli
    Command-line front end (``levelone``).
"""
from . import analytics, birth_death, estimation, lob, specfun
from .birth_death import QueueRates, RateSchedule
from .lob import ModelConfig, RedrawDistribution, simulate

__version__ = "0.1.0"

__all__ = [
    "analytics",
    "birth_death",
    "estimation",
    "lob",
    "specfun",
    "QueueRates",
    "RateSchedule",
    "ModelConfig",
    "RedrawDistribution",
    "simulate",
]
