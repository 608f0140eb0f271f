"""Stochastic capacity expansion and storage bidding toolkit.

Desk-scale planning of wind plus long-duration storage under weather
uncertainty: nested-decomposition training of dispatch policies
(:mod:`~stockpile.sddp`), exact tree benchmarks
(:mod:`~stockpile.benchmarks`), bid curves and dual audits
(:mod:`~stockpile.analysis`), weather lattices and stagewise
independence tests (:mod:`~stockpile.weather`), all on top of a
self-contained bounded-variable simplex (:mod:`~stockpile.lp`). The
``stockpile`` console script drives the same machinery from YAML run
configurations (:mod:`~stockpile.config`).
"""
from . import (
    analysis,
    benchmarks,
    config,
    errors,
    lp,
    model,
    presets,
    sddp,
    weather,
)
from .analysis import bid_conversion, kkt_audit, msv_curve
from .benchmarks import extensive_form, perfect_foresight
from .model import (
    Generator,
    MarketScenario,
    Storage,
    TechnologyCatalog,
    WeatherVector,
)
from .sddp import Policy, TrainOptions, simulate, train
from .weather import SamplingLattice, WeatherPath

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "benchmarks",
    "config",
    "errors",
    "lp",
    "model",
    "presets",
    "sddp",
    "weather",
    "bid_conversion",
    "kkt_audit",
    "msv_curve",
    "extensive_form",
    "perfect_foresight",
    "Generator",
    "MarketScenario",
    "Storage",
    "TechnologyCatalog",
    "WeatherVector",
    "Policy",
    "TrainOptions",
    "simulate",
    "train",
    "SamplingLattice",
    "WeatherPath",
    "__version__",
]
