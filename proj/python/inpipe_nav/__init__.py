"""Python bindings for the in-pipe navigation simulator."""

from ._inpipe import (
    Error,
    RouteMap,
    Scenario,
    describe,
    design_lqr,
    load_scenario,
    monte_carlo,
    parse_map,
    parse_scenario,
    read_trace,
    replicate_fig3,
    run_scenario,
    simulate,
)

__all__ = [
    "Error",
    "RouteMap",
    "Scenario",
    "describe",
    "design_lqr",
    "load_scenario",
    "monte_carlo",
    "parse_map",
    "parse_scenario",
    "read_trace",
    "replicate_fig3",
    "run_scenario",
    "simulate",
]
