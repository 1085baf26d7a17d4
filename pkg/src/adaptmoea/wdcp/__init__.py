"""Desk-scale warehouse design and control problem."""

from adaptmoea.wdcp.genome import WdcpGenome, audit_genome, decode_genome, genome_length
from adaptmoea.wdcp.scenario import (
    VARIANTS,
    SimScenario,
    default_scenario,
    load_scenario,
    save_scenario,
    scenario_variant,
)
from adaptmoea.wdcp.sim import SimResult, run_simulation, wdcp_lite_eval, wdcp_lite_problem

__all__ = [
    "VARIANTS", "SimResult", "SimScenario", "WdcpGenome", "audit_genome", "decode_genome",
    "default_scenario", "genome_length", "load_scenario", "run_simulation", "save_scenario",
    "scenario_variant", "wdcp_lite_eval", "wdcp_lite_problem",
]
