"""Empty-vehicle management for PRT networks: simulator, parametric EVM,
parameter search and the learned environment -> parameters mapping."""

from .evm import EVM_OFF, ControllerParams, EvmParams, StationView, decision_round, score_move
from .network import Edge, NetworkModel, Node, NodeKind, build_network, nd_between
from .simulator import DemandMode, DemandSpec, SimConfig, SimMetrics, Simulation, measure_ridership, run_simulation

__version__ = "0.1.0"

__all__ = [
    "EVM_OFF", "ControllerParams", "EvmParams", "StationView", "decision_round", "score_move",
    "Edge", "NetworkModel", "Node", "NodeKind", "build_network", "nd_between",
    "DemandMode", "DemandSpec", "SimConfig", "SimMetrics", "Simulation", "measure_ridership", "run_simulation",
]
