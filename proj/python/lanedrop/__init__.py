"""Lane-drop bottleneck simulator with graph-based multi-agent DDPG control."""

from ._lanedrop import (
    BottleneckEnv,
    CheckpointError,
    ConfigError,
    IdmParams,
    RunConfig,
    ScenarioSpec,
    SimulationError,
    __version__,
    free_road,
    idm_acceleration,
    run_baseline,
    run_policy,
    scenario,
)

__all__ = [
    "BottleneckEnv",
    "CheckpointError",
    "ConfigError",
    "IdmParams",
    "RunConfig",
    "ScenarioSpec",
    "SimulationError",
    "__version__",
    "free_road",
    "idm_acceleration",
    "run_baseline",
    "run_policy",
    "scenario",
]
