"""faultdrive: fault-injection campaigns for a deterministic 2D driving loop.

A small, self-contained harness: a kinematic 2D urban world, a range-scan
sensor, rule-based and MLP controllers, four classes of fault injectors
(data, hardware, timing, ml), and a campaign engine reporting mission
success rate, violations per km, accidents per km, and time to violation.
"""

from .agent import (
    ControllerParams,
    ControllerState,
    SensorFrame,
    SensorParams,
    Weights,
    WeightsError,
    load_weights,
    nn_forward,
    rule_controller,
    sense,
)
from .campaign import (
    CampaignReport,
    ConfigError,
    DataError,
    EpisodeRecord,
    Trial,
    compare_to_golden,
    compute_metrics,
    full_report,
    load_config,
    plan_campaign,
    run_campaign,
    run_episode,
    write_outputs,
)
from .faults import (
    FaultClass,
    FaultSpec,
    FaultTarget,
    FaultTrigger,
    SpecError,
    TimingChannel,
    inject_data_fault,
    inject_hardware_fault,
    inject_ml_fault,
    parse_fault_spec,
    select_locations,
    trigger_active,
)
from .stats import mann_whitney_u
from .violations import ViolationEvent, ViolationLedger, is_accident, observe
from .world import (
    Actor,
    ActorKind,
    ControlCommand,
    EgoState,
    LaneSegment,
    Mission,
    MissionStatus,
    OffMapError,
    Pose,
    ScenarioError,
    World,
    lane_metrics,
    load_scenario,
    load_scenario_file,
    mission_status,
    query_collisions,
    step,
)

__version__ = "0.1.0"
