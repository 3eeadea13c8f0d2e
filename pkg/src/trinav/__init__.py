"""Hierarchical language/vision/robot navigation loop.

A coarse-to-fine zero-shot navigation engine: a planning model picks a
direction (or backtracks, or stops), a grounding model boxes a visual
target in that direction, and a deterministic controller unprojects the
target, maps it, and drives there over a fast-marching distance field.
Ships with a deterministic gridworld simulator, scripted stand-ins for
both models, the full SR/OSR/SPL/NE metric suite, and a CLI.
"""

from .action import ActionKind, LanguageAction, VisionAction, parse_language_action, parse_vision_action
from .client import (
    HttpChatClient,
    HttpClientConfig,
    ImagePart,
    ModelReply,
    PromptPayload,
    TextPart,
    UsageLedger,
    build_language_prompt,
    build_vision_prompt,
    complete,
    format_report,
    ledger_report,
)
from .config import RunConfig, load_config
from .geometry import (
    AgentPose,
    BoundingBox,
    CameraIntrinsics,
    CameraPoint,
    DEFAULT_INTRINSICS,
    PixelSelection,
    PixelTarget,
    View,
    WorldPoint,
    camera_to_world,
    normalize_angle,
    select_target_pixel,
    unproject_pixel,
    view_heading,
)
from .history import BacktrackPolicy, HistoryMode, NavigationHistory, Waypoint
from .mapping import (
    CellState,
    DepthImage,
    GridCell,
    OccupancyGrid,
    inflate,
    integrate_depth,
    is_traversable,
)
from .metrics import EpisodeMetrics, RunAggregate, aggregate, episode_metrics
from .oracle import (
    AdversarialPlannerClient,
    ScriptedGrounderClient,
    ScriptedPlannerClient,
    WideBoxGrounderClient,
)
from .pipeline import (
    EpisodeConfig,
    TrajectoryLog,
    fallback_chain,
    read_trajectories,
    run_episode,
    write_trajectories,
)
from .planner import (
    ControlCommand,
    DistanceField,
    Path,
    compute_distance_field,
    extract_path,
    nearest_free_cell,
    path_to_commands,
)
from .replay import render_replay
from .sim import (
    Env,
    Episode,
    Landmark,
    Observation,
    World,
    execute,
    generate_episodes,
    geodesic_distance,
    load_episode_set,
    render_views,
    save_episode_set,
)

__version__ = "0.1.0"
