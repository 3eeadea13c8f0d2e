"""Per-step plan -> ground -> move loop with fallbacks and logging.

Each step: build the planner prompt from the instruction, history and the
four current views; parse the reply into a language action. Stop ends the
episode on the spot. Backtrack resolves a recorded waypoint into the
navigation goal. Navigate grounds a target in the chosen view, selects
its target pixel, unprojects it with the view heading, and the motion
phase drives there over the agent's own map with periodic replanning.

Failures never crash an episode. The ordered fallback chain is: re-ask
the model (bounded), reselect depth by in-box median, project the goal to
the nearest free cell, fall back to a short forward probe, and finally
count the step as skipped. Only transport failures end an episode early
(termination "unrecoverable").

The trajectory log captures every step and every executed command, enough
to replay the run and compute all metrics; with scripted clients the log
is byte-identical across repeated runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .action import (
    ActionKind,
    LanguageAction,
    parse_language_action,
    parse_vision_action,
)
from .client import (
    ModelReply,
    PromptPayload,
    TextPart,
    UsageLedger,
    build_language_prompt,
    build_vision_prompt,
)
from .errors import (
    BacktrackPolicyError,
    DegenerateBoxError,
    GoalUnreachableError,
    InvalidDepthError,
    NoPathError,
    NoValidDepthError,
    ParseError,
    StaleWaypointError,
    TransportError,
)
from .geometry import (
    AgentPose,
    BoundingBox,
    CameraIntrinsics,
    PixelSelection,
    PixelTarget,
    View,
    WorldPoint,
    camera_to_world,
    select_target_pixel,
    unproject_pixel,
    view_heading,
)
from .history import BacktrackPolicy, HistoryMode, NavigationHistory
from .mapping import OccupancyGrid, integrate_depth
from .planner import compute_distance_field, extract_path, nearest_free_cell, path_to_commands
from .sim import Env

LOG_SCHEMA = 1


@dataclass
class EpisodeConfig:
    """Knobs of one pipeline run; every field has a sensible default."""

    max_steps: int = 12
    success_radius: float = 3.0
    pixel_strategy: PixelSelection = PixelSelection.BOTTOM_CENTER
    backtrack_policy: BacktrackPolicy = BacktrackPolicy.ANY
    history_mode: HistoryMode = HistoryMode.VISUAL_AND_ACTIONS
    history_budget: int = 6
    commands_per_step: int = 40
    replan_interval: int = 5
    reach_tolerance: float = 0.2
    goal_project_radius: float = 0.75
    probe_distance: float = 0.5
    reask_budget: int = 2
    temperature: float = 0.0
    max_tokens: int = 512
    map_resolution: float = 0.05
    inflation_radius: float = 0.18
    forward_step: float = 0.25
    turn_angle: float = math.radians(15.0)
    seed: int = 0

    def __post_init__(self):
        if self.success_radius <= 0:
            raise ValueError("success radius must be positive")
        if self.max_steps < 1:
            raise ValueError("need at least one step")


@dataclass
class StepState:
    """What the fallback chain needs to know about a failed step."""

    pose: AgentPose
    grid: OccupancyGrid
    k: CameraIntrinsics
    view: View | None = None
    box: BoundingBox | None = None
    depth: np.ndarray | None = None
    goal: WorldPoint | None = None
    pixel_failed: bool = False


def fallback_chain(
    state: StepState, config: EpisodeConfig
) -> tuple[WorldPoint | None, list[str]]:
    """Resolve a world goal after an upstream failure (total function).

    Chain order after the call-site re-asks: median-depth reselection,
    nearest-free-cell projection, a short forward probe, then skip
    (returns None). The tags name each stage actually used.
    """
    fallbacks: list[str] = []
    goal = state.goal

    if goal is None and state.pixel_failed and state.box is not None and state.depth is not None:
        try:
            pixel, d = select_target_pixel(state.box, state.depth, PixelSelection.MEDIAN_DEPTH)
            cam = unproject_pixel(state.k, pixel, d)
            goal = camera_to_world(
                cam, AgentPose(state.pose.x, state.pose.z, view_heading(state.pose, state.view))
            )
            fallbacks.append("median_depth")
        except (NoValidDepthError, InvalidDepthError):
            pass

    if goal is not None and not state.grid.is_traversable(goal):
        try:
            cell = nearest_free_cell(state.grid, goal, config.goal_project_radius)
            goal = state.grid.cell_center(cell)
            fallbacks.append("nearest_free")
        except GoalUnreachableError:
            goal = None

    if goal is None:
        fallbacks.append("forward_probe")
        probe = WorldPoint(
            state.pose.x + config.probe_distance * math.cos(state.pose.heading),
            state.pose.z + config.probe_distance * math.sin(state.pose.heading),
        )
        if state.grid.is_traversable(probe):
            goal = probe
        else:
            try:
                cell = nearest_free_cell(state.grid, probe, 0.35)
                goal = state.grid.cell_center(cell)
            except GoalUnreachableError:
                goal = None

    if goal is None:
        fallbacks.append("skipped")
    return goal, fallbacks


@dataclass
class TrajectoryLog:
    episode_id: str
    instruction: str
    start_pose: list[float]
    steps: list[dict] = field(default_factory=list)
    final_pose: list[float] = field(default_factory=list)
    termination: str = "step_budget"
    collisions: int = 0
    path_length: float = 0.0
    usage: dict = field(default_factory=lambda: {"input_tokens": 0, "output_tokens": 0, "calls": 0})

    def to_dict(self) -> dict:
        return {
            "schema": LOG_SCHEMA,
            "episode_id": self.episode_id,
            "instruction": self.instruction,
            "start_pose": self.start_pose,
            "termination": self.termination,
            "collisions": self.collisions,
            "path_length": self.path_length,
            "usage": self.usage,
            "final_pose": self.final_pose,
            "steps": self.steps,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrajectoryLog":
        if d.get("schema") != LOG_SCHEMA:
            raise ValueError(f"unsupported log schema {d.get('schema')!r}")
        return TrajectoryLog(
            episode_id=d["episode_id"],
            instruction=d["instruction"],
            start_pose=list(d["start_pose"]),
            steps=list(d["steps"]),
            final_pose=list(d["final_pose"]),
            termination=d["termination"],
            collisions=int(d["collisions"]),
            path_length=float(d["path_length"]),
            usage=dict(d["usage"]),
        )


def trajectory_poses(log: TrajectoryLog) -> list[tuple[float, float, float]]:
    """Every pose the agent occupied, in order (start plus one per command)."""
    poses = [tuple(log.start_pose)]
    for step in log.steps:
        for cmd in step["commands"]:
            poses.append(tuple(cmd["pose"]))
    return poses


def write_trajectories(path: str, logs: list[TrajectoryLog]) -> None:
    """One JSON line per episode; stable key order for byte-level diffing."""
    with open(path, "w") as f:
        for log in logs:
            f.write(json.dumps(log.to_dict(), sort_keys=True, separators=(",", ":")))
            f.write("\n")


def read_trajectories(path: str) -> list[TrajectoryLog]:
    logs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                logs.append(TrajectoryLog.from_dict(json.loads(line)))
    return logs


class _StageCaller:
    """Complete + parse with a bounded re-ask loop and usage accounting."""

    def __init__(self, config: EpisodeConfig, ledger: UsageLedger | None, episode_id: str):
        self.config = config
        self.ledger = ledger
        self.episode_id = episode_id
        self.step_usage = {"input_tokens": 0, "output_tokens": 0, "calls": 0}

    def reset_step(self):
        self.step_usage = {"input_tokens": 0, "output_tokens": 0, "calls": 0}

    def _account(self, stage: str, client, reply: ModelReply):
        self.step_usage["input_tokens"] += reply.input_tokens
        self.step_usage["output_tokens"] += reply.output_tokens
        self.step_usage["calls"] += 1
        if self.ledger is not None:
            cost = client.cost_of(reply) if hasattr(client, "cost_of") else 0.0
            self.ledger.record(stage, self.episode_id, reply, cost)

    def ask(self, stage: str, client, payload: PromptPayload, parser, fallbacks: list[str]):
        """Returns parser(reply.text) or None after the re-ask budget."""
        current = payload
        for attempt in range(self.config.reask_budget + 1):
            reply = client.complete(current)
            self._account(stage, client, reply)
            try:
                return parser(reply.text)
            except (ParseError, DegenerateBoxError, StaleWaypointError, BacktrackPolicyError) as exc:
                if attempt >= self.config.reask_budget:
                    return None
                fallbacks.append("reask")
                reminder = TextPart(
                    f"Your previous reply could not be used ({exc}). "
                    "Reply exactly in the requested format."
                )
                current = PromptPayload(
                    current.parts + (reminder,),
                    role=current.role,
                    temperature=current.temperature,
                    max_tokens=current.max_tokens,
                )
        return None


def _pose_list(pose: AgentPose) -> list[float]:
    return [pose.x, pose.z, pose.heading]


def run_episode(
    env: Env,
    config: EpisodeConfig,
    planner_client,
    grounder_client,
    ledger: UsageLedger | None = None,
) -> TrajectoryLog:
    """Drive one episode to termination; returns the full trajectory log."""
    grid = OccupancyGrid(config.map_resolution, config.inflation_radius)
    history = NavigationHistory(mode=config.history_mode)
    caller = _StageCaller(config, ledger, env.episode.id)
    log = TrajectoryLog(
        episode_id=env.episode.id,
        instruction=env.episode.instruction,
        start_pose=_pose_list(env.episode.start),
    )
    allow_backtrack = config.backtrack_policy is not BacktrackPolicy.DISABLED

    def integrate_observation(obs, views=(View.FRONT, View.LEFT, View.RIGHT, View.BACK)):
        for view in views:
            integrate_depth(grid, obs.views[view].depth, env.k, env.pose, view, stride=2)
        grid.inflate()

    try:
        for step_index in range(config.max_steps):
            caller.reset_step()
            step_pose = env.pose
            obs = env.observe()
            integrate_observation(obs)
            fallbacks: list[str] = []

            payload = build_language_prompt(
                env.episode.instruction,
                history.render_context(config.history_budget),
                {v: obs.views[v].rgb for v in View},
                temperature=config.temperature,
                max_tokens=config.max_tokens,
                allow_backtrack=allow_backtrack,
            )
            parsed = caller.ask("planner", planner_client, payload, parse_language_action, fallbacks)
            if parsed is None:
                action, progress = LanguageAction.navigate(View.FRONT), ""
                probe_step = True
            else:
                action, progress = parsed
                probe_step = False

            history.record_step(
                step_pose,
                {v: obs.views[v].rgb for v in View},
                obs.visible_labels(),
                action.to_text(),
                progress,
            )

            record = {
                "index": step_index,
                "pose": _pose_list(step_pose),
                "language_action": action.to_text(),
                "progress": progress,
                "vision": None,
                "goal": None,
                "fallbacks": fallbacks,
                "skipped": False,
                "commands": [],
                "usage": caller.step_usage,
            }
            log.steps.append(record)

            if action.kind is ActionKind.STOP and not probe_step:
                log.termination = "stopped"
                break

            state = StepState(pose=step_pose, grid=grid, k=env.k)
            goal: WorldPoint | None = None

            if action.kind is ActionKind.BACKTRACK and not probe_step:
                # backtrack resolution fails on policy, not on format, so
                # the re-ask loop re-parses the action and re-resolves it
                def backtrack_parser(text):
                    act, _ = parse_language_action(text)
                    if act.kind is not ActionKind.BACKTRACK:
                        return None  # model changed its mind: handle below
                    return history.resolve_backtrack(act.waypoint_id, config.backtrack_policy)

                try:
                    goal = history.resolve_backtrack(action.waypoint_id, config.backtrack_policy)
                except (StaleWaypointError, BacktrackPolicyError) as exc:
                    retry = caller.ask(
                        "planner",
                        planner_client,
                        PromptPayload(
                            payload.parts
                            + (
                                TextPart(
                                    f"Backtracking to that waypoint is unavailable ({exc}). "
                                    "Choose another action."
                                ),
                            ),
                            temperature=config.temperature,
                            max_tokens=config.max_tokens,
                        ),
                        backtrack_parser,
                        fallbacks,
                    )
                    if isinstance(retry, WorldPoint):
                        goal = retry
                    else:
                        goal = None

            elif not probe_step:  # NAVIGATE
                direction = action.direction
                want_point = config.pixel_strategy is PixelSelection.DIRECT_POINT
                vision_payload = build_vision_prompt(
                    env.episode.instruction,
                    progress,
                    direction,
                    obs.views[direction].rgb,
                    temperature=config.temperature,
                    max_tokens=256,
                    want_point=want_point,
                )
                vision = caller.ask(
                    "grounder",
                    grounder_client,
                    vision_payload,
                    lambda text: parse_vision_action(
                        text, env.k.width, env.k.height, expect_point=want_point
                    ),
                    fallbacks,
                )
                depth_img = obs.views[direction].depth.values
                state.view = direction
                state.depth = depth_img
                if vision is not None:
                    record["vision"] = {
                        "description": vision.description,
                        "bbox": [vision.box.x1, vision.box.y1, vision.box.x2, vision.box.y2]
                        if vision.box
                        else None,
                        "point": [vision.point.u, vision.point.v] if vision.point else None,
                    }
                    state.box = vision.box
                    try:
                        dummy = BoundingBox(0, 0, 0, 0)  # DIRECT_POINT ignores the box
                        pixel, d = select_target_pixel(
                            vision.box if vision.box else dummy,
                            depth_img,
                            config.pixel_strategy,
                            point=vision.point,
                        )
                        cam = unproject_pixel(env.k, pixel, d)
                        goal = camera_to_world(
                            cam,
                            AgentPose(step_pose.x, step_pose.z, view_heading(step_pose, direction)),
                        )
                    except (NoValidDepthError, InvalidDepthError):
                        state.pixel_failed = True
                        goal = None

            state.goal = goal
            goal, chain_tags = fallback_chain(state, config)
            fallbacks.extend(chain_tags)
            if goal is None:
                record["skipped"] = True
                continue
            record["goal"] = [goal.x, goal.z]

            # ---- motion phase: drive to the goal with periodic replanning
            executed = 0
            probed_already = "forward_probe" in fallbacks
            while executed < config.commands_per_step:
                try:
                    fd = compute_distance_field(grid, goal, config.goal_project_radius)
                    try:
                        path = extract_path(fd, env.pose.position)
                    except NoPathError:
                        start_cell = nearest_free_cell(grid, env.pose.position, 0.3)
                        path = extract_path(fd, grid.cell_center(start_cell))
                except (GoalUnreachableError, NoPathError):
                    if probed_already:
                        record["skipped"] = not record["commands"]
                        break
                    probed_already = True
                    state.goal = None
                    state.pixel_failed = False
                    goal, chain_tags = fallback_chain(state, config)
                    fallbacks.extend(chain_tags)
                    if goal is None:
                        record["skipped"] = not record["commands"]
                        break
                    record["goal"] = [goal.x, goal.z]
                    continue

                cmds = path_to_commands(
                    path,
                    env.pose,
                    forward_step=config.forward_step,
                    turn_angle=config.turn_angle,
                    lookahead=config.forward_step,
                    max_commands=min(config.replan_interval, config.commands_per_step - executed),
                )
                if not cmds:
                    break
                for cmd in cmds:
                    pose, collided = env.execute(cmd)
                    record["commands"].append(
                        {"cmd": cmd.value, "pose": _pose_list(pose), "collided": collided}
                    )
                    executed += 1
                    if collided:
                        break
                if env.pose.position.distance_to(goal) < config.reach_tolerance:
                    break
                # replan cadence: a fresh forward look is enough mid-step
                integrate_observation(env.observe(), views=(View.FRONT,))

    except TransportError as exc:
        log.termination = "unrecoverable"
        log.steps.append({"index": len(log.steps), "error": str(exc)})

    log.final_pose = _pose_list(env.pose)
    log.collisions = env.collisions
    log.path_length = sum(
        env.poses[i].position.distance_to(env.poses[i + 1].position)
        for i in range(len(env.poses) - 1)
    )
    totals = {"input_tokens": 0, "output_tokens": 0, "calls": 0}
    for step in log.steps:
        for key in totals:
            totals[key] += step.get("usage", {}).get(key, 0)
    log.usage = totals
    return log
