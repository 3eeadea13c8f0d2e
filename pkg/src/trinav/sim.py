"""Deterministic desk-scale gridworld with synthetic four-view RGB-D.

Worlds are boolean wall grids plus labeled landmarks standing on free
cells. Depth views are rendered analytically: a per-column horizontal
raycast gives the wall distance, rows under the principal row show the
floor plane, and anything past the sensor range drops out as NaN (the
same hole pattern a real RGB-D camera produces on transparent surfaces).
RGB views are placeholders (depth visualizations); what matters for the
scripted clients are the per-view landmark annotations, which are only
emitted when the landmark is geometrically unoccluded.

Everything is seeded and reproducible byte for byte: worlds, episodes,
rendering, and kinematics contain no hidden randomness.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractError, DataError
from .geometry import (
    AgentPose,
    BoundingBox,
    CameraIntrinsics,
    DEFAULT_INTRINSICS,
    View,
    WorldPoint,
    normalize_angle,
    view_heading,
    world_to_camera,
)
from .mapping import CAMERA_HEIGHT, DepthImage
from .planner import ControlCommand, FORWARD_STEP, TURN_ANGLE, supercover_cells

MAX_SENSOR_RANGE = 10.0
AGENT_RADIUS = 0.12

#: Nominal landmark extents used for rendering its annotation box.
LANDMARK_WIDTH = 0.30
LANDMARK_HEIGHT = 0.50

_LABEL_POOL = (
    "potted plant",
    "floor lamp",
    "red armchair",
    "wooden table",
    "bookshelf",
    "black door",
    "white cabinet",
    "blue sofa",
    "coat rack",
    "tall mirror",
)


@dataclass(frozen=True)
class Landmark:
    label: str
    position: WorldPoint
    width: float = LANDMARK_WIDTH
    height: float = LANDMARK_HEIGHT

    def footprint(self) -> list[WorldPoint]:
        """Square footprint polygon centered on the landmark position."""
        h = self.width / 2.0
        x, z = self.position.x, self.position.z
        return [
            WorldPoint(x - h, z - h),
            WorldPoint(x + h, z - h),
            WorldPoint(x + h, z + h),
            WorldPoint(x - h, z + h),
        ]


@dataclass
class World:
    walls: np.ndarray  # bool (ni, nj); True = wall
    resolution: float
    origin: WorldPoint
    landmarks: list[Landmark]
    name: str = "world"
    _field_cache: dict = field(default_factory=dict, repr=False)

    # -- geometry helpers --------------------------------------------------

    def cell_index(self, p: WorldPoint) -> tuple[int, int]:
        return (
            int(math.floor((p.x - self.origin.x) / self.resolution)),
            int(math.floor((p.z - self.origin.z) / self.resolution)),
        )

    def cell_center(self, i: int, j: int) -> WorldPoint:
        return WorldPoint(
            self.origin.x + (i + 0.5) * self.resolution,
            self.origin.z + (j + 0.5) * self.resolution,
        )

    def in_bounds(self, i: int, j: int) -> bool:
        return 0 <= i < self.walls.shape[0] and 0 <= j < self.walls.shape[1]

    def is_free_point(self, p: WorldPoint) -> bool:
        i, j = self.cell_index(p)
        return self.in_bounds(i, j) and not self.walls[i, j]

    def landmark_by_label(self, label: str) -> Landmark:
        for lm in self.landmarks:
            if lm.label == label:
                return lm
        raise DataError(f"world {self.name!r} has no landmark {label!r}")

    # -- ground-truth geodesics -------------------------------------------

    def distance_field_to(self, target: WorldPoint) -> np.ndarray:
        """Geodesic distance (m) from every free cell center to ``target``.

        Seeded with exact point distances in a small visibility-checked
        ball so near-target values are not grid-quantized. Cached per
        target. BIG marks unreachable cells.
        """
        key = (round(target.x, 6), round(target.z, 6))
        cached = self._field_cache.get(key)
        if cached is not None:
            return cached

        free = ~self.walls
        gi, gj = self.cell_index(target)
        if not self.in_bounds(gi, gj) or self.walls[gi, gj]:
            raise DataError(f"geodesic target ({target.x:.2f}, {target.z:.2f}) is not free")

        seeds_i, seeds_j, seeds_t = [], [], []
        r = 3
        n0, n1 = free.shape
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                i, j = gi + di, gj + dj
                if not (0 <= i < n0 and 0 <= j < n1) or not free[i, j]:
                    continue
                if di * di + dj * dj > r * r:
                    continue
                if any(
                    not (0 <= a < n0 and 0 <= b < n1 and free[a, b])
                    for a, b in supercover_cells(gi, gj, i, j)
                ):
                    continue
                seeds_i.append(i)
                seeds_j.append(j)
                seeds_t.append(self.cell_center(i, j).distance_to(target))
        values = _kernels.eikonal_march(
            free,
            np.asarray(seeds_i, np.int64),
            np.asarray(seeds_j, np.int64),
            np.asarray(seeds_t, np.float64),
            self.resolution,
        )
        self._field_cache[key] = values
        return values

    def field_value_at(self, values: np.ndarray, p: WorldPoint) -> float:
        """Evaluate a distance field at an arbitrary free point.

        Takes the best of the four surrounding cell centers plus the
        straight hop to them, which removes most of the half-cell
        quantization without risking interpolation across walls.
        """
        res = self.resolution
        fi = (p.x - self.origin.x) / res - 0.5
        fj = (p.z - self.origin.z) / res - 0.5
        i0, j0 = int(math.floor(fi)), int(math.floor(fj))
        best = math.inf
        for i in (i0, i0 + 1):
            for j in (j0, j0 + 1):
                if not self.in_bounds(i, j):
                    continue
                v = values[i, j]
                if v >= 0.5 * _kernels.BIG:
                    continue
                cand = v + self.cell_center(i, j).distance_to(p)
                best = min(best, cand)
        return best


def geodesic_distance(world: World, a: WorldPoint, b: WorldPoint) -> float:
    """Shortest obstacle-respecting distance on the true wall grid (meters).

    Returns inf when the points are mutually unreachable.
    """
    values = world.distance_field_to(b)
    return world.field_value_at(values, a)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LandmarkAnnotation:
    label: str
    box: BoundingBox
    depth: float  # camera-frame z of the landmark center


@dataclass
class ViewObservation:
    depth: DepthImage
    rgb: np.ndarray  # uint8 (H, W, 3) placeholder
    annotations: list[LandmarkAnnotation]


@dataclass
class Observation:
    views: dict[View, ViewObservation]

    def visible_labels(self) -> tuple[str, ...]:
        seen = {a.label for v in self.views.values() for a in v.annotations}
        return tuple(sorted(seen))


def _annotate_view(world: World, pose: AgentPose, heading: float, k: CameraIntrinsics):
    out = []
    for lm in world.landmarks:
        x_cam, z_cam = world_to_camera(lm.position, AgentPose(pose.x, pose.z, heading))
        if z_cam < 0.15 or z_cam > MAX_SENSOR_RANGE:
            continue
        u = k.cx + k.fx * x_cam / z_cam
        if not (0 <= u < k.width):
            continue
        dx, dz = lm.position.x - pose.x, lm.position.z - pose.z
        horiz = math.hypot(dx, dz)
        hit = _kernels.raycast(
            world.walls,
            world.resolution,
            world.origin.x,
            world.origin.z,
            pose.x,
            pose.z,
            math.atan2(dz, dx),
            horiz + world.resolution,
        )
        if hit < horiz - 1e-9:
            continue  # occluded by a wall
        half_w = k.fx * (lm.width / 2.0) / z_cam
        v_bottom = k.cy + k.fy * CAMERA_HEIGHT / z_cam
        v_top = k.cy + k.fy * (CAMERA_HEIGHT - lm.height) / z_cam
        box = BoundingBox.normalized(u - half_w, v_top, u + half_w, v_bottom).clamped(
            k.width, k.height
        )
        if box.area == 0:
            continue
        out.append(LandmarkAnnotation(label=lm.label, box=box, depth=z_cam))
    return out


def render_views(
    world: World, pose: AgentPose, k: CameraIntrinsics = DEFAULT_INTRINSICS
) -> Observation:
    """Render the four egocentric views with landmark annotations."""
    if not world.is_free_point(pose.position):
        raise ContractError(
            f"cannot render from inside a wall at ({pose.x:.2f}, {pose.z:.2f})"
        )
    views = {}
    for view in (View.FRONT, View.LEFT, View.RIGHT, View.BACK):
        heading = view_heading(pose, view)
        depth = _kernels.render_depth(
            world.walls,
            world.resolution,
            world.origin.x,
            world.origin.z,
            pose.x,
            pose.z,
            heading,
            k.fx,
            k.fy,
            k.cx,
            k.cy,
            k.width,
            k.height,
            CAMERA_HEIGHT,
            MAX_SENSOR_RANGE,
        )
        gray = np.nan_to_num(depth, nan=0.0) / MAX_SENSOR_RANGE
        rgb = np.repeat((np.clip(gray, 0, 1) * 255).astype(np.uint8)[..., None], 3, axis=2)
        views[view] = ViewObservation(
            depth=DepthImage(values=depth),
            rgb=rgb,
            annotations=_annotate_view(world, pose, heading, k),
        )
    return Observation(views=views)


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------


def execute(
    world: World,
    pose: AgentPose,
    cmd: ControlCommand,
    forward_step: float = FORWARD_STEP,
    turn_angle: float = TURN_ANGLE,
) -> tuple[AgentPose, bool]:
    """Apply one discrete command; returns (new pose, collided).

    Forward motion sweeps a disk of the agent radius; if it would touch a
    wall the pose is unchanged and the collision flag is set. Turns are
    exact and never collide.
    """
    if cmd is ControlCommand.MOVE_FORWARD:
        nx = pose.x + forward_step * math.cos(pose.heading)
        nz = pose.z + forward_step * math.sin(pose.heading)
        if _kernels.swept_disk_hits_wall(
            world.walls,
            world.resolution,
            world.origin.x,
            world.origin.z,
            pose.x,
            pose.z,
            nx,
            nz,
            AGENT_RADIUS,
        ):
            return pose, True
        return AgentPose(nx, nz, pose.heading), False
    if cmd is ControlCommand.TURN_LEFT:
        return AgentPose(pose.x, pose.z, normalize_angle(pose.heading + turn_angle)), False
    if cmd is ControlCommand.TURN_RIGHT:
        return AgentPose(pose.x, pose.z, normalize_angle(pose.heading - turn_angle)), False
    return pose, False  # STOP


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------


@dataclass
class Episode:
    id: str
    world_name: str
    instruction: str
    landmark_labels: tuple[str, ...]  # in instruction order; last one is the goal
    start: AgentPose
    goal: WorldPoint
    gt_path_length: float
    decoy: WorldPoint | None = None  # wrong-turn target for adversarial scenarios


class Env:
    """Per-episode mutable state: pose, trace, and observation caching."""

    def __init__(
        self,
        world: World,
        episode: Episode,
        k: CameraIntrinsics = DEFAULT_INTRINSICS,
        forward_step: float = FORWARD_STEP,
        turn_angle: float = TURN_ANGLE,
    ):
        if not world.is_free_point(episode.start.position):
            raise ContractError("episode start is inside a wall")
        self.world = world
        self.episode = episode
        self.k = k
        self.forward_step = forward_step
        self.turn_angle = turn_angle
        self.pose = episode.start
        self.collisions = 0
        self.poses: list[AgentPose] = [episode.start]
        self._obs_cache: tuple[AgentPose, Observation] | None = None

    def observe(self) -> Observation:
        if self._obs_cache is not None and self._obs_cache[0] == self.pose:
            return self._obs_cache[1]
        obs = render_views(self.world, self.pose, self.k)
        self._obs_cache = (self.pose, obs)
        return obs

    def execute(self, cmd: ControlCommand) -> tuple[AgentPose, bool]:
        pose, collided = execute(self.world, self.pose, cmd, self.forward_step, self.turn_angle)
        self.pose = pose
        self.poses.append(pose)
        if collided:
            self.collisions += 1
        return pose, collided

    def geodesic_to(self, target: WorldPoint) -> float:
        return geodesic_distance(self.world, self.pose.position, target)


# ---------------------------------------------------------------------------
# procedural generation
# ---------------------------------------------------------------------------


def _carve_world(extent_x: float, extent_z: float, resolution: float) -> np.ndarray:
    """All-wall grid sized for the extent plus a one-cell border."""
    ni = int(round(extent_x / resolution)) + 2
    nj = int(round(extent_z / resolution)) + 2
    return np.ones((ni, nj), bool)


def _free_rect(walls: np.ndarray, res: float, x0: float, z0: float, x1: float, z1: float):
    """Carve the rectangle [x0,x1) x [z0,z1) (world coords, origin at 0)."""
    i0 = max(int(round(x0 / res)) + 1, 1)
    j0 = max(int(round(z0 / res)) + 1, 1)
    i1 = min(int(round(x1 / res)) + 1, walls.shape[0] - 1)
    j1 = min(int(round(z1 / res)) + 1, walls.shape[1] - 1)
    walls[i0:i1, j0:j1] = False


def _snap(world: World, x: float, z: float) -> WorldPoint:
    i, j = world.cell_index(WorldPoint(x, z))
    return world.cell_center(i, j)


def _make_world(walls: np.ndarray, resolution: float, name: str) -> World:
    # origin offset accounts for the border cell at index 0
    return World(
        walls=walls,
        resolution=resolution,
        origin=WorldPoint(-resolution, -resolution),
        landmarks=[],
        name=name,
    )


def _add_landmark(world: World, label: str, x: float, z: float) -> Landmark:
    lm = Landmark(label=label, position=_snap(world, x, z))
    if not world.is_free_point(lm.position):
        raise DataError(f"landmark {label!r} placed on a wall cell")
    world.landmarks.append(lm)
    return lm


def _instruction(labels: list[str]) -> str:
    if len(labels) == 1:
        return f"go to the {labels[0]}"
    walk = ", then walk past the ".join(labels[:-1])
    return f"walk past the {walk}, then go to the {labels[-1]}"


def _build_corridor(rng, resolution: float, name: str) -> tuple[World, dict]:
    length = float(rng.uniform(7.0, 10.0))
    width = float(rng.uniform(1.6, 2.2))
    walls = _carve_world(length, width, resolution)
    world = _make_world(walls, resolution, name)
    _free_rect(walls, resolution, 0, 0, length, width)

    n_marks = int(rng.integers(2, 4))  # 2 or 3
    labels = [str(x) for x in rng.choice(_LABEL_POOL, size=n_marks, replace=False)]
    fracs = np.linspace(0.45, 0.92, n_marks)
    for label, frac in zip(labels, fracs):
        side = float(rng.choice((-1.0, 1.0)))
        off = side * (width / 2.0 - 0.45)
        _add_landmark(world, label, 0.5 + frac * (length - 1.0), width / 2.0 + off)

    start = AgentPose(0.5, width / 2.0, 0.0)
    return world, {"labels": labels, "start": start}


def _build_rooms(rng, resolution: float, name: str) -> tuple[World, dict]:
    n_rooms = 3
    sizes = [float(rng.uniform(3.2, 4.2)) for _ in range(n_rooms)]
    depth = float(rng.uniform(3.2, 4.2))
    door_w = 0.9
    wall_t = 2 * resolution

    walls = _carve_world(sum(sizes) + wall_t * (n_rooms - 1), depth, resolution)
    world = _make_world(walls, resolution, name)

    x = 0.0
    bounds = []
    for idx, sx in enumerate(sizes):
        _free_rect(walls, resolution, x, 0, x + sx, depth)
        bounds.append((x, x + sx))
        if idx < n_rooms - 1:
            door_z = float(rng.uniform(0.7, depth - 0.7 - door_w))
            _free_rect(walls, resolution, x + sx, door_z, x + sx + wall_t, door_z + door_w)
        x += sx + wall_t

    n_marks = int(rng.integers(2, 4))  # 2 or 3 landmarks
    rooms_used = list(range(n_rooms - n_marks, n_rooms))
    labels = [str(x) for x in rng.choice(_LABEL_POOL, size=n_marks, replace=False)]
    for label, ridx in zip(labels, rooms_used):
        x0, x1 = bounds[ridx]
        lx = float(rng.uniform(x0 + 0.6, x1 - 0.6))
        lz = float(rng.uniform(0.6, depth - 0.6))
        _add_landmark(world, label, lx, lz)

    start = AgentPose(0.6, depth / 2.0, 0.0)
    return world, {"labels": labels, "start": start}


def _build_trap(rng, resolution: float, name: str) -> tuple[World, dict]:
    """T-bar corridor: goal down one arm, a decoy dead end down the other."""
    width = 1.8
    arm_goal = float(rng.uniform(4.0, 5.5))
    arm_decoy = float(rng.uniform(3.5, 5.0))
    walls = _carve_world(width, arm_goal + arm_decoy + 1.0, resolution)
    world = _make_world(walls, resolution, name)
    # one corridor along z; the agent starts in the middle facing +x (a wall)
    _free_rect(walls, resolution, 0, 0, width, arm_goal + arm_decoy + 1.0)

    z_start = arm_decoy + 0.5
    label = str(rng.choice(_LABEL_POOL))
    lm = _add_landmark(world, label, width / 2.0, z_start + arm_goal - 0.4)
    decoy = _snap(world, width / 2.0, 0.4)
    start = AgentPose(width / 2.0, z_start, 0.0)
    return world, {"labels": [label], "start": start, "decoy": decoy, "goal": lm.position}


def _build_long_hall(rng, resolution: float, name: str) -> tuple[World, dict]:
    """A hall longer than the sensor range: far floor renders as holes."""
    length = float(rng.uniform(15.0, 17.0))
    width = 2.0
    walls = _carve_world(length, width, resolution)
    world = _make_world(walls, resolution, name)
    _free_rect(walls, resolution, 0, 0, length, width)

    label = str(rng.choice(_LABEL_POOL))
    _add_landmark(world, label, length - 3.5, width / 2.0 - 0.5)
    start = AgentPose(0.5, width / 2.0, 0.0)
    return world, {"labels": [label], "start": start}


_BUILDERS = {
    "corridor": _build_corridor,
    "rooms": _build_rooms,
    "trap": _build_trap,
    "long_hall": _build_long_hall,
}

DIFFICULTIES = tuple(sorted(_BUILDERS))


def generate_episodes(
    seed: int, count: int, difficulty: str = "corridor", resolution: float = 0.05
) -> tuple[list[Episode], dict[str, World]]:
    """Seeded procedural episodes; identical (seed, count, difficulty) in,
    identical worlds and episodes out."""
    if difficulty not in _BUILDERS:
        raise DataError(
            f"unknown difficulty {difficulty!r}; valid: {', '.join(DIFFICULTIES)}"
        )
    episodes: list[Episode] = []
    worlds: dict[str, World] = {}
    for idx in range(count):
        rng = np.random.default_rng([seed, idx])
        name = f"{difficulty}-{seed}-{idx:03d}"
        world, info = _BUILDERS[difficulty](rng, resolution, name)
        labels = info["labels"]
        start: AgentPose = info["start"]
        goal = info.get("goal", world.landmark_by_label(labels[-1]).position)
        gt = geodesic_distance(world, start.position, goal)
        if not math.isfinite(gt) or gt <= 0:
            raise DataError(f"episode {name} has no route from start to goal")
        episodes.append(
            Episode(
                id=name,
                world_name=name,
                instruction=_instruction(labels),
                landmark_labels=tuple(labels),
                start=start,
                goal=goal,
                gt_path_length=gt,
                decoy=info.get("decoy"),
            )
        )
        worlds[name] = world
    return episodes, worlds


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def world_to_ascii(world: World) -> str:
    """Plain-text map: '#' wall, '.' free, 'A'..'Z' landmark cells."""
    ni, nj = world.walls.shape
    rows = np.where(world.walls, "#", ".").astype(object)
    for idx, lm in enumerate(world.landmarks):
        if idx >= 26:
            raise DataError("ascii maps support at most 26 landmarks")
        i, j = world.cell_index(lm.position)
        rows[i, j] = chr(ord("A") + idx)
    lines = ["".join(rows[:, j]) for j in range(nj - 1, -1, -1)]
    return "\n".join(lines) + "\n"


def world_from_ascii(
    text: str,
    labels: dict[str, str],
    resolution: float = 0.05,
    origin: WorldPoint = WorldPoint(0.0, 0.0),
    name: str = "world",
) -> World:
    lines = [ln for ln in text.splitlines() if ln]
    nj = len(lines)
    ni = len(lines[0])
    if any(len(ln) != ni for ln in lines):
        raise DataError("ascii map rows have unequal lengths")
    walls = np.zeros((ni, nj), bool)
    marks: list[tuple[str, int, int]] = []
    for row, line in enumerate(lines):
        j = nj - 1 - row
        for i, ch in enumerate(line):
            if ch == "#":
                walls[i, j] = True
            elif ch == ".":
                pass
            elif "A" <= ch <= "Z":
                marks.append((ch, i, j))
            else:
                raise DataError(f"unexpected map character {ch!r}")
    world = World(walls=walls, resolution=resolution, origin=origin, landmarks=[], name=name)
    for ch, i, j in sorted(marks):
        if ch not in labels:
            raise DataError(f"map letter {ch} missing from the label table")
        world.landmarks.append(Landmark(label=labels[ch], position=world.cell_center(i, j)))
    return world


def save_world(world: World, map_path: str, labels_path: str) -> None:
    with open(map_path, "w") as f:
        f.write(world_to_ascii(world))
    with open(labels_path, "w") as f:
        for idx, lm in enumerate(world.landmarks):
            f.write(f"{chr(ord('A') + idx)}\t{lm.label}\n")


def load_world(
    map_path: str, labels_path: str, resolution: float = 0.05, name: str = "world"
) -> World:
    labels: dict[str, str] = {}
    with open(labels_path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            letter, _, label = line.partition("\t")
            labels[letter] = label
    with open(map_path) as f:
        text = f.read()
    # generated worlds put their origin one border cell below zero
    return world_from_ascii(
        text,
        labels,
        resolution,
        origin=WorldPoint(-resolution, -resolution),
        name=name,
    )


def _episode_to_dict(ep: Episode) -> dict:
    d = {
        "id": ep.id,
        "world": ep.world_name,
        "instruction": ep.instruction,
        "landmarks": list(ep.landmark_labels),
        "start": [ep.start.x, ep.start.z, ep.start.heading],
        "goal": [ep.goal.x, ep.goal.z],
        "gt_path_length": ep.gt_path_length,
    }
    if ep.decoy is not None:
        d["decoy"] = [ep.decoy.x, ep.decoy.z]
    return d


def _episode_from_dict(d: dict) -> Episode:
    return Episode(
        id=d["id"],
        world_name=d["world"],
        instruction=d["instruction"],
        landmark_labels=tuple(d["landmarks"]),
        start=AgentPose(*d["start"]),
        goal=WorldPoint(*d["goal"]),
        gt_path_length=float(d["gt_path_length"]),
        decoy=WorldPoint(*d["decoy"]) if "decoy" in d else None,
    )


def save_episode_set(
    out_dir: str,
    episodes: list[Episode],
    worlds: dict[str, World],
    seed: int,
    difficulty: str,
    resolution: float = 0.05,
) -> str:
    """Write episodes.json plus one map/label pair per world; returns the
    episodes.json path."""
    worlds_dir = os.path.join(out_dir, "worlds")
    os.makedirs(worlds_dir, exist_ok=True)
    for name in sorted(worlds):
        save_world(
            worlds[name],
            os.path.join(worlds_dir, f"{name}.map"),
            os.path.join(worlds_dir, f"{name}.labels.tsv"),
        )
    doc = {
        "schema": 1,
        "seed": seed,
        "difficulty": difficulty,
        "resolution": resolution,
        "episodes": [_episode_to_dict(ep) for ep in episodes],
    }
    path = os.path.join(out_dir, "episodes.json")
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_episode_set(episodes_path: str) -> tuple[list[Episode], dict[str, World]]:
    with open(episodes_path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"unreadable episode set {episodes_path}: {exc}")
    if not isinstance(doc, dict) or doc.get("schema") != 1 or "episodes" not in doc:
        raise DataError(f"{episodes_path} is not an episode-set document")
    episodes = [_episode_from_dict(d) for d in doc["episodes"]]
    resolution = float(doc.get("resolution", 0.05))
    worlds_dir = os.path.join(os.path.dirname(os.path.abspath(episodes_path)), "worlds")
    worlds: dict[str, World] = {}
    for ep in episodes:
        if ep.world_name not in worlds:
            worlds[ep.world_name] = load_world(
                os.path.join(worlds_dir, f"{ep.world_name}.map"),
                os.path.join(worlds_dir, f"{ep.world_name}.labels.tsv"),
                resolution,
                name=ep.world_name,
            )
    return episodes, worlds
