"""Deterministic scripted clients that answer prompts from ground truth.

These implement the same ``complete(payload) -> ModelReply`` interface as
the HTTP client, so the pipeline cannot tell them apart from a real
model. Decision rules:

- Planner: if the geodesic distance to the episode goal is inside the
  stop radius, reply "stop". Otherwise aim at the next unreached
  instruction landmark (a landmark counts as reached once the agent has
  been within the advance radius of it) and reply with the view whose
  heading best aligns with the geodesic descent direction toward it.
- Grounder: reads the chosen direction from the payload text, and replies
  with the target landmark's annotation box in that view when it is
  visible; otherwise it boxes a far patch of visible floor along the
  descent direction so the robot keeps making progress. When the payload
  asks for a point it answers in point form.
- Adversarial planner: issues one deliberately wrong turn (toward the
  episode decoy if present, else directly away from the goal), then
  insists on "backtrack to 0" until the robot is back near the start
  pose, then defers to the normal planner rule. With backtracking
  disabled it therefore never recovers, which is exactly the long-range
  error-correction failure the backtracking ablation measures.
- Wide-box grounder: first reply is a wide box whose bottom edge sits on
  out-of-range floor (a synthetic depth hole); later replies defer to the
  normal grounder. Used by the pixel-selection ablation.

Replies are plain text in the documented wire grammar, so every oracle
answer still exercises the real parsers. Token usage is synthesized
deterministically from payload and reply sizes.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .client import ModelReply, PromptPayload
from .geometry import View, WorldPoint, normalize_angle, view_heading
from .mapping import CAMERA_HEIGHT
from .sim import Env, MAX_SENSOR_RANGE

STOP_RADIUS = 3.0
ADVANCE_RADIUS = 1.2
RETURN_RADIUS = 0.5

_VIEWS = (View.FRONT, View.LEFT, View.RIGHT, View.BACK)
_OPPOSITE = {View.FRONT: View.BACK, View.BACK: View.FRONT, View.LEFT: View.RIGHT, View.RIGHT: View.LEFT}

_DESCENT_STEPS = (
    (-1, 0), (1, 0), (0, -1), (0, 1),
    (-1, -1), (-1, 1), (1, -1), (1, 1),
)


def _synthetic_usage(payload: PromptPayload, reply: str) -> tuple[int, int]:
    text_len = sum(len(t) for t in payload.text_parts())
    return text_len // 4 + 170 * len(payload.image_parts()), max(1, len(reply) // 4)


def _descent_angle(env: Env, target: WorldPoint) -> float:
    """World angle of the steepest geodesic descent toward ``target``."""
    world = env.world
    values = world.distance_field_to(target)
    i, j = world.cell_index(env.pose.position)
    n0, n1 = values.shape
    here = values[i, j] if 0 <= i < n0 and 0 <= j < n1 else math.inf
    best = None
    for di, dj in _DESCENT_STEPS:
        a, b = i + di, j + dj
        if not (0 <= a < n0 and 0 <= b < n1) or values[a, b] >= here:
            continue
        if di != 0 and dj != 0 and (world.walls[i + di, j] or world.walls[i, j + dj]):
            continue
        if best is None or values[a, b] < values[best[0], best[1]]:
            best = (a, b, di, dj)
    if best is None:
        return math.atan2(target.z - env.pose.z, target.x - env.pose.x)
    return math.atan2(best[3], best[2])


def _best_view(pose, angle: float) -> View:
    best, best_cos = View.FRONT, -2.0
    for view in _VIEWS:
        c = math.cos(view_heading(pose, view) - angle)
        if c > best_cos + 1e-12:
            best, best_cos = view, c
    return best


class _TargetTracker:
    """Shared landmark progression rule so both stages stay in sync."""

    def __init__(self, env: Env):
        self.env = env
        self.landmarks = [env.world.landmark_by_label(l) for l in env.episode.landmark_labels]
        self.idx = 0

    def current(self):
        while (
            self.idx < len(self.landmarks) - 1
            and self.env.geodesic_to(self.landmarks[self.idx].position) < ADVANCE_RADIUS
        ):
            self.idx += 1
        return self.idx, self.landmarks[self.idx]


class ScriptedPlannerClient:
    """Ground-truth planner; see the module docstring for the rule."""

    name = "planner"

    def __init__(self, env: Env, stop_radius: float = STOP_RADIUS):
        self.env = env
        self.stop_radius = stop_radius
        self._tracker = _TargetTracker(env)

    def cost_of(self, reply: ModelReply) -> float:
        return 0.0

    def _decide(self) -> tuple[str, str]:
        if self.env.geodesic_to(self.env.episode.goal) < self.stop_radius:
            return "stop", "the goal is within reach"
        idx, lm = self._tracker.current()
        angle = _descent_angle(self.env, lm.position)
        view = _best_view(self.env.pose, angle)
        progress = f"heading toward the {lm.label} ({idx + 1} of {len(self._tracker.landmarks)})"
        return f"navigate to {view.value}", progress

    def complete(self, payload: PromptPayload) -> ModelReply:
        action, progress = self._decide()
        reply = json.dumps({"progress": progress, "action": action})
        inp, out = _synthetic_usage(payload, reply)
        return ModelReply(text=reply, input_tokens=inp, output_tokens=out)


class AdversarialPlannerClient(ScriptedPlannerClient):
    """Forces one wrong turn, then demands a return to waypoint 0."""

    def __init__(self, env: Env, stop_radius: float = STOP_RADIUS):
        super().__init__(env, stop_radius)
        self._wrong_issued = False
        self._recovered = False

    def complete(self, payload: PromptPayload) -> ModelReply:
        if not self._wrong_issued:
            self._wrong_issued = True
            if self.env.episode.decoy is not None:
                angle = _descent_angle(self.env, self.env.episode.decoy)
                view = _best_view(self.env.pose, angle)
            else:
                _, lm = self._tracker.current()
                angle = _descent_angle(self.env, lm.position)
                view = _OPPOSITE[_best_view(self.env.pose, angle)]
            reply = f"Progress: exploring this way.\nAction: navigate to {view.value}"
        elif not self._recovered:
            if self.env.pose.position.distance_to(self.env.episode.start.position) > RETURN_RADIUS:
                reply = (
                    "Progress: that was wrong, returning to a known waypoint.\n"
                    "Action: backtrack to 0"
                )
            else:
                self._recovered = True  # back at the start: resume normal planning
                return super().complete(payload)
        else:
            return super().complete(payload)
        inp, out = _synthetic_usage(payload, reply)
        return ModelReply(text=reply, input_tokens=inp, output_tokens=out)


def _payload_direction(payload: PromptPayload) -> View:
    for text in payload.text_parts():
        for view in _VIEWS:
            if f"Chosen direction: {view.value}" in text:
                return view
    return View.FRONT


def _payload_wants_point(payload: PromptPayload) -> bool:
    return any("point_2d" in t for t in payload.text_parts())


class ScriptedGrounderClient:
    """Ground-truth grounder; see the module docstring for the rule."""

    name = "grounder"

    def __init__(self, env: Env):
        self.env = env
        self._tracker = _TargetTracker(env)

    def cost_of(self, reply: ModelReply) -> float:
        return 0.0

    def _probe_box(self, view: View, target: WorldPoint) -> tuple[list[int], str]:
        """Box a far patch of visible floor along the descent direction."""
        k = self.env.k
        obs = self.env.observe()
        depth = obs.views[view].depth.values
        angle = _descent_angle(self.env, target)
        rel = normalize_angle(angle - view_heading(self.env.pose, view))
        rel = max(-math.radians(40.0), min(math.radians(40.0), rel))
        u = int(round(k.cx - k.fx * math.tan(rel)))
        u = max(40, min(k.width - 41, u))
        col = depth[int(k.cy) + 1 :, u]
        finite = col[np.isfinite(col)]
        d_vis = float(finite.max()) if finite.size else 1.0
        d_t = max(0.8, min(2.5, 0.6 * d_vis))
        v = int(round(k.cy + CAMERA_HEIGHT * k.fy / d_t))
        v = min(v, k.height - 1)
        return [u - 30, v - 80, u + 30, v], "open floor ahead"

    def _decide(self, payload: PromptPayload) -> tuple[list[int], str]:
        view = _payload_direction(payload)
        _, lm = self._tracker.current()
        obs = self.env.observe()
        for ann in obs.views[view].annotations:
            if ann.label == lm.label:
                box = [ann.box.x1, ann.box.y1, ann.box.x2, ann.box.y2]
                return box, lm.label
        return self._probe_box(view, lm.position)

    def complete(self, payload: PromptPayload) -> ModelReply:
        box, description = self._decide(payload)
        if _payload_wants_point(payload):
            point = [(box[0] + box[2]) // 2, box[3]]
            reply = json.dumps({"point_2d": point, "description": description})
        else:
            reply = json.dumps({"bbox_2d": box, "description": description})
        inp, out = _synthetic_usage(payload, reply)
        return ModelReply(text=reply, input_tokens=inp, output_tokens=out)


class WideBoxGrounderClient(ScriptedGrounderClient):
    """First reply boxes out-of-range floor: a synthetic depth hole.

    The box's bottom-center row lies on floor beyond the sensor range
    (invalid depth), while its flanks see the side walls (valid), so
    bottom-center selection fails where the in-box median succeeds.
    """

    def __init__(self, env: Env):
        super().__init__(env)
        self._hole_issued = False

    def complete(self, payload: PromptPayload) -> ModelReply:
        if not self._hole_issued:
            self._hole_issued = True
            k = self.env.k
            cx, cy = int(k.cx), int(k.cy)
            v_hole = cy + max(2, int(0.5 * CAMERA_HEIGHT * k.fy / MAX_SENSOR_RANGE))
            box = [cx - 150, cy - 10, cx + 150, v_hole]
            reply = json.dumps({"bbox_2d": box, "description": "end of the hallway"})
            inp, out = _synthetic_usage(payload, reply)
            return ModelReply(text=reply, input_tokens=inp, output_tokens=out)
        return super().complete(payload)
