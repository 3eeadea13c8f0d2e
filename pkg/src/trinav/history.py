"""Waypoint record keeping, history prompt fragments, backtrack lookup.

One waypoint is recorded per pipeline step, at the pose where the step's
observation was taken; backtracking navigates to that pose. The record is
append-only within an episode. What a waypoint stores depends on the
history mode active at record time (image modes keep the four views
downscaled to 320x240 for prompt economy; text modes keep the visible
landmark labels); switching the render mode later never rewrites
recorded data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .client import ImagePart, Part, TextPart
from .errors import BacktrackPolicyError, StaleWaypointError
from .geometry import AgentPose, View, WorldPoint

VIEW_ORDER = (View.FRONT, View.LEFT, View.RIGHT, View.BACK)


class HistoryMode(Enum):
    VISUAL_AND_ACTIONS = "visual_and_actions"
    TEXT_OBS_AND_ACTIONS = "text_obs_and_actions"
    ACTIONS_ONLY = "actions_only"
    VISUAL_ONLY = "visual_only"
    TEXT_ONLY = "text_only"
    NONE = "none"


_IMAGE_MODES = {HistoryMode.VISUAL_AND_ACTIONS, HistoryMode.VISUAL_ONLY}
_TEXT_OBS_MODES = {HistoryMode.TEXT_OBS_AND_ACTIONS, HistoryMode.TEXT_ONLY}
_ACTION_MODES = {
    HistoryMode.VISUAL_AND_ACTIONS,
    HistoryMode.TEXT_OBS_AND_ACTIONS,
    HistoryMode.ACTIONS_ONLY,
}


class BacktrackPolicy(Enum):
    ANY = "any"
    LAST_ONLY = "last_only"
    DISABLED = "disabled"


@dataclass
class Waypoint:
    id: int
    pose: AgentPose
    step_index: int
    action_text: str
    progress_text: str
    images: tuple[np.ndarray, ...] | None = None  # four views, VIEW_ORDER
    text_obs: tuple[str, ...] | None = None  # visible landmark labels


def _downscale(rgb: np.ndarray) -> np.ndarray:
    """Stride-2 downscale (640x480 -> 320x240); cheap and deterministic."""
    return np.ascontiguousarray(rgb[::2, ::2])


@dataclass
class NavigationHistory:
    mode: HistoryMode = HistoryMode.VISUAL_AND_ACTIONS
    waypoints: list[Waypoint] = field(default_factory=list)

    def record_step(
        self,
        pose: AgentPose,
        observations: dict[View, np.ndarray] | None,
        visible_labels: tuple[str, ...],
        action_text: str,
        progress_text: str,
    ) -> int:
        """Append a waypoint; returns its id (dense, starting at 0)."""
        images = None
        if self.mode in _IMAGE_MODES and observations is not None:
            images = tuple(_downscale(observations[v]) for v in VIEW_ORDER)
        text_obs = tuple(visible_labels) if self.mode in _TEXT_OBS_MODES else None
        wp = Waypoint(
            id=len(self.waypoints),
            pose=pose,
            step_index=len(self.waypoints),
            action_text=action_text,
            progress_text=progress_text,
            images=images,
            text_obs=text_obs,
        )
        self.waypoints.append(wp)
        return wp.id

    def resolve_backtrack(
        self, waypoint_id: int, policy: BacktrackPolicy = BacktrackPolicy.ANY
    ) -> WorldPoint:
        """Position of a recorded waypoint, subject to the backtrack policy."""
        if policy is BacktrackPolicy.DISABLED:
            raise BacktrackPolicyError("backtracking is disabled by configuration")
        if not (0 <= waypoint_id < len(self.waypoints)):
            raise StaleWaypointError(
                f"waypoint {waypoint_id} does not exist (have {len(self.waypoints)})"
            )
        if policy is BacktrackPolicy.LAST_ONLY:
            allowed = len(self.waypoints) - 2
            if waypoint_id != allowed:
                raise BacktrackPolicyError(
                    f"policy allows only waypoint {allowed}, not {waypoint_id}"
                )
        return self.waypoints[waypoint_id].pose.position

    def render_context(self, budget: int = 6) -> list[Part]:
        """Prompt fragment for the recorded history under the current mode.

        Over budget, the first waypoint and the most recent ``budget`` are
        kept with an elision marker in between.
        """
        if self.mode is HistoryMode.NONE or not self.waypoints:
            return []

        wps = self.waypoints
        elided = 0
        if len(wps) > budget + 1:
            kept_tail = wps[len(wps) - budget :]
            elided = len(wps) - budget - 1
            wps = [wps[0]] + kept_tail

        parts: list[Part] = []
        for idx, wp in enumerate(wps):
            if elided and idx == 1:
                parts.append(TextPart(f"(... {elided} earlier waypoints elided ...)"))
            bits = [f"Waypoint {wp.id}"]
            if self.mode in _ACTION_MODES:
                bits.append(f"action: {wp.action_text}")
                if wp.progress_text:
                    bits.append(f"progress: {wp.progress_text}")
            if wp.text_obs is not None and self.mode in _TEXT_OBS_MODES:
                seen = ", ".join(wp.text_obs) if wp.text_obs else "nothing notable"
                bits.append(f"saw: {seen}")
            parts.append(TextPart("; ".join(bits)))
            if wp.images is not None and self.mode in _IMAGE_MODES:
                for view, img in zip(VIEW_ORDER, wp.images):
                    parts.append(ImagePart(img, label=f"waypoint {wp.id} {view.value} view"))
        return parts
