"""The two intermediate action representations and their parsers.

The reply grammar accepted from the planning model (documented in the
README; this is the de-facto wire format between prompt and parser):

    navigate to <direction>     direction: front|forward|left|right|back|behind
    backtrack to <waypoint>     waypoint: non-negative integer id
    stop

Replies may be a JSON object ({"progress": ..., "action": ...}), labeled
lines ("Progress: ...", "Action: ..."), or a bare grammar form. The
grounding model replies with a JSON object carrying "bbox_2d":
[x1, y1, x2, y2] and "description"; when asked for a point instead it
carries "point_2d": [u, v]. Surrounding prose and fenced code blocks are
tolerated. Anything else raises ParseError: parsing is total, never a
crash.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateBoxError, ParseError
from .geometry import BoundingBox, PixelTarget, View


class ActionKind(Enum):
    NAVIGATE = "navigate"
    BACKTRACK = "backtrack"
    STOP = "stop"


@dataclass(frozen=True)
class LanguageAction:
    kind: ActionKind
    direction: View | None = None
    waypoint_id: int | None = None

    def to_text(self) -> str:
        if self.kind is ActionKind.NAVIGATE:
            return f"navigate to {self.direction.value}"
        if self.kind is ActionKind.BACKTRACK:
            return f"backtrack to {self.waypoint_id}"
        return "stop"

    @staticmethod
    def navigate(direction: View) -> "LanguageAction":
        return LanguageAction(ActionKind.NAVIGATE, direction=direction)

    @staticmethod
    def backtrack(waypoint_id: int) -> "LanguageAction":
        return LanguageAction(ActionKind.BACKTRACK, waypoint_id=waypoint_id)

    @staticmethod
    def stop() -> "LanguageAction":
        return LanguageAction(ActionKind.STOP)


@dataclass(frozen=True)
class VisionAction:
    """A grounded visual target: a box (or a direct point) plus a description."""

    box: BoundingBox | None
    description: str
    point: PixelTarget | None = None


_DIRECTION_ALIASES = {
    "front": View.FRONT,
    "forward": View.FRONT,
    "left": View.LEFT,
    "right": View.RIGHT,
    "back": View.BACK,
    "behind": View.BACK,
}

_NAVIGATE_RE = re.compile(
    r"^\s*navigate\s+to\s+(?:the\s+)?(front|forward|left|right|back|behind)\s*[.!]?\s*$",
    re.IGNORECASE,
)
_BACKTRACK_RE = re.compile(
    r"^\s*backtrack\s+to\s+(?:waypoint\s*)?#?\s*(\d+)\s*[.!]?\s*$", re.IGNORECASE
)
_STOP_RE = re.compile(r"^\s*stop\s*[.!]?\s*$", re.IGNORECASE)

_ACTION_LABEL_RE = re.compile(r"\baction\b\s*[:=]\s*([^\n\r]+)", re.IGNORECASE)
_PROGRESS_LABEL_RE = re.compile(
    r"\bprogress\b\s*[:=]\s*(.*?)(?=\baction\b\s*[:=]|$)", re.IGNORECASE | re.DOTALL
)


def _parse_action_text(text: str) -> LanguageAction:
    m = _NAVIGATE_RE.match(text)
    if m:
        return LanguageAction.navigate(_DIRECTION_ALIASES[m.group(1).lower()])
    m = _BACKTRACK_RE.match(text)
    if m:
        return LanguageAction.backtrack(int(m.group(1)))
    if _STOP_RE.match(text):
        return LanguageAction.stop()
    raise ParseError(f"unrecognized action {text!r}", raw=text)


def _json_candidates(raw: str):
    """Yield JSON objects found anywhere in the text, fenced or inline."""
    decoder = json.JSONDecoder()
    starts = [m.start() for m in re.finditer(r"\{", raw)][:32]
    for s in starts:
        try:
            obj, _ = decoder.raw_decode(raw, s)
        except (ValueError, TypeError):
            continue
        if isinstance(obj, dict):
            yield obj


def parse_language_action(raw) -> tuple[LanguageAction, str]:
    """Extract (action, progress text) from a planning-model reply.

    Raises ParseError (carrying the raw text) when no grammar form is
    present; the pipeline turns that into a bounded re-ask.
    """
    if not isinstance(raw, str):
        raise ParseError(f"expected text, got {type(raw).__name__}", raw=repr(raw))

    for obj in _json_candidates(raw):
        action_text = obj.get("action")
        if isinstance(action_text, str):
            progress = obj.get("progress", "")
            if not isinstance(progress, str):
                progress = ""
            return _parse_action_text(action_text), progress.strip()

    m = _ACTION_LABEL_RE.search(raw)
    if m:
        progress = ""
        pm = _PROGRESS_LABEL_RE.search(raw)
        if pm:
            progress = pm.group(1).strip().rstrip(".").strip()
        return _parse_action_text(m.group(1)), progress

    # a bare grammar form with nothing around it
    return _parse_action_text(raw), ""


def _coerce_pair(values, what: str, raw: str) -> tuple[float, ...]:
    if not isinstance(values, (list, tuple)):
        raise ParseError(f"{what} is not a list", raw=raw)
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{what} holds a non-number", raw=raw)
        out.append(float(v))
    return tuple(out)


def parse_vision_action(
    raw, width: int, height: int, expect_point: bool = False
) -> VisionAction:
    """Extract a grounded target from a grounding-model reply.

    With ``expect_point`` the reply must carry "point_2d" (the model was
    asked for a point); otherwise it must carry "bbox_2d". Swapped box
    corners are normalized; the box is clamped to the image, and a box
    with zero area after clamping raises DegenerateBoxError.
    """
    if not isinstance(raw, str):
        raise ParseError(f"expected text, got {type(raw).__name__}", raw=repr(raw))

    for obj in _json_candidates(raw):
        description = obj.get("description")
        if not isinstance(description, str) or not description.strip():
            continue
        if expect_point:
            if "point_2d" not in obj:
                continue
            coords = _coerce_pair(obj["point_2d"], "point_2d", raw)
            if len(coords) != 2:
                raise ParseError("point_2d must have two entries", raw=raw)
            point = PixelTarget(
                min(max(int(round(coords[0])), 0), width - 1),
                min(max(int(round(coords[1])), 0), height - 1),
            )
            return VisionAction(box=None, description=description.strip(), point=point)
        if "bbox_2d" not in obj:
            continue
        coords = _coerce_pair(obj["bbox_2d"], "bbox_2d", raw)
        if len(coords) != 4:
            raise ParseError("bbox_2d must have four entries", raw=raw)
        box = BoundingBox.normalized(*coords).clamped(width, height)
        if box.area == 0:
            raise DegenerateBoxError(f"box {coords} collapses to zero area")
        return VisionAction(box=box, description=description.strip())

    kind = "point_2d" if expect_point else "bbox_2d"
    raise ParseError(f"no JSON object with {kind} and description found", raw=raw)
