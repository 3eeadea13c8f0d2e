"""Pluggable multimodal model interface: prompts, transport, accounting.

A client is anything with ``complete(payload) -> ModelReply``; the
pipeline binds one client per stage (a large planner model and a smaller
grounding model) and never cares which implementation answers. This
module ships the payload/reply types, the two prompt builders, a
chat-completions HTTP client, and the usage ledger. The deterministic
scripted clients that answer from simulator ground truth live in
``oracle``.

Prompt construction is pure: identical inputs yield byte-identical
payloads (see ``PromptPayload.fingerprint``).
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import threading
import time
from dataclasses import dataclass, field

import httpx
import numpy as np

from .errors import AuthError, ConfigError, ContractError, QuotaError, TransportError
from .geometry import View

#: Hard cap on image parts per payload unless overridden.
DEFAULT_IMAGE_CAP = 64

VIEW_ORDER = (View.FRONT, View.LEFT, View.RIGHT, View.BACK)


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True, eq=False)
class ImagePart:
    pixels: np.ndarray  # uint8 (H, W, 3)
    label: str = ""
    encoding: str = "png"


Part = TextPart | ImagePart


@dataclass
class PromptPayload:
    parts: tuple[Part, ...]
    role: str = "user"
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if not any(isinstance(p, TextPart) for p in self.parts):
            raise ContractError("payload needs at least one text part")

    def text_parts(self) -> list[str]:
        return [p.text for p in self.parts if isinstance(p, TextPart)]

    def image_parts(self) -> list[ImagePart]:
        return [p for p in self.parts if isinstance(p, ImagePart)]

    def fingerprint(self) -> str:
        """Stable content hash: equal inputs hash equal, byte for byte."""
        h = hashlib.sha256()
        h.update(f"{self.role}|{self.temperature!r}|{self.max_tokens}".encode())
        for p in self.parts:
            if isinstance(p, TextPart):
                h.update(b"T")
                h.update(p.text.encode())
            else:
                h.update(b"I")
                h.update(p.label.encode())
                h.update(str(p.pixels.shape).encode())
                h.update(p.pixels.tobytes())
        return h.hexdigest()


@dataclass
class ModelReply:
    text: str
    input_tokens: int
    output_tokens: int
    latency_ms: float = 0.0


# ---------------------------------------------------------------------------
# prompt construction
# ---------------------------------------------------------------------------

PLANNER_PREAMBLE = (
    "You are the high-level planner of an indoor navigation robot. You see "
    "the robot's four current views and its navigation history, and you must "
    "decide the next strategic move toward completing the instruction."
)

LANGUAGE_GRAMMAR = (
    "First state your progress, then pick exactly one action:\n"
    "  navigate to <direction>   (direction: front, left, right or back)\n"
    "  backtrack to <waypoint>   (waypoint: the id of a visited waypoint)\n"
    "  stop                      (terminate: the goal is within reach)\n"
    'Reply with a JSON object: {"progress": "<one sentence>", "action": "<action>"}'
)

LANGUAGE_GRAMMAR_NO_BACKTRACK = (
    "First state your progress, then pick exactly one action:\n"
    "  navigate to <direction>   (direction: front, left, right or back)\n"
    "  stop                      (terminate: the goal is within reach)\n"
    'Reply with a JSON object: {"progress": "<one sentence>", "action": "<action>"}'
)

GROUNDER_PREAMBLE = (
    "You are the visual grounding model of an indoor navigation robot. "
    "Identify the object or region in the image that the robot should move "
    "toward next, given the instruction and the planner's progress estimate."
)

VISION_BOX_SCHEMA = (
    "Pick a target that is not too close to the camera, so the robot makes "
    "meaningful progress. Reply with a JSON object: "
    '{"bbox_2d": [x1, y1, x2, y2], "description": "<what it is>"}'
)

VISION_POINT_SCHEMA = (
    "Pick a target that is not too close to the camera, so the robot makes "
    "meaningful progress. Reply with a JSON object: "
    '{"point_2d": [u, v], "description": "<what it is>"}'
)

PROGRESS_PLACEHOLDER = "(no estimate)"


def build_language_prompt(
    instruction: str,
    history_parts: list[Part],
    views: dict[View, np.ndarray],
    temperature: float = 0.0,
    max_tokens: int = 512,
    image_cap: int = DEFAULT_IMAGE_CAP,
    allow_backtrack: bool = True,
) -> PromptPayload:
    """Planner-stage payload: preamble, instruction, history, the four
    labeled current views, then the action grammar."""
    missing = [v.value for v in VIEW_ORDER if v not in views]
    if missing:
        raise ContractError(f"missing current views: {', '.join(missing)}")

    parts: list[Part] = [
        TextPart(PLANNER_PREAMBLE),
        TextPart(f"Instruction: {instruction}"),
    ]
    if history_parts:
        parts.append(TextPart("Navigation history:"))
        parts.extend(history_parts)
    parts.append(TextPart("Current views:"))
    for view in VIEW_ORDER:
        parts.append(TextPart(f"{view.value.capitalize()} view:"))
        parts.append(ImagePart(views[view], label=f"current {view.value} view"))
    parts.append(TextPart(LANGUAGE_GRAMMAR if allow_backtrack else LANGUAGE_GRAMMAR_NO_BACKTRACK))

    payload = PromptPayload(tuple(parts), temperature=temperature, max_tokens=max_tokens)
    n_images = len(payload.image_parts())
    if n_images > image_cap:
        raise ContractError(f"{n_images} image parts exceed the cap of {image_cap}")
    return payload


def build_vision_prompt(
    instruction: str,
    progress: str,
    direction: View,
    image: np.ndarray,
    temperature: float = 0.0,
    max_tokens: int = 256,
    want_point: bool = False,
) -> PromptPayload:
    """Grounder-stage payload: instruction, progress, the single chosen
    direction image, and the output schema."""
    parts: tuple[Part, ...] = (
        TextPart(GROUNDER_PREAMBLE),
        TextPart(f"Instruction: {instruction}"),
        TextPart(f"Progress so far: {progress.strip() or PROGRESS_PLACEHOLDER}"),
        TextPart(f"Chosen direction: {direction.value}"),
        ImagePart(image, label=f"chosen {direction.value} view"),
        TextPart(VISION_POINT_SCHEMA if want_point else VISION_BOX_SCHEMA),
    )
    return PromptPayload(parts, temperature=temperature, max_tokens=max_tokens)


def complete(client, payload: PromptPayload) -> ModelReply:
    """Ask a client for a completion (thin dispatch; clients are duck-typed)."""
    return client.complete(payload)


# ---------------------------------------------------------------------------
# usage accounting
# ---------------------------------------------------------------------------


@dataclass
class UsageRecord:
    stage: str
    episode_id: str
    input_tokens: int
    output_tokens: int
    cost_usd: float


class UsageLedger:
    """Thread-safe per-stage usage accumulator.

    Totals are exact sums over recorded replies; the report derives mean
    tokens and calls per episode per stage plus the dollar cost.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.records: list[UsageRecord] = []

    def record(self, stage: str, episode_id: str, reply: ModelReply, cost_usd: float = 0.0):
        with self._lock:
            self.records.append(
                UsageRecord(stage, episode_id, reply.input_tokens, reply.output_tokens, cost_usd)
            )

    def merge(self, other: "UsageLedger"):
        with self._lock:
            self.records.extend(other.records)

    def totals(self) -> dict:
        out: dict = {}
        with self._lock:
            for r in self.records:
                s = out.setdefault(
                    r.stage, {"calls": 0, "input_tokens": 0, "output_tokens": 0, "cost_usd": 0.0}
                )
                s["calls"] += 1
                s["input_tokens"] += r.input_tokens
                s["output_tokens"] += r.output_tokens
                s["cost_usd"] += r.cost_usd
        return out


def ledger_report(ledger: UsageLedger) -> dict:
    """Per-stage summary: mean tokens and calls per episode, USD per episode."""
    stages: dict = {}
    episode_ids: set[str] = set()
    with ledger._lock:
        records = list(ledger.records)
    for r in records:
        episode_ids.add(r.episode_id)
        s = stages.setdefault(
            r.stage,
            {"calls": 0, "input_tokens": 0, "output_tokens": 0, "cost_usd": 0.0, "episodes": set()},
        )
        s["calls"] += 1
        s["input_tokens"] += r.input_tokens
        s["output_tokens"] += r.output_tokens
        s["cost_usd"] += r.cost_usd
        s["episodes"].add(r.episode_id)

    report = {"episodes": len(episode_ids), "stages": {}, "total_cost_usd": 0.0}
    for name in sorted(stages):
        s = stages[name]
        n_ep = max(len(s["episodes"]), 1)
        tokens = s["input_tokens"] + s["output_tokens"]
        report["stages"][name] = {
            "calls": s["calls"],
            "episodes": len(s["episodes"]),
            "total_tokens": tokens,
            "mean_tokens_per_episode": tokens / n_ep,
            "mean_calls_per_episode": s["calls"] / n_ep,
            "cost_usd": s["cost_usd"],
            "cost_usd_per_episode": s["cost_usd"] / n_ep,
        }
        report["total_cost_usd"] += s["cost_usd"]
    n_all = max(len(episode_ids), 1)
    report["total_cost_usd_per_episode"] = report["total_cost_usd"] / n_all
    return report


def format_report(report: dict) -> str:
    lines = [f"usage over {report['episodes']} episode(s):"]
    for name, s in report["stages"].items():
        lines.append(
            f"  {name}: {s['mean_tokens_per_episode']:,.0f} tokens with "
            f"{s['mean_calls_per_episode']:.2f} calls per episode "
            f"(${s['cost_usd_per_episode']:.4f}/episode)"
        )
    lines.append(f"  total cost: ${report['total_cost_usd_per_episode']:.4f} per episode")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# HTTP transport (chat-completions wire format)
# ---------------------------------------------------------------------------


def _encode_image_b64(part: ImagePart) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(part.pixels).save(buf, format=part.encoding.upper())
    return base64.b64encode(buf.getvalue()).decode()


@dataclass
class HttpClientConfig:
    url: str
    model: str
    api_key_env: str = ""
    timeout_s: float = 120.0
    max_attempts: int = 3
    backoff_s: float = 0.5
    price_input_per_1k: float = 0.0
    price_output_per_1k: float = 0.0


class HttpChatClient:
    """Client for the common chat-completions wire format.

    Sends one user message whose content is the ordered list of text and
    base64-PNG image parts; reads the reply text and token usage back.
    Transient failures (connection errors, 5xx, 429) are retried with
    exponential backoff up to ``max_attempts``; auth failures are not.
    """

    def __init__(self, config: HttpClientConfig):
        self.config = config
        self.api_key = ""
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if not key:
                raise ConfigError(
                    f"credential environment variable {config.api_key_env} is not set"
                )
            self.api_key = key

    def cost_of(self, reply: ModelReply) -> float:
        c = self.config
        return (
            reply.input_tokens * c.price_input_per_1k
            + reply.output_tokens * c.price_output_per_1k
        ) / 1000.0

    def _request_body(self, payload: PromptPayload) -> dict:
        content = []
        for p in payload.parts:
            if isinstance(p, TextPart):
                content.append({"type": "text", "text": p.text})
            else:
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {
                            "url": f"data:image/{p.encoding};base64,{_encode_image_b64(p)}"
                        },
                    }
                )
        return {
            "model": self.config.model,
            "messages": [{"role": payload.role, "content": content}],
            "temperature": payload.temperature,
            "max_tokens": payload.max_tokens,
        }

    def complete(self, payload: PromptPayload) -> ModelReply:
        body = self._request_body(payload)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            started = time.monotonic()
            try:
                resp = httpx.post(
                    self.config.url, json=body, headers=headers, timeout=self.config.timeout_s
                )
            except httpx.HTTPError as exc:
                last_error = TransportError(f"request failed: {exc}")
                continue
            latency = (time.monotonic() - started) * 1000.0

            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
            if resp.status_code == 429:
                last_error = QuotaError("endpoint rate limit (HTTP 429)")
                continue
            if resp.status_code >= 500:
                last_error = TransportError(f"server error (HTTP {resp.status_code})")
                continue
            if resp.status_code != 200:
                raise TransportError(f"unexpected HTTP {resp.status_code}: {resp.text[:200]}")

            try:
                data = resp.json()
                message = data["choices"][0]["message"]["content"]
                if isinstance(message, list):  # some servers return content parts
                    message = "".join(
                        c.get("text", "") for c in message if isinstance(c, dict)
                    )
                usage = data.get("usage", {})
                return ModelReply(
                    text=message,
                    input_tokens=int(usage.get("prompt_tokens", 0)),
                    output_tokens=int(usage.get("completion_tokens", 0)),
                    latency_ms=latency,
                )
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TransportError(f"malformed completion response: {exc}")

        assert last_error is not None
        raise last_error
