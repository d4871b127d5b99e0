"""The warp-and-inpaint orchestration loop.

One pipeline run: describe the input with the VQA backend, derive the
global layout / scene-level / repeat-avoidance texts from the chat backend,
then for each scheduled yaw warp everything completed so far into the new
view, inpaint the unknown region under the view's layout prompt, re-inpaint
(bounded) while the VQA check still finds a forbidden object, super-resolve
the accepted view, and finally merge all views into the equirectangular
panorama.

Every backend call is recorded in a deterministic, machine-readable trace
(JSON lines), so two runs with the same seed and mocks are bit-identical.
"""

from __future__ import annotations

import json
import hashlib
import logging
import re
import string
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from panoweave.backends import BackendError, Backends
from panoweave.fusion import compose_panorama
from panoweave.geometry import CameraIntrinsics, intrinsics_from_fov, rotation_y
from panoweave.imageops import to_float
from panoweave.warp import ViewRecord, warp_view

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------
# Backend query texts. The VQA questions and chat templates below are sent
# verbatim (with the bracketed slots filled); downstream prompt construction
# depends on their exact wording, so treat them as frozen strings.

PLACE_QUESTION = "Question: What is this place (describe with fewer than 5 words)? Answer:"

DETAIL_QUESTION = "Question: Describe the foreground and background in detail and separately? Answer:"

LAYOUT_QUESTION = (
    "Given a scene with {place}, where in font of us we see {detail}. "
    "Generate 6 rotated views to describe what else you see in this place, "
    "where the camera of each view rotates 60 degrees to the right "
    "(you dont need to describe the original view, i.e., the first view of the 6 views "
    "you need to describe is the view with 60 degree rotation angle). "
    "Dont involve redundant details, just describe the content of each view. "
    "Also don't repeat the same object in different views. "
    "Don't refer to previously generated views. "
    "Generate concise (< 10 words) and diverse contents for each view. "
    "Each sentence starts with: View xxx(view number, from 1-6): We see..."
)

SCENE_QUESTION = (
    "Modify the sentence: {place} so that we remove all the objects from the description "
    "(e.g., 'a bedroom with a bed' would become 'a bedroom'. "
    "Do not change the sentence if the description is only an object). "
    "Just output the modified sentence."
)

OBJECTS_QUESTION = (
    "Given a scene with {place}, where in font of us we see {detail}. "
    "What would be the two major foreground objects that we see? "
    "Use two lines to describe them where each line is in the format of "
    '"We see: xxx (one object, dont describe details, just one word for the object. '
    "Start from the most possible object. "
    "Don't mention background objects like things on the wall, ceiling or floor.)\""
)

DUPLICATION_QUESTION = (
    "Do we often see multiple {obj} in a scene with {place}? "
    "Just say 'yes' or 'no' with all lower case letters."
)

REPEAT_CHECK_QUESTION = "Question: Is there a {obj} in the image? Answer:"

PERIPHERAL_TEMPLATE = "a peripheral view of {scene} where we see {layout}"
PERIPHERAL_ONLY_TEMPLATE = "a peripheral view of {scene} where we only see {layout}"
NEGATIVE_TEMPLATE = "any type of {obj}"


# --------------------------------------------------------------------------
# Configuration

def _circle_covered(angles_deg, fov_deg, step: float = 0.1) -> bool:
    lons = np.arange(0.0, 360.0, step)
    covered = np.zeros_like(lons, dtype=bool)
    for a in angles_deg:
        covered |= np.abs((lons - a + 180.0) % 360.0 - 180.0) <= fov_deg / 2.0
    return bool(covered.all())


@dataclass(frozen=True)
class ViewSchedule:
    """Yaw angles of the generated views, alternating sides of the input;
    the last angle closes the 360-degree loop with its unknown region at
    the view center."""

    fov_deg: float = 100.0
    angles_deg: tuple = (0.0, 41.0, -41.0, 82.0, -82.0, 123.0, 200.5)
    input_fov_deg: float = 60.0

    def __post_init__(self):
        if not self.angles_deg or self.angles_deg[0] != 0.0:
            raise ValueError("schedule must start at yaw 0")
        if not 0 < self.fov_deg < 180 or not 0 < self.input_fov_deg < 180:
            raise ValueError("fields of view must be in (0, 180)")
        if not _circle_covered(self.angles_deg, self.fov_deg):
            raise ValueError("schedule does not cover the full 360-degree longitude range")


@dataclass
class PipelineConfig:
    schedule: ViewSchedule = field(default_factory=ViewSchedule)
    view_size: int = 512
    pano_width: int = 4096
    max_retries: int = 20
    layout_retries: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.pano_width % 2:
            raise ValueError("pano_width must be even")
        if self.view_size < 2:
            raise ValueError("view_size must be at least 2")


@dataclass
class SceneDescriptions:
    """The four text artifacts steering inpainting."""

    place: str
    detail: str
    layout_views: list
    scene: str
    repeat_objects: list

    @property
    def input_description(self) -> str:
        return " ".join(part for part in (self.place.strip(), self.detail.strip()) if part)

    def to_dict(self) -> dict:
        return {
            "place": self.place,
            "detail": self.detail,
            "input_description": self.input_description,
            "layout_views": list(self.layout_views),
            "scene": self.scene,
            "repeat_objects": list(self.repeat_objects),
        }


class PipelineError(RuntimeError):
    """Pipeline abort; carries the partial call trace for diagnosis."""

    def __init__(self, message: str, trace: "Trace | None" = None):
        super().__init__(message)
        self.trace = trace


# --------------------------------------------------------------------------
# Trace

def _digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def digest_array(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(str(arr.dtype).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


class Trace:
    """Ordered record of every backend call, deterministic by construction."""

    def __init__(self):
        self.records = []

    def add(self, kind: str, request: dict, response) -> None:
        if isinstance(response, str):
            digest = _digest_bytes(response.encode("utf-8"))
            text = response
        else:
            digest = digest_array(np.asarray(response))
            text = None
        self.records.append(
            {
                "index": len(self.records),
                "kind": kind,
                "request": request,
                "response_digest": digest,
                "response_text": text,
            }
        )

    def of_kind(self, kind: str) -> list:
        return [r for r in self.records if r["kind"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


class _TracedBackends:
    """Thin recording wrapper; the orchestrator only talks through this."""

    def __init__(self, backends: Backends, trace: Trace):
        self._b = backends
        self.trace = trace

    def vqa(self, image, question: str) -> str:
        answer = self._b.vqa.vqa(image, question)
        self.trace.add("vqa", {"question": question, "image": digest_array(np.asarray(image))}, answer)
        return answer

    def chat(self, prompt: str) -> str:
        text = self._b.chat.chat(prompt)
        self.trace.add("chat", {"prompt": prompt}, text)
        return text

    def inpaint(self, image, mask, prompt: str, negative_prompt: str, seed: int):
        out = self._b.inpaint.inpaint(image, mask, prompt, negative_prompt, seed)
        self.trace.add(
            "inpaint",
            {
                "prompt": prompt,
                "negative_prompt": negative_prompt,
                "seed": int(seed),
                "image": digest_array(np.asarray(image)),
                "mask": digest_array(np.asarray(mask)),
            },
            out,
        )
        return out

    def superresolve(self, image, factor: int = 4):
        out = self._b.superres.superresolve(image, factor)
        self.trace.add("superres", {"factor": factor, "image": digest_array(np.asarray(image))}, out)
        return out

    def text_to_image(self, prompt: str, seed: int):
        out = self._b.text2image.text_to_image(prompt, seed)
        self.trace.add("text2image", {"prompt": prompt, "seed": int(seed)}, out)
        return out


# --------------------------------------------------------------------------
# Text post-processing

def normalize_yes_no(text: str) -> Optional[str]:
    """Lowercase, strip punctuation/whitespace, prefix-match yes/no."""
    t = text.strip().lower().strip(string.punctuation + string.whitespace)
    if t.startswith("yes"):
        return "yes"
    if t.startswith("no"):
        return "no"
    return None


_LAYOUT_LINE = re.compile(
    r"^\s*view\s*0*(\d+)\s*(?:\([^)]*\))?\s*[:.\-]?\s*we see\s*[:,]?\s*(.*\S)\s*$",
    re.IGNORECASE,
)


def parse_layout_reply(text: str) -> Optional[list]:
    """Six numbered lines 'View <n>: We see <content>' -> content strings, else None."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != 6:
        return None
    contents = []
    for i, line in enumerate(lines, start=1):
        m = _LAYOUT_LINE.match(line)
        if not m or int(m.group(1)) != i:
            return None
        contents.append(m.group(2).strip())
    return contents


_OBJECT_LINE = re.compile(r"we see\s*:\s*([^(\n]+)", re.IGNORECASE)


def parse_objects_reply(text: str) -> list:
    """Object words from 'We see: xxx' lines; at most two, deduplicated."""
    objs = []
    for line in text.splitlines():
        m = _OBJECT_LINE.search(line)
        if not m:
            continue
        word = m.group(1).strip().strip(string.punctuation + string.whitespace).lower()
        if word and word not in objs:
            objs.append(word)
        if len(objs) == 2:
            break
    return objs


# --------------------------------------------------------------------------
# Alg. 1 steps

def describe_input(backends: _TracedBackends, image) -> tuple:
    """Coarse and fine input descriptions from the two fixed VQA questions."""
    place = backends.vqa(image, PLACE_QUESTION)
    detail = backends.vqa(image, DETAIL_QUESTION)
    return place, detail


def generate_layout(backends: _TracedBackends, place: str, detail: str, max_format_retries: int = 5) -> list:
    """Ask for six per-view layout lines, re-asking while the format is wrong."""
    prompt = LAYOUT_QUESTION.format(place=place, detail=detail)
    retries = 0
    while True:
        reply = backends.chat(prompt)
        parsed = parse_layout_reply(reply)
        if parsed is not None:
            return parsed
        retries += 1
        if retries > max_format_retries:
            raise PipelineError(
                f"layout reply format still invalid after {max_format_retries} retries",
                trace=backends.trace,
            )
        logger.warning("layout reply malformed; re-asking (%d/%d)", retries, max_format_retries)


def scene_level_description(backends: _TracedBackends, place: str) -> str:
    """Object-free scene sentence; first nonempty reply line."""
    reply = backends.chat(SCENE_QUESTION.format(place=place))
    for line in reply.splitlines():
        if line.strip():
            return line.strip()
    return reply.strip()


def repeat_avoidance_set(backends: _TracedBackends, place: str, detail: str) -> list:
    """Objects whose duplication across views must be avoided.

    Two candidates are requested in one query; each enters the set iff the
    follow-up duplication question answers 'no'. An unparseable candidate
    reply disables repetition control rather than aborting.
    """
    reply = backends.chat(OBJECTS_QUESTION.format(place=place, detail=detail))
    objects = parse_objects_reply(reply)
    if not objects:
        logger.warning("could not parse candidate objects from %r; repetition control disabled", reply[:80])
        return []
    keep = []
    for obj in objects:
        answer = backends.chat(DUPLICATION_QUESTION.format(obj=obj, place=place))
        if normalize_yes_no(answer) == "no":
            keep.append(obj)
    return keep


def map_view_to_layout_line(angle_deg: float, schedule: ViewSchedule = None) -> int:
    """Layout line (1..6) for a nonzero scheduled yaw, by sorted normalized angle."""
    schedule = schedule or ViewSchedule()
    normalized = [a % 360.0 for a in schedule.angles_deg if a % 360.0 != 0.0]
    target = angle_deg % 360.0
    if target == 0.0 or target not in normalized:
        raise ValueError(f"angle {angle_deg} is not a nonzero scheduled view angle")
    position = sorted(normalized).index(target)
    return position * 6 // len(normalized) + 1


def build_inpaint_prompt(descs: SceneDescriptions, view_index: int, schedule: ViewSchedule = None) -> tuple:
    """(positive, negative) inpainting prompts for the i-th scheduled view (1-based)."""
    schedule = schedule or ViewSchedule()
    if not 1 <= view_index <= len(schedule.angles_deg):
        raise ValueError(f"view_index {view_index} outside schedule of {len(schedule.angles_deg)}")
    if view_index == 1:
        return descs.scene, ""
    line = descs.layout_views[map_view_to_layout_line(schedule.angles_deg[view_index - 1], schedule) - 1]
    if not descs.repeat_objects:
        return PERIPHERAL_TEMPLATE.format(scene=descs.scene, layout=line), ""
    positive = PERIPHERAL_ONLY_TEMPLATE.format(scene=descs.scene, layout=line)
    negative = ", ".join(NEGATIVE_TEMPLATE.format(obj=obj) for obj in descs.repeat_objects)
    return positive, negative


def check_repeats(backends: _TracedBackends, image, repeat_objects) -> bool:
    """True iff the VQA backend sees any forbidden object in the image."""
    for obj in repeat_objects:
        try:
            answer = backends.vqa(image, REPEAT_CHECK_QUESTION.format(obj=obj))
        except BackendError as exc:
            logger.warning("repeat check for %r failed (%s); treating as absent", obj, exc)
            continue
        if normalize_yes_no(answer) == "yes":
            return True
    return False


# --------------------------------------------------------------------------
# Full pipeline

@dataclass
class PanoramaResult:
    panorama: np.ndarray
    coverage: np.ndarray
    views: list
    warp_masks: list
    descriptions: SceneDescriptions
    trace: Trace
    config: PipelineConfig
    input_image: np.ndarray = None


def run_pipeline(
    input_image,
    input_intrinsics: Optional[CameraIntrinsics] = None,
    config: Optional[PipelineConfig] = None,
    backends: Optional[Backends] = None,
) -> PanoramaResult:
    """Run the full warp-and-inpaint loop and merge the panorama."""
    config = config or PipelineConfig()
    backends = backends or Backends.all_mock(config.seed)
    traced = _TracedBackends(backends, Trace())
    return _execute(input_image, input_intrinsics, config, traced)


def run_text_pipeline(
    prompt: str,
    config: Optional[PipelineConfig] = None,
    backends: Optional[Backends] = None,
) -> PanoramaResult:
    """Generate the input image from a text prompt, then run the pipeline.

    The text-to-image call shares the run's trace, so the prompt is part of
    the recorded call sequence.
    """
    config = config or PipelineConfig()
    backends = backends or Backends.all_mock(config.seed)
    traced = _TracedBackends(backends, Trace())
    if backends.text2image is None:
        raise PipelineError("text-to-panorama requires a text2image backend", trace=traced.trace)
    try:
        image = traced.text_to_image(prompt, config.seed)
    except BackendError as exc:
        raise PipelineError(f"text-to-image failed: {exc}", trace=traced.trace) from exc
    return _execute(image, None, config, traced)


def _execute(
    input_image,
    input_intrinsics: Optional[CameraIntrinsics],
    config: PipelineConfig,
    traced: "_TracedBackends",
) -> PanoramaResult:
    trace = traced.trace

    image = to_float(np.asarray(input_image))
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"input image must be (H, W, 3), got {image.shape}")
    if image.shape[0] != image.shape[1]:
        raise ValueError(f"input image must be square, got {image.shape[1]}x{image.shape[0]}")
    if input_intrinsics is None:
        input_intrinsics = intrinsics_from_fov(
            config.schedule.input_fov_deg, image.shape[1], image.shape[0]
        )

    try:
        place, detail = describe_input(traced, image)
        layout = generate_layout(traced, place, detail, config.layout_retries)
        scene = scene_level_description(traced, place)
        repeats = repeat_avoidance_set(traced, place, detail)
        descs = SceneDescriptions(
            place=place, detail=detail, layout_views=layout, scene=scene, repeat_objects=repeats
        )

        K_view = intrinsics_from_fov(config.schedule.fov_deg, config.view_size, config.view_size)
        bootstrap = ViewRecord(image=image, intrinsics=input_intrinsics, rotation=rotation_y(0.0))
        completed = []
        warp_masks = []
        for index, angle in enumerate(config.schedule.angles_deg, start=1):
            pose = rotation_y(angle)
            sources = completed if completed else [bootstrap]
            warped, mask = warp_view(sources, K_view, pose)
            warp_masks.append(mask)
            positive, negative = build_inpaint_prompt(descs, index, config.schedule)
            view_img = traced.inpaint(warped, mask, positive, negative, config.seed)
            if index > 1:
                retries = 0
                while check_repeats(traced, view_img, repeats) and retries < config.max_retries:
                    retries += 1
                    view_img = traced.inpaint(warped, mask, positive, negative, config.seed + retries)
            sr = traced.superresolve(view_img, 4)
            completed.append(
                ViewRecord(image=view_img, intrinsics=K_view, rotation=pose, sr_image=sr)
            )

        panorama, coverage = compose_panorama(completed, config.pano_width)
    except BackendError as exc:
        raise PipelineError(f"backend failure aborted the pipeline: {exc}", trace=trace) from exc

    return PanoramaResult(
        panorama=panorama,
        coverage=coverage,
        views=completed,
        warp_masks=warp_masks,
        descriptions=descs,
        trace=trace,
        config=config,
        input_image=image,
    )
