"""Scene manifest: the declarative JSON description every other module consumes.

A scene directory holds a `scene.json` manifest plus the assets it references
(frame files, meshes, trajectories) with URIs relative to the manifest. The
schema uses snake_case keys; see the README for a worked example. Values are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

ENTITY_KINDS = ("pointcloud_sequence", "mesh", "instrument")
FRAME_INDEX_PLACEHOLDER = "{index:06}"

DEFAULT_IPD = 0.064
DEFAULT_IMAGE_SIZE = 1024


class ManifestError(ValueError):
    """Manifest rejected; the message names the offending field."""


@dataclass(frozen=True)
class CameraConfig:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical_fov: float = 60.0
    ipd: float = DEFAULT_IPD
    image_width: int = DEFAULT_IMAGE_SIZE
    image_height: int = DEFAULT_IMAGE_SIZE


@dataclass(frozen=True)
class EntityDescriptor:
    id: str
    kind: str
    uri: str | None = None
    uri_pattern: str | None = None
    base_color: tuple[int, int, int] | None = None
    tip_length: float | None = None
    initially_visible: bool = True

    def frame_uri(self, index: int) -> str:
        """Resolve the frame URI for one index of a pointcloud_sequence."""
        if self.uri_pattern is None:
            raise ValueError(f"entity '{self.id}' has no uri_pattern")
        return self.uri_pattern.format(index=index)


@dataclass(frozen=True)
class SceneManifest:
    name: str
    frame_count: int
    near_clip: float
    far_clip: float
    entities: tuple[EntityDescriptor, ...]
    default_camera: CameraConfig
    anim_fps: float = 30.0

    @property
    def duration(self) -> float:
        """Playback length in seconds (last frame starts at duration - 1/fps)."""
        return self.frame_count / self.anim_fps

    def entity(self, entity_id: str) -> EntityDescriptor:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(f"unknown entity id '{entity_id}'")

    def pointcloud_entity(self) -> EntityDescriptor:
        return next(e for e in self.entities if e.kind == "pointcloud_sequence")

    def instrument_entity(self) -> EntityDescriptor | None:
        return next((e for e in self.entities if e.kind == "instrument"), None)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ManifestError(f"missing required field '{_join(path, key)}'")
    return obj[key]


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"{path} must be a number")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ManifestError(f"{path} must be an integer")
    return value


def _vec3(value, path: str) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ManifestError(f"{path} must be a 3-element array")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _rgb(value, path: str) -> tuple[int, int, int]:
    if not isinstance(value, list) or len(value) != 3:
        raise ManifestError(f"{path} must be a 3-element array of bytes")
    out = []
    for i, v in enumerate(value):
        v = _integer(v, f"{path}[{i}]")
        if not 0 <= v <= 255:
            raise ManifestError(f"{path}[{i}] must be in [0, 255]")
        out.append(v)
    return tuple(out)


def _reject_unknown(obj: dict, known: set[str], path: str):
    for key in obj:
        if key not in known:
            raise ManifestError(f"unknown field '{_join(path, key)}'")


def _parse_camera(obj, path: str) -> CameraConfig:
    if not isinstance(obj, dict):
        raise ManifestError(f"{path} must be an object")
    known = {"position", "look_at", "up", "vertical_fov", "ipd", "image_width", "image_height"}
    _reject_unknown(obj, known, path)
    position = _vec3(_require(obj, "position", path), _join(path, "position"))
    look_at = _vec3(_require(obj, "look_at", path), _join(path, "look_at"))
    up = _vec3(obj.get("up", [0.0, 1.0, 0.0]), _join(path, "up"))
    fov = _number(obj.get("vertical_fov", 60.0), _join(path, "vertical_fov"))
    ipd = _number(obj.get("ipd", DEFAULT_IPD), _join(path, "ipd"))
    width = _integer(obj.get("image_width", DEFAULT_IMAGE_SIZE), _join(path, "image_width"))
    height = _integer(obj.get("image_height", DEFAULT_IMAGE_SIZE), _join(path, "image_height"))

    if not 0.0 < fov < 180.0:
        raise ManifestError(f"{path}.vertical_fov must be in (0, 180)")
    if ipd < 0:
        raise ManifestError(f"{path}.ipd must be non-negative")
    if width <= 0 or height <= 0:
        raise ManifestError(f"{path}.image_width and image_height must be positive")

    view_dir = tuple(l - p for l, p in zip(look_at, position))
    cross = (
        up[1] * view_dir[2] - up[2] * view_dir[1],
        up[2] * view_dir[0] - up[0] * view_dir[2],
        up[0] * view_dir[1] - up[1] * view_dir[0],
    )
    if math.sqrt(sum(c * c for c in cross)) < 1e-12:
        raise ManifestError(f"{path}.up must not be parallel to the view direction")

    return CameraConfig(position, look_at, up, fov, ipd, width, height)


def _parse_entity(obj, path: str) -> EntityDescriptor:
    if not isinstance(obj, dict):
        raise ManifestError(f"{path} must be an object")
    known = {"id", "kind", "uri", "uri_pattern", "base_color", "tip_length", "initially_visible"}
    _reject_unknown(obj, known, path)

    entity_id = _require(obj, "id", path)
    if not isinstance(entity_id, str) or not entity_id:
        raise ManifestError(f"{path}.id must be a non-empty string")
    kind = _require(obj, "kind", path)
    if kind not in ENTITY_KINDS:
        raise ManifestError(f"{path}.kind must be one of {', '.join(ENTITY_KINDS)}")

    uri = obj.get("uri")
    uri_pattern = obj.get("uri_pattern")
    if uri is not None and not isinstance(uri, str):
        raise ManifestError(f"{path}.uri must be a string")
    if uri_pattern is not None and not isinstance(uri_pattern, str):
        raise ManifestError(f"{path}.uri_pattern must be a string")
    base_color = obj.get("base_color")
    if base_color is not None:
        base_color = _rgb(base_color, _join(path, "base_color"))
    tip_length = obj.get("tip_length")
    if tip_length is not None:
        tip_length = _number(tip_length, _join(path, "tip_length"))
    visible = obj.get("initially_visible", True)
    if not isinstance(visible, bool):
        raise ManifestError(f"{path}.initially_visible must be a boolean")

    if kind == "pointcloud_sequence":
        if uri_pattern is None:
            raise ManifestError(f"{path}.uri_pattern is required for pointcloud_sequence entities")
        if FRAME_INDEX_PLACEHOLDER not in uri_pattern:
            raise ManifestError(
                f"{path}.uri_pattern must contain the '{FRAME_INDEX_PLACEHOLDER}' placeholder"
            )
        if uri is not None:
            raise ManifestError(f"{path}.uri is only valid for mesh and instrument entities")
        if tip_length is not None:
            raise ManifestError(f"{path}.tip_length is only valid for instrument entities")
    elif kind == "mesh":
        if uri is None:
            raise ManifestError(f"{path}.uri is required for mesh entities")
        if uri_pattern is not None:
            raise ManifestError(f"{path}.uri_pattern is only valid for pointcloud_sequence entities")
        if base_color is None:
            raise ManifestError(f"{path}.base_color is required for mesh entities")
        if tip_length is not None:
            raise ManifestError(f"{path}.tip_length is only valid for instrument entities")
    else:  # instrument; the trajectory uri is checked by validate_scene, not here
        if uri_pattern is not None:
            raise ManifestError(f"{path}.uri_pattern is only valid for pointcloud_sequence entities")
        if tip_length is None:
            raise ManifestError(f"{path}.tip_length is required for instrument entities")
        if not tip_length > 0:
            raise ManifestError(f"{path}.tip_length must be positive")

    return EntityDescriptor(
        id=entity_id,
        kind=kind,
        uri=uri,
        uri_pattern=uri_pattern,
        base_color=base_color,
        tip_length=tip_length,
        initially_visible=visible,
    )


def parse_manifest(data: bytes) -> SceneManifest:
    """Parse and validate manifest JSON; every violation names the offending field."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ManifestError("manifest root must be a JSON object")

    known = {"name", "anim_fps", "frame_count", "near_clip", "far_clip", "entities", "default_camera"}
    _reject_unknown(obj, known, "")

    name = _require(obj, "name", "")
    if not isinstance(name, str):
        raise ManifestError("name must be a string")
    anim_fps = _number(obj.get("anim_fps", 30.0), "anim_fps")
    frame_count = _integer(_require(obj, "frame_count", ""), "frame_count")
    near_clip = _number(_require(obj, "near_clip", ""), "near_clip")
    far_clip = _number(_require(obj, "far_clip", ""), "far_clip")

    if not anim_fps > 0:
        raise ManifestError("anim_fps must be positive")
    if frame_count < 1:
        raise ManifestError("frame_count must be at least 1")
    if not near_clip > 0:
        raise ManifestError("near_clip must be positive")
    if not far_clip > near_clip:
        raise ManifestError("far_clip must exceed near_clip")

    raw_entities = _require(obj, "entities", "")
    if not isinstance(raw_entities, list):
        raise ManifestError("entities must be an array")
    entities = tuple(_parse_entity(e, f"entities[{i}]") for i, e in enumerate(raw_entities))

    seen: set[str] = set()
    for i, e in enumerate(entities):
        if e.id in seen:
            raise ManifestError(f"entities[{i}].id duplicates id '{e.id}'")
        seen.add(e.id)
    n_pc = sum(1 for e in entities if e.kind == "pointcloud_sequence")
    if n_pc != 1:
        raise ManifestError(
            f"entities must contain exactly one pointcloud_sequence entity, found {n_pc}"
        )
    n_instr = sum(1 for e in entities if e.kind == "instrument")
    if n_instr > 1:
        raise ManifestError(f"entities may contain at most one instrument entity, found {n_instr}")

    camera = _parse_camera(_require(obj, "default_camera", ""), "default_camera")

    return SceneManifest(
        name=name,
        anim_fps=anim_fps,
        frame_count=frame_count,
        near_clip=near_clip,
        far_clip=far_clip,
        entities=entities,
        default_camera=camera,
    )


def serialize_manifest(manifest: SceneManifest) -> bytes:
    """Serialize so that parse_manifest(serialize_manifest(m)) == m."""
    entities = []
    for e in manifest.entities:
        entry: dict = {"id": e.id, "kind": e.kind}
        if e.uri is not None:
            entry["uri"] = e.uri
        if e.uri_pattern is not None:
            entry["uri_pattern"] = e.uri_pattern
        if e.base_color is not None:
            entry["base_color"] = list(e.base_color)
        if e.tip_length is not None:
            entry["tip_length"] = e.tip_length
        entry["initially_visible"] = e.initially_visible
        entities.append(entry)
    cam = manifest.default_camera
    doc = {
        "name": manifest.name,
        "anim_fps": manifest.anim_fps,
        "frame_count": manifest.frame_count,
        "near_clip": manifest.near_clip,
        "far_clip": manifest.far_clip,
        "entities": entities,
        "default_camera": {
            "position": list(cam.position),
            "look_at": list(cam.look_at),
            "up": list(cam.up),
            "vertical_fov": cam.vertical_fov,
            "ipd": cam.ipd,
            "image_width": cam.image_width,
            "image_height": cam.image_height,
        },
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def validate_scene(manifest: SceneManifest, resolver: Callable[[str], bool]) -> list[str]:
    """Check that every referenced resource exists; returns diagnostics, not errors.

    `resolver` maps a manifest-relative URI to existence. An empty list means
    the scene is complete.
    """
    diagnostics: list[str] = []
    for e in manifest.entities:
        if e.kind == "pointcloud_sequence":
            for i in range(manifest.frame_count):
                uri = e.frame_uri(i)
                if not resolver(uri):
                    diagnostics.append(f'missing "{uri}"')
        elif e.kind == "mesh":
            if not resolver(e.uri):
                diagnostics.append(f'missing "{e.uri}"')
        else:  # instrument
            if e.uri is None:
                diagnostics.append(f'entity "{e.id}": instrument has no trajectory uri')
            elif not resolver(e.uri):
                diagnostics.append(f'missing "{e.uri}"')
    return diagnostics
