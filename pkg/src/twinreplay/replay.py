"""Glue between a scene on disk and the renderer: asset loading, visibility,
instrument posing, and single-shot frame rendering for the CLI and tests."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import meshes, pccodec, playback, render, scene, trajectory

EYES = ("mono", "left", "right", "stereo")


def resolve_scene_path(path: Path | str) -> Path:
    """Accept either a scene.json path or a directory containing one."""
    path = Path(path)
    if path.is_dir():
        path = path / "scene.json"
    if not path.is_file():
        raise FileNotFoundError(f"no scene manifest at {path}")
    return path


@dataclass
class LoadedScene:
    manifest: scene.SceneManifest
    root: Path
    meshes: dict[str, meshes.TriangleMesh]
    trajectories: dict[str, trajectory.Trajectory]
    proxies: dict[str, meshes.TriangleMesh]

    def frame_path(self, index: int) -> Path:
        return self.root / self.manifest.pointcloud_entity().frame_uri(index)

    def load_frame(self, index: int) -> pccodec.PointCloudFrame:
        return pccodec.decode_spcf(self.frame_path(index).read_bytes())

    def frame_store(self) -> playback.DirectoryFrameStore:
        return playback.DirectoryFrameStore(self.root, self.manifest.pointcloud_entity().uri_pattern)


def load_scene(path: Path | str) -> LoadedScene:
    manifest_path = resolve_scene_path(path)
    manifest = scene.parse_manifest(manifest_path.read_bytes())
    root = manifest_path.parent
    static_meshes: dict[str, meshes.TriangleMesh] = {}
    trajectories: dict[str, trajectory.Trajectory] = {}
    proxies: dict[str, meshes.TriangleMesh] = {}
    for entity in manifest.entities:
        if entity.kind == "mesh":
            static_meshes[entity.id] = meshes.read_obj(
                (root / entity.uri).read_text(), base_color=entity.base_color
            )
        elif entity.kind == "instrument":
            if entity.uri is not None:
                trajectories[entity.id] = trajectory.decode_strj((root / entity.uri).read_bytes())
            color = entity.base_color if entity.base_color is not None else (80, 190, 240)
            proxies[entity.id] = meshes.instrument_proxy(entity.tip_length, color)
    return LoadedScene(
        manifest=manifest,
        root=root,
        meshes=static_meshes,
        trajectories=trajectories,
        proxies=proxies,
    )


def scene_camera(
    manifest: scene.SceneManifest,
    *,
    width: int | None = None,
    height: int | None = None,
    vertical_fov: float | None = None,
    near: float | None = None,
    far: float | None = None,
) -> render.PinholeCamera:
    """Pinhole camera from the manifest defaults with optional overrides."""
    cam = manifest.default_camera
    return render.PinholeCamera.look_at(
        cam.position,
        cam.look_at,
        cam.up,
        vertical_fov=vertical_fov if vertical_fov is not None else cam.vertical_fov,
        width=width if width is not None else cam.image_width,
        height=height if height is not None else cam.image_height,
        near=near if near is not None else manifest.near_clip,
        far=far if far is not None else manifest.far_clip,
    )


def instrument_pose(loaded: LoadedScene, entity_id: str, media_time: float) -> trajectory.RigidPose:
    track = loaded.trajectories.get(entity_id)
    if track is None:
        raise KeyError(f"entity '{entity_id}' has no trajectory")
    return trajectory.sample_pose(track, media_time)


def draw_lists(
    loaded: LoadedScene,
    media_time: float,
    visibility: Mapping[str, bool] | None = None,
    frame: pccodec.PointCloudFrame | None = None,
):
    """(meshes, point frames) visible at media_time, instrument posed for that time.

    `frame` short-circuits the disk read when the caller already holds the
    decoded point frame (e.g. out of a prefetch buffer).
    """
    manifest = loaded.manifest

    def visible(entity_id: str) -> bool:
        if visibility is not None and entity_id in visibility:
            return visibility[entity_id]
        return manifest.entity(entity_id).initially_visible

    mesh_list: list[meshes.TriangleMesh] = []
    frame_list: list[pccodec.PointCloudFrame] = []
    for entity in manifest.entities:
        if not visible(entity.id):
            continue
        if entity.kind == "mesh":
            mesh_list.append(loaded.meshes[entity.id])
        elif entity.kind == "instrument":
            if entity.id in loaded.trajectories:
                pose = instrument_pose(loaded, entity.id, media_time)
                mesh_list.append(
                    loaded.proxies[entity.id].transformed(
                        trajectory.quat_to_matrix(pose.rotation), pose.translation
                    )
                )
        else:  # pointcloud_sequence
            if frame is None:
                index = playback.frame_index_at(
                    media_time, manifest.anim_fps, manifest.frame_count, False
                )
                frame = loaded.load_frame(index)
            frame_list.append(frame)
    return mesh_list, frame_list


def render_scene(
    loaded: LoadedScene,
    *,
    media_time: float | None = None,
    frame_index: int | None = None,
    eye: str = "mono",
    camera: render.PinholeCamera | None = None,
    visibility: Mapping[str, bool] | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Render one moment of the scene to an RGB image.

    Exactly one of media_time / frame_index selects the moment; frame_index i
    maps to media_time i / anim_fps for instrument posing.
    """
    if (media_time is None) == (frame_index is None):
        raise ValueError("specify exactly one of media_time or frame_index")
    if eye not in EYES:
        raise ValueError(f"eye must be one of {EYES}")
    manifest = loaded.manifest
    if frame_index is not None:
        if not 0 <= frame_index < manifest.frame_count:
            raise ValueError(
                f"frame_index {frame_index} out of range [0, {manifest.frame_count})"
            )
        media_time = frame_index / manifest.anim_fps

    if camera is None:
        camera = scene_camera(manifest)
    mesh_list, frame_list = draw_lists(loaded, media_time, visibility)

    if eye == "mono":
        return render.render_view(camera, mesh_list, frame_list, workers=workers)
    ipd = manifest.default_camera.ipd
    if eye == "stereo":
        return render.render_stereo(camera, mesh_list, frame_list, ipd, workers=workers)
    sign = -1.0 if eye == "left" else 1.0
    return render.render_view(camera.eye_offset(sign * ipd / 2.0), mesh_list, frame_list,
                              workers=workers)
