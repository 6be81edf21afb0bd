"""Seed-deterministic synthetic scenes: stand-in capture data for tests and demos.

A generated scene has a point blob (the "surgeon") sweeping through a box room,
an instrument descending on a helical approach and then dwelling at its target,
and a manifest wiring it all together. The same spec always produces the same
bytes, which is what golden-image tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import meshes, pccodec, scene, trajectory


@dataclass
class SyntheticSceneSpec:
    name: str = "synthetic-or"
    frame_count: int = 30
    anim_fps: float = 30.0
    points_per_frame: int = 20000
    room_size: tuple[float, float, float] = (4.0, 2.5, 3.0)  # x width, y height, z depth
    blob_radius: float = 0.22
    tip_length: float = 0.22
    helix_turns: float = 2.25
    dwell_fraction: float = 0.2
    seed: int = 42

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be at least 1")
        if not self.anim_fps > 0:
            raise ValueError("anim_fps must be positive")


_TARGET = np.array([0.15, 0.95, 0.0])


def _blob_center(s: float) -> np.ndarray:
    return np.array(
        [
            0.8 * math.sin(2.0 * math.pi * s),
            1.05 + 0.12 * math.sin(4.0 * math.pi * s + 1.0),
            0.25 * math.cos(2.0 * math.pi * s),
        ]
    )


def make_frame(spec: SyntheticSceneSpec, index: int,
               rng: np.random.Generator) -> pccodec.PointCloudFrame:
    """Blob of Gaussian points around a sweeping center, cropped to the working volume."""
    s = index / max(spec.frame_count, 1)
    center = _blob_center(s)
    positions = center + rng.normal(0.0, spec.blob_radius / 2.0, size=(spec.points_per_frame, 3))
    phases = positions * np.array([9.0, 7.0, 8.0]) + np.array([0.0, 2.1, 4.2])
    colors = np.clip(np.floor(150.0 + 90.0 * np.sin(phases) + 0.5), 0, 255).astype(np.uint8)
    frame = pccodec.PointCloudFrame.from_points(positions, colors)
    work = pccodec.Aabb(np.array([-1.6, 0.3, -1.2]), np.array([1.6, 2.1, 1.2]))
    return pccodec.crop_aabb(frame, work)


def make_trajectory(spec: SyntheticSceneSpec) -> trajectory.Trajectory:
    """Helical approach toward the target, then a dwell for the last fraction."""
    samples = []
    n = spec.frame_count
    approach_end = max(1.0 - spec.dwell_fraction, 1e-9)
    z_axis = np.array([0.0, 0.0, 1.0])
    last_pose = None
    for i in range(n):
        s = i / n
        a = min(s / approach_end, 1.0)
        if a < 1.0 or last_pose is None:
            radius = 0.45 * (1.0 - a) + 0.03
            height = 0.55 * (1.0 - a) + 0.02
            theta = 2.0 * math.pi * spec.helix_turns * a
            tip = _TARGET + np.array([radius * math.cos(theta), height, radius * math.sin(theta)])
            axis = _TARGET - tip
            axis = axis / np.linalg.norm(axis)
            rotation = trajectory.quat_from_unit_vectors(z_axis, axis)
            last_pose = trajectory.RigidPose(tip - spec.tip_length * axis, rotation)
        samples.append((i / spec.anim_fps, last_pose))
    return trajectory.Trajectory(samples)


def make_manifest(spec: SyntheticSceneSpec) -> scene.SceneManifest:
    entities = (
        scene.EntityDescriptor(
            id="surgeon",
            kind="pointcloud_sequence",
            uri_pattern="frames/{index:06}.spcf",
        ),
        scene.EntityDescriptor(
            id="room",
            kind="mesh",
            uri="meshes/room.obj",
            base_color=(186, 196, 205),
        ),
        scene.EntityDescriptor(
            id="drill",
            kind="instrument",
            uri="trajectories/drill.strj",
            base_color=(80, 190, 240),
            tip_length=spec.tip_length,
        ),
    )
    camera = scene.CameraConfig(
        position=(0.0, 1.6, 1.25),
        look_at=(0.0, 1.0, 0.0),
        up=(0.0, 1.0, 0.0),
        vertical_fov=60.0,
    )
    return scene.SceneManifest(
        name=spec.name,
        anim_fps=spec.anim_fps,
        frame_count=spec.frame_count,
        near_clip=0.1,
        far_clip=5.1,
        entities=entities,
        default_camera=camera,
    )


def generate_scene(spec: SyntheticSceneSpec, out_dir: Path) -> Path:
    """Write a complete scene directory; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    (out_dir / "meshes").mkdir(exist_ok=True)
    (out_dir / "trajectories").mkdir(exist_ok=True)

    rng = np.random.default_rng(spec.seed)
    for i in range(spec.frame_count):
        frame = make_frame(spec, i, rng)
        (out_dir / "frames" / f"{i:06}.spcf").write_bytes(pccodec.encode_spcf(frame))

    w, h, d = spec.room_size
    room = meshes.room_mesh(w, h, d)
    (out_dir / "meshes" / "room.obj").write_text(meshes.write_obj(room))

    (out_dir / "trajectories" / "drill.strj").write_bytes(
        trajectory.encode_strj(make_trajectory(spec))
    )

    manifest = make_manifest(spec)
    manifest_path = out_dir / "scene.json"
    manifest_path.write_bytes(scene.serialize_manifest(manifest))
    return manifest_path
