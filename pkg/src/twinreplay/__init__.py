"""Replay engine for 4D twin scenes: dynamic point clouds, rigid meshes, and
instrument trajectories, rendered with packed 32-bit minimum splatting."""

from .meshes import TriangleMesh
from .pccodec import Aabb, PointCloudFrame, VoxelGridParams, decode_spcf, encode_spcf
from .render import (
    GeometryBuffers,
    PackedFramebuffer,
    PinholeCamera,
    SENTINEL,
    quantize_depth,
    rasterize_mesh,
    render_stereo,
    render_view,
    resolve,
    splat_points,
    write_ppm,
)
from .scene import CameraConfig, EntityDescriptor, SceneManifest, parse_manifest, serialize_manifest, validate_scene
from .trajectory import PoseDelta, RigidPose, Trajectory, compare_poses, decode_strj, encode_strj, sample_pose

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "CameraConfig",
    "EntityDescriptor",
    "GeometryBuffers",
    "PackedFramebuffer",
    "PinholeCamera",
    "PointCloudFrame",
    "PoseDelta",
    "RigidPose",
    "SENTINEL",
    "SceneManifest",
    "Trajectory",
    "TriangleMesh",
    "VoxelGridParams",
    "compare_poses",
    "decode_spcf",
    "decode_strj",
    "encode_spcf",
    "encode_strj",
    "parse_manifest",
    "quantize_depth",
    "rasterize_mesh",
    "render_stereo",
    "render_view",
    "resolve",
    "sample_pose",
    "serialize_manifest",
    "splat_points",
    "validate_scene",
    "write_ppm",
]
