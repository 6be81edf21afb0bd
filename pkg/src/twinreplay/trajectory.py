"""Timed rigid-pose trajectories, interpolation, and pose comparison metrics.

Conventions: translations in meters, quaternions as (w, x, y, z) and kept unit
length. The tool axis of a pose is its local +Z direction; the tool tip sits at
translation + tip_length * axis. Roll about the tool axis is deliberately
ignored by the comparison metric (a drill is rotationally symmetric).

STRJ is the bit-exact binary trajectory format, little endian:

    magic b"STR1"; sample count u32; then per sample:
    timestamp f64, translation 3 * f32, quaternion 4 * f32 (w, x, y, z)

Timestamps must be strictly increasing. Decoding preserves near-unit
quaternions bit for bit (no renormalization inside tolerance), so
encode(decode(data)) == data for any well-formed payload.
"""

from __future__ import annotations

import bisect
import math
import struct
from dataclasses import dataclass

import numpy as np

STRJ_MAGIC = b"STR1"
_SAMPLE_BYTES = 8 + 12 + 16

_UNIT_TOL = 1e-6


class TrajectoryError(ValueError):
    """Raised for malformed STRJ payloads or invalid trajectories."""


@dataclass
class RigidPose:
    """Rigid transform: rotate by the unit quaternion, then translate."""

    translation: np.ndarray  # (3,) meters
    rotation: np.ndarray  # (4,) unit quaternion (w, x, y, z)

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        norm = math.sqrt(float(np.dot(q, q)))
        if norm == 0.0:
            raise ValueError("rotation quaternion must be nonzero")
        # Renormalize only when out of tolerance; near-unit values (e.g. decoded
        # f32 samples) are kept bit-exact so codec round-trips are exact.
        if abs(norm - 1.0) > _UNIT_TOL:
            q = q / norm
        self.rotation = q

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def tool_axis(self) -> np.ndarray:
        """Local +Z expressed in world coordinates."""
        return quat_rotate(self.rotation, np.array([0.0, 0.0, 1.0]))

    def __eq__(self, other):
        if not isinstance(other, RigidPose):
            return NotImplemented
        return np.array_equal(self.translation, other.translation) and np.array_equal(
            self.rotation, other.rotation
        )


@dataclass
class Trajectory:
    """Timestamped pose samples, strictly increasing in time, at least one sample."""

    samples: list[tuple[float, RigidPose]]

    def __post_init__(self):
        if not self.samples:
            raise TrajectoryError("trajectory needs at least one sample")
        times = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TrajectoryError("timestamps must be strictly increasing")
        self._times = times

    @property
    def duration(self) -> float:
        return self._times[-1] - self._times[0]


@dataclass
class PoseDelta:
    """Pose error: tip separation in millimeters, tool-axis angle in degrees."""

    tip_distance: float
    axis_angle: float


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q (the q v q* sandwich, expanded)."""
    xyz = q[1:]
    t = 2.0 * np.cross(xyz, v)
    return v + q[0] * t + np.cross(xyz, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_unit_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking unit vector a onto unit vector b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w = 1.0 + float(np.dot(a, b))
    if w < 1e-12:
        # antiparallel: 180 degrees about any axis perpendicular to a
        axis = np.cross(a, np.array([1.0, 0.0, 0.0]))
        if np.dot(axis, axis) < 1e-12:
            axis = np.cross(a, np.array([0.0, 1.0, 0.0]))
        axis = axis / np.linalg.norm(axis)
        return np.array([0.0, axis[0], axis[1], axis[2]])
    q = np.array([w, *np.cross(a, b)])
    return q / np.linalg.norm(q)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Shortest-arc spherical interpolation; antipodal pairs reconciled by sign flip."""
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-9:
        out = (1.0 - u) * q0 + u * q1  # nearly parallel: lerp avoids sin(0)/sin(0)
        return out / np.linalg.norm(out)
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return (math.sin((1.0 - u) * theta) / s) * q0 + (math.sin(u * theta) / s) * q1


def transform_point(pose: RigidPose, p) -> np.ndarray:
    """Apply the pose: rotate p, then add the translation."""
    return quat_rotate(pose.rotation, np.asarray(p, dtype=np.float64)) + pose.translation


def transform_points(pose: RigidPose, points: np.ndarray) -> np.ndarray:
    """Vectorized transform_point for (N, 3) arrays."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return pts @ quat_to_matrix(pose.rotation).T + pose.translation


def sample_pose(trajectory: Trajectory, time: float) -> RigidPose:
    """Pose at an arbitrary time: endpoint-clamped outside the sampled range,
    otherwise translation lerp + rotation slerp between the bracketing samples."""
    times = trajectory._times
    samples = trajectory.samples
    if time <= times[0]:
        return samples[0][1]
    if time >= times[-1]:
        return samples[-1][1]
    hi = bisect.bisect_right(times, time)
    lo = hi - 1
    t0, p0 = samples[lo]
    t1, p1 = samples[hi]
    u = (time - t0) / (t1 - t0)
    translation = (1.0 - u) * p0.translation + u * p1.translation
    rotation = quat_slerp(p0.rotation, p1.rotation, u)
    return RigidPose(translation, rotation)


def compare_poses(expert: RigidPose, user: RigidPose, tip_length: float) -> PoseDelta:
    """Tip distance (mm) and tool-axis angle (deg) between two instrument poses."""
    if not tip_length > 0:
        raise ValueError("tip_length must be positive")
    axis_e = expert.tool_axis()
    axis_u = user.tool_axis()
    tip_e = expert.translation + tip_length * axis_e
    tip_u = user.translation + tip_length * axis_u
    tip_distance = float(np.linalg.norm(tip_e - tip_u)) * 1000.0
    cos_angle = float(np.clip(np.dot(axis_e, axis_u), -1.0, 1.0))
    return PoseDelta(tip_distance=tip_distance, axis_angle=math.degrees(math.acos(cos_angle)))


def encode_strj(trajectory: Trajectory) -> bytes:
    """Serialize to STRJ bytes (layout in the module docstring)."""
    out = bytearray(STRJ_MAGIC)
    out += struct.pack("<I", len(trajectory.samples))
    for t, pose in trajectory.samples:
        out += struct.pack("<d", t)
        out += struct.pack("<3f", *pose.translation)
        out += struct.pack("<4f", *pose.rotation)
    return bytes(out)


def decode_strj(data: bytes) -> Trajectory:
    """Inverse of :func:`encode_strj`; bit-exact round trip for well-formed input."""
    if data[:4] != STRJ_MAGIC:
        raise TrajectoryError("bad magic: not an STRJ payload")
    if len(data) < 8:
        raise TrajectoryError(f"truncated STRJ header: expected at least 8 bytes, got {len(data)}")
    (n,) = struct.unpack_from("<I", data, 4)
    expected = 8 + _SAMPLE_BYTES * n
    if len(data) != expected:
        raise TrajectoryError(f"STRJ length mismatch: expected {expected} bytes, got {len(data)}")
    samples = []
    off = 8
    for _ in range(n):
        (t,) = struct.unpack_from("<d", data, off)
        translation = struct.unpack_from("<3f", data, off + 8)
        rotation = struct.unpack_from("<4f", data, off + 20)
        samples.append((t, RigidPose(np.array(translation), np.array(rotation))))
        off += _SAMPLE_BYTES
    return Trajectory(samples)
