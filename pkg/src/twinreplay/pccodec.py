"""Point cloud ingestion, cropping, voxel downsampling, and the SPCF frame codec.

SPCF ("streamable point cloud frame") is the bit-exact on-disk / on-wire format
for one animation frame. Byte layout, little endian throughout:

    offset  size   field
    0       4      magic b"SPC1"
    4       4      point count N (u32)
    8       24     bbox as 6 * f32: min x, y, z then max x, y, z
    32      6*N    positions, N * 3 * u16, quantized inside the bbox
    32+6N   3*N    colors, N * 3 * u8 (RGB)

Positions quantize per axis as q = round((p - min) / (max - min) * 65535); a
degenerate axis (max == min) encodes q = 0. Decoding maps back with
p = min + q / 65535 * (max - min), so worst-case reconstruction error is
(max - min) / 65535 per axis. Colors are stored exactly, 1 byte per channel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SPCF_MAGIC = b"SPC1"
SPCF_HEADER_SIZE = 32
_POINT_BYTES = 9  # 3 * u16 position + 3 * u8 color


class CodecError(ValueError):
    """Raised for malformed PLY / SPCF payloads."""


@dataclass
class Aabb:
    """Axis-aligned bounding box in meters, min <= max componentwise."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64).reshape(3)
        self.max = np.asarray(self.max, dtype=np.float64).reshape(3)
        if not np.all(self.min <= self.max):
            raise ValueError(f"Aabb min must be <= max componentwise, got {self.min} / {self.max}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed box."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.all((pts >= self.min) & (pts <= self.max), axis=1)

    def __eq__(self, other):
        if not isinstance(other, Aabb):
            return NotImplemented
        return np.array_equal(self.min, other.min) and np.array_equal(self.max, other.max)


@dataclass
class VoxelGridParams:
    """Uniform voxel grid: cell index of p is floor((p - origin) / voxel_size) per axis."""

    origin: np.ndarray
    voxel_size: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.voxel_size = float(self.voxel_size)
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")


@dataclass
class PointCloudFrame:
    """One animation frame: N xyz positions (meters) with RGB byte colors, inside bbox.

    positions and colors always have matching length, and every position lies
    inside the closed bbox. Instances are treated as immutable once built.
    """

    bbox: Aabb
    positions: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) uint8

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.positions) != len(self.colors):
            raise ValueError(
                f"positions/colors length mismatch: {len(self.positions)} vs {len(self.colors)}"
            )
        if len(self.positions) and not self.bbox.contains(self.positions).all():
            raise ValueError("every position must lie inside the frame bbox")

    def __len__(self) -> int:
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, PointCloudFrame):
            return NotImplemented
        return (
            self.bbox == other.bbox
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.colors, other.colors)
        )

    @classmethod
    def from_points(cls, positions, colors) -> "PointCloudFrame":
        """Build a frame with the tight bounds of the given points as its bbox."""
        pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            bbox = Aabb(np.zeros(3), np.zeros(3))
        else:
            bbox = Aabb(pts.min(axis=0), pts.max(axis=0))
        return cls(bbox=bbox, positions=pts, colors=colors)


# PLY scalar type names -> numpy little-endian dtype codes.
_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_REQUIRED_PROPS = {"x": "f4", "y": "f4", "z": "f4", "red": "u1", "green": "u1", "blue": "u1"}


def import_ply(data: bytes) -> PointCloudFrame:
    """Parse a PLY point cloud (ASCII or binary little-endian).

    The vertex element must be the first element and carry float32 x, y, z and
    uint8 red, green, blue properties; extra scalar properties are skipped.
    The returned frame's bbox is the tight bounds of the points (origin for an
    empty cloud).
    """
    if not data.startswith(b"ply"):
        raise CodecError("not a PLY file (missing 'ply' magic)")

    end = data.find(b"end_header")
    if end < 0:
        raise CodecError("unterminated PLY header")
    body_start = data.index(b"\n", end) + 1
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()

    encoding = None
    elements: list[tuple[str, int]] = []
    props: list[tuple[str, str]] = []  # vertex properties only
    for line in header_lines:
        tokens = line.strip().split()
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            continue
        if tokens[0] == "format":
            encoding = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2])))
        elif tokens[0] == "property" and elements and elements[-1][0] == "vertex":
            if tokens[1] == "list":
                raise CodecError("unsupported list property on vertex element")
            if tokens[1] not in _PLY_TYPES:
                raise CodecError(f"unsupported property type '{tokens[1]}'")
            props.append((tokens[2], _PLY_TYPES[tokens[1]]))

    if encoding == "binary_big_endian":
        raise CodecError("unsupported encoding 'binary_big_endian'")
    if encoding not in ("ascii", "binary_little_endian"):
        raise CodecError(f"unsupported encoding {encoding!r}")
    if not elements or elements[0][0] != "vertex":
        raise CodecError("vertex element must be the first PLY element")
    count = elements[0][1]

    names = [n for n, _ in props]
    for req, dtype in _REQUIRED_PROPS.items():
        if req not in names:
            raise CodecError(f"missing required property '{req}'")
        if dict(props)[req] != dtype:
            want = "float32" if dtype == "f4" else "uint8"
            raise CodecError(f"property '{req}' must be {want}")

    if encoding == "ascii":
        text = data[body_start:].decode("ascii", errors="replace").splitlines()
        rows = [ln.split() for ln in text if ln.strip()][:count]
        if len(rows) < count:
            raise CodecError(f"expected {count} vertex rows, got {len(rows)}")
        cols = {name: i for i, (name, _) in enumerate(props)}
        if any(len(r) < len(props) for r in rows):
            raise CodecError("vertex row with too few values")
        positions = np.array(
            [[float(r[cols["x"]]), float(r[cols["y"]]), float(r[cols["z"]])] for r in rows],
            dtype=np.float64,
        ).reshape(-1, 3)
        colors = np.array(
            [[int(r[cols["red"]]), int(r[cols["green"]]), int(r[cols["blue"]])] for r in rows],
            dtype=np.uint8,
        ).reshape(-1, 3)
    else:
        dtype = np.dtype([(name, "<" + code) for name, code in props])
        need = count * dtype.itemsize
        body = data[body_start:]
        if len(body) < need:
            raise CodecError(f"truncated vertex data: expected {need} bytes, got {len(body)}")
        rec = np.frombuffer(body, dtype=dtype, count=count)
        positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
        colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.uint8)

    return PointCloudFrame.from_points(positions, colors)


def crop_aabb(frame: PointCloudFrame, box: Aabb) -> PointCloudFrame:
    """Keep exactly the points inside the closed box; the result's bbox is the box."""
    mask = box.contains(frame.positions) if len(frame) else np.zeros(0, dtype=bool)
    return PointCloudFrame(
        bbox=Aabb(box.min.copy(), box.max.copy()),
        positions=frame.positions[mask],
        colors=frame.colors[mask],
    )


def voxel_downsample(frame: PointCloudFrame, params: VoxelGridParams) -> PointCloudFrame:
    """Collapse each occupied voxel to one point.

    Output point = arithmetic centroid of the voxel's points; output color =
    per-channel mean rounded half-up to the nearest byte. Output order is
    ascending lexicographic voxel index with z as the major key, then y, then
    x, which makes the operation fully deterministic.
    """
    if len(frame) == 0:
        return frame
    idx = np.floor((frame.positions - params.origin) / params.voxel_size).astype(np.int64)
    # unique() sorts rows left to right, so order columns (z, y, x) for the documented order
    keys = idx[:, ::-1]
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    n_voxels = len(first)

    counts = np.bincount(inverse, minlength=n_voxels).astype(np.float64)
    centroids = np.zeros((n_voxels, 3), dtype=np.float64)
    color_sums = np.zeros((n_voxels, 3), dtype=np.float64)
    np.add.at(centroids, inverse, frame.positions)
    np.add.at(color_sums, inverse, frame.colors.astype(np.float64))
    centroids /= counts[:, None]
    colors = np.clip(np.floor(color_sums / counts[:, None] + 0.5), 0, 255).astype(np.uint8)

    return PointCloudFrame(bbox=frame.bbox, positions=centroids, colors=colors)


def encode_spcf(frame: PointCloudFrame) -> bytes:
    """Serialize a frame to SPCF bytes (layout in the module docstring)."""
    n = len(frame)
    if n >= 1 << 32:
        raise ValueError("SPCF supports at most 2^32 - 1 points")
    bmin = frame.bbox.min.astype(np.float32)
    bmax = frame.bbox.max.astype(np.float32)
    header = SPCF_MAGIC + struct.pack("<I", n) + bmin.tobytes() + bmax.tobytes()

    # Quantize against the f32-rounded bounds that actually get stored.
    lo = bmin.astype(np.float64)
    extent = bmax.astype(np.float64) - lo
    scale = np.where(extent > 0, np.divide(65535.0, extent, where=extent > 0), 0.0)
    q = np.floor((frame.positions - lo) * scale + 0.5)
    q = np.clip(q, 0, 65535).astype("<u2")
    return header + q.tobytes() + frame.colors.tobytes()


def decode_spcf(data: bytes) -> PointCloudFrame:
    """Inverse of :func:`encode_spcf` up to position quantization."""
    if data[:4] != SPCF_MAGIC:
        raise CodecError("bad magic: not an SPCF payload")
    if len(data) < SPCF_HEADER_SIZE:
        raise CodecError(
            f"truncated SPCF header: expected at least {SPCF_HEADER_SIZE} bytes, got {len(data)}"
        )
    (n,) = struct.unpack_from("<I", data, 4)
    expected = SPCF_HEADER_SIZE + _POINT_BYTES * n
    if len(data) != expected:
        raise CodecError(f"SPCF length mismatch: expected {expected} bytes, got {len(data)}")

    bounds = np.frombuffer(data, dtype="<f4", count=6, offset=8).astype(np.float64)
    lo, hi = bounds[:3], bounds[3:]
    q = (
        np.frombuffer(data, dtype="<u2", count=3 * n, offset=SPCF_HEADER_SIZE)
        .reshape(n, 3)
        .astype(np.float64)
    )
    colors = np.frombuffer(
        data, dtype=np.uint8, count=3 * n, offset=SPCF_HEADER_SIZE + 6 * n
    ).reshape(n, 3)
    positions = lo + q / 65535.0 * (hi - lo)
    # guard the closed-bbox invariant against the last-ulp of float arithmetic
    positions = np.clip(positions, lo, hi)
    return PointCloudFrame(bbox=Aabb(lo, hi), positions=positions, colors=colors.copy())
