"""Triangle meshes, minimal OBJ transport, and procedural scene geometry.

OBJ is used for mesh transport because every toolchain can read it; colors
travel in the manifest (flat base_color per mesh), not in the OBJ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Raised for malformed OBJ payloads or invalid mesh data."""


@dataclass
class TriangleMesh:
    """Indexed triangle set with one flat base color."""

    vertices: np.ndarray  # (N, 3) float64, meters
    triangles: np.ndarray  # (M, 3) int32 indices into vertices
    base_color: tuple[int, int, int] = (200, 200, 200)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise MeshError("triangle index out of range")

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "TriangleMesh":
        """New mesh with vertices rotated by the 3x3 matrix then translated."""
        return TriangleMesh(
            vertices=self.vertices @ np.asarray(rotation).T + np.asarray(translation),
            triangles=self.triangles,
            base_color=self.base_color,
        )


def write_obj(mesh: TriangleMesh) -> str:
    """Emit OBJ text: v lines then 1-based f lines. Deterministic formatting."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    return "\n".join(lines) + "\n"


def read_obj(text: str, base_color: tuple[int, int, int] = (200, 200, 200)) -> TriangleMesh:
    """Parse OBJ vertices and faces; polygons are fan-triangulated.

    Face tokens of the form i, i/j, or i/j/k are accepted (only the vertex
    index is used); negative indices are not supported.
    """
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
            vertices.append([float(tokens[1]), float(tokens[2]), float(tokens[3])])
        elif tokens[0] == "f":
            if len(tokens) < 4:
                raise MeshError(f"line {lineno}: face needs at least 3 vertices")
            idx = []
            for tok in tokens[1:]:
                head = tok.split("/")[0]
                i = int(head)
                if i < 0:
                    raise MeshError(f"line {lineno}: negative face indices are not supported")
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):
                triangles.append([idx[0], idx[k], idx[k + 1]])
        # everything else (vn, vt, usemtl, o, g, s, mtllib) is ignored
    return TriangleMesh(
        vertices=np.array(vertices, dtype=np.float64).reshape(-1, 3),
        triangles=np.array(triangles, dtype=np.int32).reshape(-1, 3),
        base_color=base_color,
    )


def _box(lo, hi) -> tuple[np.ndarray, np.ndarray]:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    vertices = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ],
        dtype=np.float64,
    )
    triangles = np.array(
        [
            [0, 1, 2], [0, 2, 3],  # z = z0
            [4, 6, 5], [4, 7, 6],  # z = z1
            [0, 4, 5], [0, 5, 1],  # y = y0
            [3, 2, 6], [3, 6, 7],  # y = y1
            [0, 3, 7], [0, 7, 4],  # x = x0
            [1, 5, 6], [1, 6, 2],  # x = x1
        ],
        dtype=np.int32,
    )
    return vertices, triangles


def box_mesh(lo, hi, base_color=(200, 200, 200)) -> TriangleMesh:
    """Closed axis-aligned box spanning [lo, hi]."""
    vertices, triangles = _box(lo, hi)
    return TriangleMesh(vertices, triangles, base_color)


def room_mesh(width: float, height: float, depth: float, base_color=(186, 196, 205)) -> TriangleMesh:
    """Rectangular room shell centered on x/z with the floor at y = 0."""
    return box_mesh(
        (-width / 2.0, 0.0, -depth / 2.0), (width / 2.0, height, depth / 2.0), base_color
    )


def instrument_proxy(tip_length: float, base_color=(80, 190, 240)) -> TriangleMesh:
    """Procedural stand-in geometry for a tracked instrument.

    A thin shaft runs from the pose origin along local +Z to the tip, with a
    short crossbar handle at the back so orientation reads on screen. Purely a
    function of tip_length, so replays are deterministic.
    """
    if not tip_length > 0:
        raise ValueError("tip_length must be positive")
    w = tip_length * 0.06
    shaft_v, shaft_t = _box((-w, -w, 0.0), (w, w, tip_length))
    hw = tip_length * 0.30
    hd = tip_length * 0.05
    handle_v, handle_t = _box((-hw, -hd, -3 * hd), (hw, hd, -hd))
    vertices = np.vstack([shaft_v, handle_v])
    triangles = np.vstack([shaft_t, handle_t + len(shaft_v)])
    return TriangleMesh(vertices, triangles, base_color)
