"""Deterministic CPU rendering: rasterized geometry + packed min-splatted points.

This is the executable reference for the whole pipeline; any accelerated
implementation must reproduce these images.

Coordinate conventions
----------------------
World and camera space are right-handed; the camera looks along -Z with +Y up.
`view` is the 4x4 world-to-camera transform. Screen space puts pixel (0, 0) at
the top-left, x right, y down, with pixel centers at half-integers. A point at
camera-space q projects to

    z_view = -q.z                              (positive in front of the camera)
    u = f_px * q.x / z_view + width / 2
    v = -f_px * q.y / z_view + height / 2
    pixel = (floor(u), floor(v))

with f_px = (height / 2) / tan(vertical_fov / 2).

Depth is linear in view distance: d01 = (z_view - near) / (far - near), kept
only on [0, 1). Keeping far - near small spends the 8-bit point-depth budget
over a short range, which is what holds Z-fighting at bay.

Packed cells
------------
Each splatted point becomes one 32-bit value (D << 24) | (R << 16) | (G << 8) | B
with D = floor(d01 * 255) clamped to 254, so an unsigned integer minimum picks
the nearest point and breaks depth ties by color bytes, a total order. Empty
cells hold the sentinel 0xFFFFFFFF, which no accepted point can produce (that
would need D = 255). The per-cell merge is min(), so splatting is associative,
commutative, and therefore schedule independent: any partition of the points
over any number of workers produces a bit-identical framebuffer.

The resolve pass composites points over geometry per pixel: a point wins iff
its quantized depth D / 255 is strictly below the full-precision geometry
depth; ties favor geometry.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .meshes import TriangleMesh
from .pccodec import PointCloudFrame

SENTINEL = 0xFFFFFFFF


@dataclass
class PinholeCamera:
    view: np.ndarray  # (4, 4) world -> camera
    vertical_fov: float  # degrees
    width: int
    height: int
    near: float  # meters
    far: float  # meters

    def __post_init__(self):
        self.view = np.asarray(self.view, dtype=np.float64).reshape(4, 4)
        if not 0.0 < self.near < self.far:
            raise ValueError("camera needs 0 < near < far")
        if not 0.0 < self.vertical_fov < 180.0:
            raise ValueError("vertical_fov must be in (0, 180)")

    @property
    def f_px(self) -> float:
        """Focal length in pixels."""
        return (self.height / 2.0) / math.tan(math.radians(self.vertical_fov) / 2.0)

    @classmethod
    def look_at(
        cls, position, target, up=(0.0, 1.0, 0.0), *,
        vertical_fov: float, width: int, height: int, near: float, far: float,
    ) -> "PinholeCamera":
        position = np.asarray(position, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - position
        fn = np.linalg.norm(forward)
        if fn == 0:
            raise ValueError("camera position and target coincide")
        forward = forward / fn
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        rn = np.linalg.norm(right)
        if rn < 1e-12:
            raise ValueError("up vector is parallel to the view direction")
        right = right / rn
        true_up = np.cross(right, forward)
        view = np.eye(4)
        view[0, :3] = right
        view[1, :3] = true_up
        view[2, :3] = -forward
        view[:3, 3] = -view[:3, :3] @ position
        return cls(view, vertical_fov, width, height, near, far)

    def eye_offset(self, dx: float) -> "PinholeCamera":
        """Camera translated dx meters along its own right axis, same orientation."""
        view = self.view.copy()
        view[0, 3] -= dx
        return replace(self, view=view)


class PackedFramebuffer:
    """width x height packed (depth, color) cells, all sentinel after clear()."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.cells = np.full((height, width), SENTINEL, dtype=np.uint32)

    def clear(self):
        self.cells.fill(SENTINEL)


class GeometryBuffers:
    """Rasterization target: RGB color plus linear view-space depth in [0, 1]."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.color = np.zeros((height, width, 3), dtype=np.uint8)
        self.depth = np.ones((height, width), dtype=np.float64)  # 1.0 = empty / far

    def clear(self):
        self.color.fill(0)
        self.depth.fill(1.0)


def pack_cell(d: int, r: int, g: int, b: int) -> int:
    """(D << 24) | (R << 16) | (G << 8) | B; depth-major so integer min is depth min."""
    return (d << 24) | (r << 16) | (g << 8) | b


def unpack_cell(value: int) -> tuple[int, int, int, int]:
    return (value >> 24) & 0xFF, (value >> 16) & 0xFF, (value >> 8) & 0xFF, value & 0xFF


def quantize_depth(z_view: float, near: float, far: float) -> int | None:
    """Linear depth byte for a view-space distance, or None when outside [near, far).

    The interval is half-open so D never reaches 255, keeping the framebuffer
    sentinel unreachable.
    """
    d01 = (z_view - near) / (far - near)
    if not (0.0 <= d01 < 1.0):
        return None
    return min(int(d01 * 255.0), 254)


def project(camera: PinholeCamera, p) -> tuple[int, int, float] | None:
    """Pixel coordinates and view depth of a world point, or None when off screen
    or outside the [near, far) depth range."""
    q = camera.view[:3, :3] @ np.asarray(p, dtype=np.float64) + camera.view[:3, 3]
    z_view = -q[2]
    if not (camera.near <= z_view < camera.far):
        return None
    f = camera.f_px
    u = f * q[0] / z_view + camera.width / 2.0
    v = -f * q[1] / z_view + camera.height / 2.0
    px = math.floor(u)
    py = math.floor(v)
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        return None
    return px, py, z_view


def _project_points(camera: PinholeCamera, positions: np.ndarray):
    """Vectorized projection. Returns (px, py, z_view, kept_indices)."""
    R = camera.view[:3, :3]
    t = camera.view[:3, 3]
    q = positions @ R.T + t
    z = -q[:, 2]
    infront = (z >= camera.near) & (z < camera.far)
    idx = np.nonzero(infront)[0]
    qz = z[idx]
    f = camera.f_px
    u = f * q[idx, 0] / qz + camera.width / 2.0
    v = -f * q[idx, 1] / qz + camera.height / 2.0
    px = np.floor(u).astype(np.int64)
    py = np.floor(v).astype(np.int64)
    onscreen = (px >= 0) & (px < camera.width) & (py >= 0) & (py < camera.height)
    return px[onscreen], py[onscreen], qz[onscreen], idx[onscreen]


def _packed_values(camera: PinholeCamera, frame: PointCloudFrame):
    px, py, z, idx = _project_points(camera, frame.positions)
    d01 = (z - camera.near) / (camera.far - camera.near)
    depth = np.minimum(np.floor(d01 * 255.0).astype(np.uint32), 254)
    c = frame.colors[idx].astype(np.uint32)
    packed = (depth << 24) | (c[:, 0] << 16) | (c[:, 1] << 8) | c[:, 2]
    return px, py, packed


def splat_points(fb: PackedFramebuffer, camera: PinholeCamera, frame: PointCloudFrame,
                 workers: int = 1) -> None:
    """Splat every point as a single pixel via per-cell unsigned-integer minimum.

    With workers > 1 the points are partitioned across a thread pool, each
    worker reducing into its own buffer; buffers merge by elementwise min, so
    the result is bit-identical for any worker count.
    """
    if camera.width != fb.width or camera.height != fb.height:
        raise ValueError("framebuffer dimensions must match the camera")
    if len(frame) == 0:
        return
    px, py, packed = _packed_values(camera, frame)
    if len(packed) == 0:
        return
    if workers <= 1:
        np.minimum.at(fb.cells, (py, px), packed)
        return

    def reduce_chunk(start: int) -> np.ndarray:
        buf = np.full((fb.height, fb.width), SENTINEL, dtype=np.uint32)
        sel = slice(start, None, workers)
        np.minimum.at(buf, (py[sel], px[sel]), packed[sel])
        return buf

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for buf in pool.map(reduce_chunk, range(workers)):
            np.minimum(fb.cells, buf, out=fb.cells)


def _clip_near(cam_verts: np.ndarray, near: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a camera-space polygon against z_view >= near."""
    out: list[np.ndarray] = []
    n = len(cam_verts)
    for i in range(n):
        s = cam_verts[i]
        e = cam_verts[(i + 1) % n]
        zs = -s[2]
        ze = -e[2]
        s_in = zs >= near
        e_in = ze >= near
        if s_in:
            out.append(s)
        if s_in != e_in:
            u = (near - zs) / (ze - zs)
            out.append(s + u * (e - s))
    return out


def _edge(a, b, x, y):
    return (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])


def _accepts_boundary(a, b) -> bool:
    # Top-left fill rule: a boundary sample belongs to the triangle whose edge
    # is a top edge (horizontal, pointing +x in this winding) or a left edge
    # (pointing -y, i.e. upward on screen).
    dy = b[1] - a[1]
    return dy < 0 or (dy == 0 and b[0] - a[0] > 0)


def _raster_triangle(gb: GeometryBuffers, p0, p1, p2, color: np.ndarray,
                     near: float, far: float) -> None:
    area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
    if area2 == 0:
        return
    if area2 < 0:
        p1, p2 = p2, p1
        area2 = -area2

    height, width = gb.depth.shape
    min_u = min(p0[0], p1[0], p2[0])
    max_u = max(p0[0], p1[0], p2[0])
    min_v = min(p0[1], p1[1], p2[1])
    max_v = max(p0[1], p1[1], p2[1])
    x0 = max(0, math.ceil(min_u - 0.5))
    x1 = min(width - 1, math.floor(max_u - 0.5))
    y0 = max(0, math.ceil(min_v - 0.5))
    y1 = min(height - 1, math.floor(max_v - 0.5))
    if x1 < x0 or y1 < y0:
        return

    xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    X, Y = np.meshgrid(xs, ys)
    w0 = _edge(p1, p2, X, Y)
    w1 = _edge(p2, p0, X, Y)
    w2 = _edge(p0, p1, X, Y)
    cover = (
        ((w0 > 0) | ((w0 == 0) & _accepts_boundary(p1, p2)))
        & ((w1 > 0) | ((w1 == 0) & _accepts_boundary(p2, p0)))
        & ((w2 > 0) | ((w2 == 0) & _accepts_boundary(p0, p1)))
    )
    if not cover.any():
        return

    # perspective-correct: 1/z interpolates linearly in screen space
    inv_z = (w0 / p0[2] + w1 / p1[2] + w2 / p2[2]) / area2
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(inv_z > 0, 1.0 / inv_z, np.inf)
    d01 = np.maximum((z - near) / (far - near), 0.0)
    depth_view = gb.depth[y0 : y1 + 1, x0 : x1 + 1]
    write = cover & (d01 < 1.0) & (d01 < depth_view)
    if not write.any():
        return
    depth_view[write] = d01[write]
    gb.color[y0 : y1 + 1, x0 : x1 + 1][write] = color


def rasterize_mesh(gb: GeometryBuffers, camera: PinholeCamera, mesh: TriangleMesh) -> None:
    """Flat-shaded triangle rasterization with a strict linear-depth z-test.

    Shading is a headlight Lambert term, abs(cos) between the triangle normal
    and the viewing direction, clamped to the [0.2, 1.0] ambient floor, so the
    geometry pass is deterministic and winding independent. Triangles crossing
    the near plane are clipped; fragments past far are dropped.
    """
    R = camera.view[:3, :3]
    t = camera.view[:3, 3]
    cam = mesh.vertices @ R.T + t
    base = np.asarray(mesh.base_color, dtype=np.float64)
    for tri in mesh.triangles:
        v = cam[tri]
        n = np.cross(v[1] - v[0], v[2] - v[0])
        nl = np.linalg.norm(n)
        if nl == 0.0:
            continue
        shade = min(max(abs(n[2]) / nl, 0.2), 1.0)
        color = np.clip(np.floor(base * shade + 0.5), 0, 255).astype(np.uint8)
        poly = _clip_near(v, camera.near)
        if len(poly) < 3:
            continue
        f = camera.f_px
        cx = camera.width / 2.0
        cy = camera.height / 2.0
        pts = []
        for p in poly:
            zv = -p[2]
            pts.append((f * p[0] / zv + cx, -f * p[1] / zv + cy, zv))
        for k in range(1, len(pts) - 1):
            _raster_triangle(gb, pts[0], pts[k], pts[k + 1], color, camera.near, camera.far)


def resolve(fb: PackedFramebuffer, gb: GeometryBuffers) -> np.ndarray:
    """Composite splatted points over rasterized geometry.

    A point shows iff its quantized linear depth D / 255 is strictly less than
    the full-precision geometry depth; empty cells and ties fall through to the
    geometry color.
    """
    if (fb.width, fb.height) != (gb.width, gb.height):
        raise ValueError("packed and geometry buffers must match in size")
    cells = fb.cells
    occupied = cells != SENTINEL
    point_depth = (cells >> np.uint32(24)).astype(np.float64) / 255.0
    visible = occupied & (point_depth < gb.depth)
    out = gb.color.copy()
    point_rgb = np.stack(
        [
            ((cells >> np.uint32(16)) & np.uint32(0xFF)).astype(np.uint8),
            ((cells >> np.uint32(8)) & np.uint32(0xFF)).astype(np.uint8),
            (cells & np.uint32(0xFF)).astype(np.uint8),
        ],
        axis=-1,
    )
    out[visible] = point_rgb[visible]
    return out


def render_view(camera: PinholeCamera, meshes, frames, workers: int = 1) -> np.ndarray:
    """Full single-eye pass: rasterize all meshes, splat all frames, resolve."""
    gb = GeometryBuffers(camera.width, camera.height)
    for mesh in meshes:
        rasterize_mesh(gb, camera, mesh)
    fb = PackedFramebuffer(camera.width, camera.height)
    for frame in frames:
        splat_points(fb, camera, frame, workers=workers)
    return resolve(fb, gb)


def render_stereo(camera: PinholeCamera, meshes, frames, ipd: float,
                  workers: int = 1) -> np.ndarray:
    """Side-by-side stereo: two full passes from eyes displaced +-ipd/2 along the
    camera-right axis, left eye in the left half."""
    left = render_view(camera.eye_offset(-ipd / 2.0), meshes, frames, workers=workers)
    right = render_view(camera.eye_offset(+ipd / 2.0), meshes, frames, workers=workers)
    return np.concatenate([left, right], axis=1)


def write_ppm(image: np.ndarray) -> bytes:
    """Binary PPM (P6, maxval 255), top row first; bit-exact for golden tests."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("image must be (height, width, 3)")
    height, width = img.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + img.tobytes()
