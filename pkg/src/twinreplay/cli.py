"""Command line surface: twin convert|render|bench-loader|gen-synthetic|pose-compare|serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, pccodec, replay, scene, server, synthetic, trajectory
from .render import write_ppm


def _parse_floats(text: str, n: int, what: str) -> list[float]:
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise ValueError(f"{what} needs {n} numbers, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ValueError(f"{what}: {exc}") from exc


def cmd_convert(args) -> int:
    out_dir = Path(args.out)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    crop_box = None
    if args.crop:
        vals = _parse_floats(args.crop, 6, "--crop")
        crop_box = pccodec.Aabb(np.array(vals[:3]), np.array(vals[3:]))
    grid = None
    if args.voxel_size is not None:
        origin = np.zeros(3)
        if args.voxel_origin:
            origin = np.array(_parse_floats(args.voxel_origin, 3, "--voxel-origin"))
        grid = pccodec.VoxelGridParams(origin, args.voxel_size)

    errors = []
    frames = []
    for path in args.ply:
        try:
            frame = pccodec.import_ply(Path(path).read_bytes())
            if crop_box is not None:
                frame = pccodec.crop_aabb(frame, crop_box)
            if grid is not None:
                frame = pccodec.voxel_downsample(frame, grid)
            frames.append(frame)
        except (OSError, ValueError) as exc:
            errors.append(f"{path}: {exc}")
    if errors:
        for line in errors:
            print(f"error: {line}", file=sys.stderr)
        return 1

    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for i, frame in enumerate(frames):
        (frames_dir / f"{i:06}.spcf").write_bytes(pccodec.encode_spcf(frame))
        if len(frame):
            lo = np.minimum(lo, frame.bbox.min)
            hi = np.maximum(hi, frame.bbox.max)
    if not np.isfinite(lo).all():
        lo, hi = np.zeros(3), np.ones(3)

    center = (lo + hi) / 2.0
    diag = float(np.linalg.norm(hi - lo)) or 1.0
    manifest = scene.SceneManifest(
        name=args.name,
        anim_fps=args.fps,
        frame_count=len(frames),
        near_clip=0.05,
        far_clip=max(2.5 * diag, 1.0),
        entities=(
            scene.EntityDescriptor(
                id="surgeon", kind="pointcloud_sequence", uri_pattern="frames/{index:06}.spcf"
            ),
        ),
        default_camera=scene.CameraConfig(
            position=tuple(center + np.array([0.0, 0.25 * diag, 0.9 * diag])),
            look_at=tuple(center),
        ),
    )
    (out_dir / "scene.json").write_bytes(scene.serialize_manifest(manifest))
    print(f"wrote {len(frames)} frames and scene.json to {out_dir}")
    return 0


def cmd_render(args) -> int:
    loaded = replay.load_scene(args.scene)
    camera = replay.scene_camera(
        loaded.manifest,
        width=args.width,
        height=args.height,
        vertical_fov=args.fov,
        near=args.near,
        far=args.far,
    )
    visibility = None
    if args.hide:
        visibility = {e.id: e.initially_visible for e in loaded.manifest.entities}
        for entity_id in args.hide:
            if entity_id not in visibility:
                print(f"error: unknown entity id '{entity_id}'", file=sys.stderr)
                return 1
            visibility[entity_id] = False

    image = replay.render_scene(
        loaded,
        media_time=args.time,
        frame_index=args.frame if args.time is None else None,
        eye=args.eye,
        camera=camera,
        visibility=visibility,
        workers=args.workers,
    )
    out = Path(args.out)
    out.write_bytes(write_ppm(image))
    print(f"wrote {out} ({image.shape[1]}x{image.shape[0]})")
    return 0


def cmd_bench_loader(args) -> int:
    loaded = replay.load_scene(args.scene)
    frames = loaded.manifest.frame_count
    period_s = (args.period / 1000.0) if args.period else 1.0 / loaded.manifest.anim_fps
    latency_s = args.latency / 1000.0
    store = loaded.frame_store()

    if args.wall:
        baseline = bench.run_wall(frames, latency_s, period_s, "sync", store=store)
        report = (
            baseline
            if args.mode == "sync"
            else bench.run_wall(frames, latency_s, period_s, "async", store=store)
        )
    else:
        baseline = bench.run_simulated(frames, latency_s, period_s, "sync", store=store)
        report = (
            baseline
            if args.mode == "sync"
            else bench.run_simulated(frames, latency_s, period_s, "async", store=store)
        )
    ratio = bench.speedup(baseline, report)

    print(
        f"mode={report.mode} frames={report.frames} "
        f"latency={report.latency_ms:.1f}ms period={report.period_ms:.1f}ms"
    )
    print(
        f"stalls={report.stalls} blocked={report.blocked_ms:.1f}ms "
        f"loads={report.loads_issued} elapsed={report.elapsed_ms:.1f}ms"
    )
    print(f"sync baseline: stalls={baseline.stalls} blocked={baseline.blocked_ms:.1f}ms")
    print(f"speedup={'inf' if ratio == float('inf') else f'{ratio:.2f}'}x blocked time vs sync")

    if args.json:
        doc = {"report": report.to_dict(), "sync_baseline": baseline.to_dict(), "speedup": ratio}
        text = json.dumps(doc, indent=2)
        if args.json == "-":
            print(text)
        else:
            Path(args.json).write_text(text + "\n")
    return 0


def cmd_gen_synthetic(args) -> int:
    spec = synthetic.SyntheticSceneSpec(
        name=args.name,
        frame_count=args.frames,
        anim_fps=args.fps,
        points_per_frame=args.points,
        room_size=tuple(args.room),
        seed=args.seed,
    )
    manifest_path = synthetic.generate_scene(spec, Path(args.out))
    print(f"wrote scene to {manifest_path.parent} ({spec.frame_count} frames, seed {spec.seed})")
    return 0


def cmd_pose_compare(args) -> int:
    loaded = replay.load_scene(args.scene)
    instrument = loaded.manifest.instrument_entity()
    if instrument is None or instrument.id not in loaded.trajectories:
        print("error: scene has no instrument trajectory", file=sys.stderr)
        return 1
    try:
        vals = _parse_floats(args.user_pose, 7, "--user-pose")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    user = trajectory.RigidPose(np.array(vals[:3]), np.array(vals[3:]))
    expert = replay.instrument_pose(loaded, instrument.id, args.time)
    delta = trajectory.compare_poses(expert, user, instrument.tip_length)
    print(f"tip_distance_mm={delta.tip_distance:.3f}")
    print(f"axis_angle_deg={delta.axis_angle:.3f}")
    if args.json:
        print(json.dumps({"tip_distance_mm": delta.tip_distance,
                          "axis_angle_deg": delta.axis_angle}))
    return 0


def cmd_serve(args) -> int:
    scene_root = args.scene_root or os.environ.get("TWIN_SCENE_ROOT")
    if not scene_root:
        print("error: pass a scene root or set TWIN_SCENE_ROOT", file=sys.stderr)
        return 1
    config = server.ServeConfig(
        scene_root=Path(scene_root),
        host=args.host,
        port=args.port,
        cors=args.cors,
        static_dir=Path(args.static) if args.static else None,
        quiet=False,
    )
    srv = server.make_server(config)
    print(f"serving {scene_root} at {srv.url} (ctrl-c to stop)")
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twin", description="4D twin-scene replay toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert PLY files into an SPCF frame sequence")
    p.add_argument("ply", nargs="+", help="input .ply files, in frame order")
    p.add_argument("--out", required=True, help="output scene directory")
    p.add_argument("--crop", help="working volume: 'x0 y0 z0 x1 y1 z1'")
    p.add_argument("--voxel-size", type=float, help="voxel edge length for downsampling (m)")
    p.add_argument("--voxel-origin", help="voxel grid origin: 'x y z' (default 0 0 0)")
    p.add_argument("--fps", type=float, default=30.0, help="animation rate (default 30)")
    p.add_argument("--name", default="converted", help="scene name for the manifest")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("render", help="render one moment of a scene to a PPM image")
    p.add_argument("scene", help="scene.json path or scene directory")
    p.add_argument("--frame", type=int, default=0, help="frame index (default 0)")
    p.add_argument("--time", type=float, help="media time in seconds (overrides --frame)")
    p.add_argument("--eye", choices=replay.EYES, default="mono")
    p.add_argument("--out", default="out.ppm", help="output .ppm path")
    p.add_argument("--hide", action="append", default=[], metavar="ENTITY_ID",
                   help="hide an entity (repeatable)")
    p.add_argument("--width", type=int, help="override image width")
    p.add_argument("--height", type=int, help="override image height")
    p.add_argument("--fov", type=float, help="override vertical fov (degrees)")
    p.add_argument("--near", type=float, help="override near clip (m)")
    p.add_argument("--far", type=float, help="override far clip (m)")
    p.add_argument("--workers", type=int, default=1, help="splatting worker count")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench-loader", help="measure loader stalls for a scene")
    p.add_argument("scene")
    p.add_argument("--latency", type=float, required=True, help="simulated load latency (ms)")
    p.add_argument("--mode", choices=["sync", "async"], default="async")
    p.add_argument("--period", type=float, help="frame period (ms, default 1000/anim_fps)")
    p.add_argument("--wall", action="store_true",
                   help="use real threads and sleeps instead of the discrete-event clock")
    p.add_argument("--json", metavar="PATH", help="also write a JSON report ('-' for stdout)")
    p.set_defaults(func=cmd_bench_loader)

    p = sub.add_parser("gen-synthetic", help="generate a deterministic synthetic scene")
    p.add_argument("--out", required=True, help="output scene directory")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--points", type=int, default=20000, help="points per frame before cropping")
    p.add_argument("--room", type=float, nargs=3, default=[4.0, 2.5, 3.0],
                   metavar=("W", "H", "D"), help="room size in meters")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--name", default="synthetic-or")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("pose-compare", help="compare a user pose against the recorded expert")
    p.add_argument("scene")
    p.add_argument("--time", type=float, required=True, help="media time in seconds")
    p.add_argument("--user-pose", required=True, metavar="'TX TY TZ QW QX QY QZ'")
    p.add_argument("--json", action="store_true", help="also print a JSON line")
    p.set_defaults(func=cmd_pose_compare)

    p = sub.add_parser("serve", help="serve a scene over HTTP")
    p.add_argument("scene_root", nargs="?", help="scene directory (default $TWIN_SCENE_ROOT)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--cors", action="store_true", help="send Access-Control-Allow-Origin: *")
    p.add_argument("--static", help="directory of built viewer assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
