"""Command-line surface tying the pipeline together.

Subcommands: encode, decode, rectify, backproject, eval, reconstruct, synth,
pipeline.  Batch commands accept files, directories, and glob patterns; one
bad item marks its report row as an error without aborting the batch unless
--strict is given.  Exit status is 0 iff no item errored.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from . import io
from .decode import DecoderConfig, WallPeaks, decode
from .detect import detect_segments
from .flat import encode
from .layout import ImageGeometry, LayoutAnnotation, Point2, rasterize
from .metrics import corner_error, pixel_error
from .pipeline import (
    ItemReport,
    PipelineConfig,
    RunReport,
    Stopwatch,
    expand_inputs,
    format_report_table,
    process_items,
)
from .reconstruct import (
    CameraModel,
    default_focal,
    export_obj,
    lift_layout,
    pick_right_angle_triple,
    solve_focal,
)
from .rectify import (
    RansacConfig,
    backproject_corners,
    build_rectifying_homography,
    filter_vertical,
    ransac_vpz,
    warp_image,
)
from .synth import SynthConfig, sample_room


def _add_decoder_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--smooth-frac", type=float, default=0.05)
    parser.add_argument("--peak-thresh", type=float, default=0.5)
    parser.add_argument("--oob-frac", type=float, default=0.99)
    parser.add_argument("--presence-thresh", type=float, default=0.5)
    parser.add_argument("--segment-clamp", action="store_true")


def _decoder_config(args: argparse.Namespace) -> DecoderConfig:
    return DecoderConfig(
        smooth_frac=args.smooth_frac,
        peak_threshold=args.peak_thresh,
        oob_frac=args.oob_frac,
        presence_threshold=args.presence_thresh,
        segment_clamp=args.segment_clamp,
    )


def _parse_size(value: str) -> ImageGeometry:
    try:
        w, h = value.lower().split("x")
        return ImageGeometry(width=int(w), height=int(h))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got '{value}'") from exc


def _item_base(path: Path) -> str:
    name = path.name
    for suffix in (".layout.json", ".flat.json", ".noisy.json", ".json", ".png"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _out_path(out: Optional[str], src: Path, default_suffix: str, n_items: int) -> Path:
    if out is None:
        return src.with_name(_item_base(src) + default_suffix)
    out_path = Path(out)
    if n_items > 1 or out_path.is_dir():
        out_path.mkdir(parents=True, exist_ok=True)
        return out_path / (_item_base(src) + default_suffix)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    return out_path


def _write_report(report: RunReport, path: Optional[str]) -> None:
    if path:
        io.write_json(path, report.to_dict())


def _scale_annotation(annotation: LayoutAnnotation, target: ImageGeometry) -> LayoutAnnotation:
    src = annotation.geometry
    if src == target:
        return annotation
    sx = (target.width - 1) / (src.width - 1)
    sy = (target.height - 1) / (src.height - 1)

    def scale(points):
        return tuple(Point2(p.x * sx, p.y * sy) for p in points)

    return LayoutAnnotation(
        geometry=target,
        ceiling=scale(annotation.ceiling),
        floor=scale(annotation.floor),
        walls=tuple(w * sx for w in annotation.walls),
        has_ceiling=annotation.has_ceiling,
        has_floor=annotation.has_floor,
    )


def _working_geometry(width: int, height: Optional[int], decoder: DecoderConfig) -> ImageGeometry:
    """Working frame for a flat of the given width (square unless overridden)."""
    geometry = ImageGeometry(width=width, height=height or width)
    return PipelineConfig(working_size=geometry, decoder=decoder).working_size


def _gt_lookup(gt_arg: Optional[str], src: Path) -> Optional[Path]:
    if gt_arg is None:
        return None
    gt_path = Path(gt_arg)
    if gt_path.is_dir():
        candidate = gt_path / (_item_base(src) + ".layout.json")
        return candidate if candidate.exists() else None
    return gt_path


def _evaluate(report: ItemReport, gt: LayoutAnnotation, pred: LayoutAnnotation, with_pe: bool) -> None:
    ce = corner_error(gt.all_corners(), pred.all_corners(), gt.geometry)
    report.metrics["ce"] = ce.value
    report.metrics["n_gt"] = len(gt.all_corners())
    report.metrics["n_pred"] = len(pred.all_corners())
    if with_pe:
        if gt.geometry == pred.geometry:
            report.metrics["pe"] = pixel_error(rasterize(gt), rasterize(pred)).value
        else:
            report.message = "pixel error skipped: geometry mismatch"


def cmd_encode(args: argparse.Namespace) -> RunReport:
    inputs = expand_inputs(args.inputs)
    target = (
        ImageGeometry(width=args.width, height=args.height)
        if args.width and args.height
        else None
    )

    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        annotation = watch.time("parse", lambda: io.read_annotation(src))
        if target is not None:
            annotation = _scale_annotation(annotation, target)
        flat = watch.time("encode", lambda: encode(annotation))
        out = _out_path(args.out, src, ".flat.json", len(inputs))
        watch.time("write", lambda: io.write_flat(out, flat))
        return report

    return process_items([str(p) for p in inputs], worker, args.threads, args.strict)


def cmd_decode(args: argparse.Namespace) -> RunReport:
    inputs = expand_inputs(args.inputs)
    cfg = _decoder_config(args)

    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        flat = watch.time("parse", lambda: io.read_flat(src))
        geometry = _working_geometry(flat.width, args.height, cfg)
        result = watch.time("decode", lambda: decode(flat, geometry, cfg))
        report.apply_boundary_paths(result.ceiling.path, result.floor.path)
        out = _out_path(args.out, src, ".layout.json", len(inputs))
        watch.time("write", lambda: io.write_annotation(out, result.annotation))
        gt_path = _gt_lookup(args.gt, src)
        if gt_path is not None:
            gt = io.read_annotation(gt_path)
            watch.time("eval", lambda: _evaluate(report, gt, result.annotation, with_pe=not args.no_pe))
        return report

    return process_items([str(p) for p in inputs], worker, args.threads, args.strict)


def cmd_rectify(args: argparse.Namespace) -> RunReport:
    inputs = expand_inputs(args.inputs, suffix=".png")
    ransac_cfg = RansacConfig(
        iterations=args.iterations, inlier_angle_deg=args.inlier_angle, seed=args.seed
    )

    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        image = None
        if src.suffix.lower() == ".png":
            image = watch.time("read", lambda: io.read_image(src))
            geometry = ImageGeometry(width=image.shape[1], height=image.shape[0])
            segments = watch.time("detect", lambda: detect_segments(image))
        else:
            segments = watch.time("read", lambda: io.read_segments(src))
            if args.size is None:
                raise ValueError("segment-file input requires --size WIDTHxHEIGHT")
            geometry = args.size
        vertical = filter_vertical(segments)
        if len(vertical) < 2:
            raise ValueError(f"only {len(vertical)} vertical segments; need at least 2")
        vp = watch.time("ransac", lambda: ransac_vpz(vertical, ransac_cfg))
        h = watch.time("homography", lambda: build_rectifying_homography(vp, geometry))
        out = _out_path(args.out, src, ".homography.json", len(inputs))
        io.write_homography(out, h, geometry)
        if args.warped_out and image is not None:
            warped = watch.time("warp", lambda: warp_image(image, h))
            io.write_image(_out_path(args.warped_out, src, ".rectified.png", len(inputs)), warped)
        return report

    return process_items([str(p) for p in inputs], worker, args.threads, args.strict)


def cmd_backproject(args: argparse.Namespace) -> RunReport:
    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        annotation = watch.time("parse", lambda: io.read_annotation(src))
        h, original = io.read_homography(args.homography)
        if args.original_size is not None:
            original = args.original_size
        corners = watch.time(
            "backproject",
            lambda: backproject_corners(annotation, h, original, annotation.geometry),
        )
        out = _out_path(args.out, src, ".corners.json", 1)
        io.write_corners(out, corners, original)
        return report

    return process_items([args.annotation], worker, 1, args.strict)


def cmd_eval(args: argparse.Namespace) -> RunReport:
    gt_files = expand_inputs(args.gt, suffix=".layout.json")
    pred_files = expand_inputs(args.pred, suffix=".layout.json")
    if len(gt_files) != len(pred_files):
        raise SystemExit(f"got {len(gt_files)} ground-truth files but {len(pred_files)} predictions")
    by_name = {_item_base(p): p for p in gt_files}
    pairs = []
    for pred in pred_files:
        gt = by_name.get(_item_base(pred))
        pairs.append((gt, pred) if gt is not None else (gt_files[len(pairs)], pred))

    lookup = {str(pred): gt for gt, pred in pairs}

    def worker(item: str) -> ItemReport:
        pred_path = Path(item)
        report = ItemReport(item_id=_item_base(pred_path))
        watch = Stopwatch(report)
        gt = io.read_annotation(lookup[item])
        pred = io.read_annotation(pred_path)
        watch.time("eval", lambda: _evaluate(report, gt, pred, with_pe=not args.no_pe))
        return report

    return process_items([str(p) for _, p in pairs], worker, args.threads, args.strict)


def _reconstruct_annotation(
    annotation: LayoutAnnotation, args: argparse.Namespace, report: ItemReport
) -> bytes:
    geometry = annotation.geometry
    if args.focal is not None:
        f = args.focal
    else:
        try:
            peaks = WallPeaks(xs=tuple(int(round(w)) for w in annotation.walls))
            triple = pick_right_angle_triple(annotation.floor, peaks, geometry)
            f = solve_focal(*triple)
        except ValueError as exc:
            f = default_focal(geometry, args.fov)
            report.worsen("focal-fallback")
            report.message = f"auto-focal failed ({exc}); using {f:.2f}px fallback"
    cam = CameraModel(f=f, geometry=geometry)
    report.metrics["focal_px"] = f
    mesh = lift_layout(annotation, cam)
    if args.camera_out:
        io.write_camera(args.camera_out, cam)
    return export_obj(mesh)


def cmd_reconstruct(args: argparse.Namespace) -> RunReport:
    inputs = expand_inputs(args.inputs)

    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        annotation = watch.time("parse", lambda: io.read_annotation(src))
        obj_bytes = watch.time("reconstruct", lambda: _reconstruct_annotation(annotation, args, report))
        out = _out_path(args.out, src, ".obj", len(inputs))
        out.write_bytes(obj_bytes)
        return report

    return process_items([str(p) for p in inputs], worker, args.threads, args.strict)


def cmd_synth(args: argparse.Namespace) -> RunReport:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = ImageGeometry(width=args.width, height=args.height)
    manifest_items = []

    def worker(item: str) -> ItemReport:
        index = int(item)
        report = ItemReport(item_id=f"sample_{index:04d}")
        watch = Stopwatch(report)
        cfg = SynthConfig(
            seed=args.seed + index,
            geometry=geometry,
            n_walls_range=(args.walls_min, args.walls_max),
            noise_sigma_y=args.sigma_y,
            noise_sigma_p=args.sigma_p,
            dropout_frac=args.dropout,
        )
        sample = watch.time("sample", lambda: sample_room(cfg))
        base = out_dir / report.item_id
        io.write_annotation(f"{base}.layout.json", sample.annotation)
        io.write_flat(f"{base}.flat.json", sample.flat_clean)
        io.write_flat(f"{base}.noisy.json", sample.flat_noisy)
        io.write_camera(f"{base}.camera.json", sample.camera)
        manifest_items.append(
            {
                "id": report.item_id,
                "seed": cfg.seed,
                "n_walls": len(sample.annotation.walls),
                "focal_px": sample.camera.f,
            }
        )
        return report

    report = process_items([str(i) for i in range(args.count)], worker, 1, args.strict)
    manifest_items.sort(key=lambda row: row["id"])
    io.write_json(
        out_dir / "manifest.json",
        {
            "schema": "manifest/1",
            "items": manifest_items,
            "config": {
                "seed": args.seed,
                "width": args.width,
                "height": args.height,
                "walls": [args.walls_min, args.walls_max],
                "sigma_y": args.sigma_y,
                "sigma_p": args.sigma_p,
                "dropout": args.dropout,
            },
        },
    )
    return report


def cmd_pipeline(args: argparse.Namespace) -> RunReport:
    cfg = _decoder_config(args)
    if args.flat:
        inputs = expand_inputs(args.flat)
    elif args.image:
        inputs = expand_inputs(args.image, suffix=".png")
    else:
        raise SystemExit("pipeline requires --flat or --image inputs")
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    ransac_cfg = RansacConfig(seed=args.seed)

    def worker(item: str) -> ItemReport:
        src = Path(item)
        report = ItemReport(item_id=_item_base(src))
        watch = Stopwatch(report)
        if src.suffix.lower() == ".png":
            image = watch.time("read", lambda: io.read_image(src))
            geometry = ImageGeometry(width=image.shape[1], height=image.shape[0])
            segments = watch.time("detect", lambda: detect_segments(image))
            vertical = filter_vertical(segments)
            if len(vertical) < 2:
                raise ValueError(f"only {len(vertical)} vertical segments; need at least 2")
            vp = watch.time("ransac", lambda: ransac_vpz(vertical, ransac_cfg))
            h = watch.time("homography", lambda: build_rectifying_homography(vp, geometry))
            if out_dir:
                io.write_homography(out_dir / f"{report.item_id}.homography.json", h, geometry)
                warped = watch.time("warp", lambda: warp_image(image, h))
                io.write_image(out_dir / f"{report.item_id}.rectified.png", warped)
            return report

        flat = watch.time("parse", lambda: io.read_flat(src))
        geometry = _working_geometry(flat.width, args.height, cfg)
        result = watch.time("decode", lambda: decode(flat, geometry, cfg))
        report.apply_boundary_paths(result.ceiling.path, result.floor.path)
        if out_dir:
            io.write_annotation(out_dir / f"{report.item_id}.layout.json", result.annotation)
        gt_path = _gt_lookup(args.gt, src)
        if gt_path is not None:
            gt = io.read_annotation(gt_path)
            watch.time("eval", lambda: _evaluate(report, gt, result.annotation, with_pe=not args.no_pe))
        if args.reconstruct and out_dir:
            obj_bytes = watch.time(
                "reconstruct", lambda: _reconstruct_annotation(result.annotation, args, report)
            )
            (out_dir / f"{report.item_id}.obj").write_bytes(obj_bytes)
        return report

    return process_items([str(p) for p in inputs], worker, args.threads, args.strict)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized stages")
    common.add_argument("--threads", type=int, default=1, help="worker threads for batches")
    common.add_argument("--strict", action="store_true", help="abort on the first item error")
    common.add_argument("--schema-version", type=int, default=1, choices=[1])

    parser = argparse.ArgumentParser(prog="roomlayout", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, parents=[common])

    p = add_parser("encode", "layout annotation file(s) -> flat representation file(s)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out")
    p.add_argument("--width", type=int, help="rescale annotations to this width before encoding")
    p.add_argument("--height", type=int, help="rescale annotations to this height before encoding")
    p.set_defaults(fn=cmd_encode)

    p = add_parser("decode", "flat representation file(s) -> layout annotation file(s)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out")
    p.add_argument("--height", type=int, help="working-frame height (default: the flat width)")
    p.add_argument("--gt", help="annotation file or directory for scoring")
    p.add_argument("--no-pe", action="store_true")
    p.add_argument("--report")
    _add_decoder_flags(p)
    p.set_defaults(fn=cmd_decode)

    p = add_parser("rectify", "image or segment file(s) -> homography (+ warped image)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out")
    p.add_argument("--warped-out", help="write the rectified image(s) here")
    p.add_argument("--size", type=_parse_size, help="image size for segment-file inputs")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--inlier-angle", type=float, default=2.0)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_rectify)

    p = add_parser("backproject", "working-frame annotation -> original-frame corners")
    p.add_argument("annotation")
    p.add_argument("homography")
    p.add_argument("--original-size", type=_parse_size)
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_backproject)

    p = add_parser("eval", "score predictions against ground truth (CE and PE)")
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--no-pe", action="store_true")
    p.add_argument("--report")
    p.set_defaults(fn=cmd_eval)

    p = add_parser("reconstruct", "layout annotation -> piecewise-planar OBJ mesh")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--focal", type=float)
    group.add_argument("--auto-focal", action="store_true")
    p.add_argument("--fov", type=float, default=60.0, help="fallback horizontal FoV in degrees")
    p.add_argument("--camera-out")
    p.add_argument("--report")
    p.set_defaults(fn=cmd_reconstruct)

    p = add_parser("synth", "generate a synthetic dataset with a manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--walls-min", type=int, default=0)
    p.add_argument("--walls-max", type=int, default=6)
    p.add_argument("--sigma-y", type=float, default=0.0)
    p.add_argument("--sigma-p", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_synth)

    p = add_parser("pipeline", "end-to-end run over flats (decode/eval/reconstruct) or images")
    p.add_argument("--flat", nargs="+")
    p.add_argument("--image", nargs="+")
    p.add_argument("--gt")
    p.add_argument("--out")
    p.add_argument("--height", type=int)
    p.add_argument("--reconstruct", action="store_true")
    p.add_argument("--focal", type=float, default=None)
    p.add_argument("--fov", type=float, default=60.0)
    p.add_argument("--camera-out", default=None)
    p.add_argument("--no-pe", action="store_true")
    p.add_argument("--report")
    _add_decoder_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report: RunReport = args.fn(args)
    except (FileNotFoundError, io.SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_report_table(report))
    _write_report(report, getattr(args, "report", None))
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
