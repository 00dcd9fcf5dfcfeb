"""Canonical file schemas: JSON records with a versioned "schema" field.

Every structured file is JSON with a "schema" discriminator like
"layout/1"; numbers round-trip exactly because floats are serialized in
shortest-repr decimal form.  See FORMATS.md for field-by-field tables.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from PIL import Image

from .flat import FlatRepr
from .layout import ImageGeometry, LayoutAnnotation, Point2
from .rectify import CornerSets, Homography, LineSegment
from .reconstruct import CameraModel

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A structured file does not match its schema."""


def _require(data: dict, field: str, path: Path | str) -> Any:
    if field not in data:
        raise SchemaError(f"{path}: missing field '{field}'")
    return data[field]


def write_json(path: Path | str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_json(path: Path | str, kind: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    schema = _require(data, "schema", path)
    expected = f"{kind}/{SCHEMA_VERSION}"
    if schema != expected:
        raise SchemaError(f"{path}: schema '{schema}' does not match expected '{expected}'")
    return data


def annotation_to_dict(annotation: LayoutAnnotation) -> dict:
    return {
        "schema": f"layout/{SCHEMA_VERSION}",
        "width": annotation.geometry.width,
        "height": annotation.geometry.height,
        "ceiling": [[p.x, p.y] for p in annotation.ceiling],
        "floor": [[p.x, p.y] for p in annotation.floor],
        "walls": list(annotation.walls),
        "has_ceiling": annotation.has_ceiling,
        "has_floor": annotation.has_floor,
    }


def _parse_points(value: Any, field: str, path: Path | str) -> tuple[Point2, ...]:
    try:
        return tuple(Point2(float(x), float(y)) for x, y in value)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: field '{field}' must be a list of [x, y] pairs ({exc})") from exc


def annotation_from_dict(data: dict, path: Path | str = "<memory>") -> LayoutAnnotation:
    geometry = ImageGeometry(
        width=int(_require(data, "width", path)), height=int(_require(data, "height", path))
    )
    try:
        return LayoutAnnotation(
            geometry=geometry,
            ceiling=_parse_points(_require(data, "ceiling", path), "ceiling", path),
            floor=_parse_points(_require(data, "floor", path), "floor", path),
            walls=tuple(float(w) for w in _require(data, "walls", path)),
            has_ceiling=bool(_require(data, "has_ceiling", path)),
            has_floor=bool(_require(data, "has_floor", path)),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_annotation(path: Path | str, annotation: LayoutAnnotation) -> None:
    write_json(path, annotation_to_dict(annotation))


def read_annotation(path: Path | str) -> LayoutAnnotation:
    return annotation_from_dict(read_json(path, "layout"), path)


def flat_to_dict(flat: FlatRepr) -> dict:
    return {
        "schema": f"flat/{SCHEMA_VERSION}",
        "width": flat.width,
        "y_ceil": flat.y_ceil.tolist(),
        "y_floor": flat.y_floor.tolist(),
        "p_wall": flat.p_wall.tolist(),
        "p_ceil": flat.p_ceil,
        "p_floor": flat.p_floor,
    }


def flat_from_dict(data: dict, path: Path | str = "<memory>") -> FlatRepr:
    width = int(_require(data, "width", path))
    try:
        return FlatRepr(
            width=width,
            y_ceil=np.asarray(_require(data, "y_ceil", path), dtype=np.float64),
            y_floor=np.asarray(_require(data, "y_floor", path), dtype=np.float64),
            p_wall=np.asarray(_require(data, "p_wall", path), dtype=np.float64),
            p_ceil=float(_require(data, "p_ceil", path)),
            p_floor=float(_require(data, "p_floor", path)),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_flat(path: Path | str, flat: FlatRepr) -> None:
    write_json(path, flat_to_dict(flat))


def read_flat(path: Path | str) -> FlatRepr:
    return flat_from_dict(read_json(path, "flat"), path)


def write_segments(path: Path | str, segments: Sequence[LineSegment]) -> None:
    write_json(
        path,
        {
            "schema": f"segments/{SCHEMA_VERSION}",
            "segments": [[s.a.x, s.a.y, s.b.x, s.b.y] for s in segments],
        },
    )


def read_segments(path: Path | str) -> list[LineSegment]:
    data = read_json(path, "segments")
    out = []
    for row in _require(data, "segments", path):
        try:
            ax, ay, bx, by = (float(v) for v in row)
            out.append(LineSegment(a=Point2(ax, ay), b=Point2(bx, by)))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: bad segment row {row} ({exc})") from exc
    return out


def write_homography(path: Path | str, h: Homography, geometry: ImageGeometry) -> None:
    write_json(
        path,
        {
            "schema": f"homography/{SCHEMA_VERSION}",
            "matrix": [float(v) for v in h.m.reshape(9)],
            "width": geometry.width,
            "height": geometry.height,
        },
    )


def read_homography(path: Path | str) -> tuple[Homography, ImageGeometry]:
    data = read_json(path, "homography")
    matrix = _require(data, "matrix", path)
    if len(matrix) != 9:
        raise SchemaError(f"{path}: matrix must hold 9 reals, got {len(matrix)}")
    geometry = ImageGeometry(
        width=int(_require(data, "width", path)), height=int(_require(data, "height", path))
    )
    try:
        return Homography(np.asarray(matrix, dtype=np.float64).reshape(3, 3)), geometry
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_camera(path: Path | str, cam: CameraModel) -> None:
    write_json(
        path,
        {
            "schema": f"camera/{SCHEMA_VERSION}",
            "f": cam.f,
            "width": cam.geometry.width,
            "height": cam.geometry.height,
        },
    )


def read_camera(path: Path | str) -> CameraModel:
    data = read_json(path, "camera")
    return CameraModel(
        f=float(_require(data, "f", path)),
        geometry=ImageGeometry(
            width=int(_require(data, "width", path)), height=int(_require(data, "height", path))
        ),
    )


def write_corners(path: Path | str, corners: CornerSets, geometry: ImageGeometry) -> None:
    """Boundary corner lists in a frame where walls need not be vertical."""
    write_json(
        path,
        {
            "schema": f"corners/{SCHEMA_VERSION}",
            "width": geometry.width,
            "height": geometry.height,
            "ceiling": [[p.x, p.y] for p in corners.ceiling],
            "floor": [[p.x, p.y] for p in corners.floor],
        },
    )


def read_corners(path: Path | str) -> tuple[CornerSets, ImageGeometry]:
    data = read_json(path, "corners")
    geometry = ImageGeometry(
        width=int(_require(data, "width", path)), height=int(_require(data, "height", path))
    )
    return (
        CornerSets(
            ceiling=_parse_points(_require(data, "ceiling", path), "ceiling", path),
            floor=_parse_points(_require(data, "floor", path), "floor", path),
        ),
        geometry,
    )


def read_image(path: Path | str) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img)


def write_image(path: Path | str, pixels: np.ndarray) -> None:
    Image.fromarray(pixels).save(path, format="PNG")
