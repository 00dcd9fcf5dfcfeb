"""Batch orchestration: per-item processing, timing, and run reports."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from .decode import DecoderConfig
from .layout import ImageGeometry
from .rectify import RansacConfig

T = TypeVar("T")

# worst first; an item's status is its worst stage outcome
_STATUS_ORDER = ["error", "special-case-i", "special-case-ii", "focal-fallback", "ok"]
_PATH_STATUS = {"line-fit": "special-case-i", "out-of-plane": "special-case-ii"}


@dataclass(frozen=True)
class PipelineConfig:
    working_size: ImageGeometry = ImageGeometry(256, 256)
    decoder: DecoderConfig = DecoderConfig()
    ransac: RansacConfig = RansacConfig()
    default_fov_deg: float = 60.0

    def __post_init__(self) -> None:
        if self.working_size.width < 8 or self.working_size.height < 8:
            raise ValueError("working size must be at least 8x8")


@dataclass
class ItemReport:
    item_id: str
    status: str = "ok"
    paths: dict[str, str] = field(default_factory=dict)
    timings_ms: dict[str, float] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    message: str = ""

    def apply_boundary_paths(self, ceiling_path: str, floor_path: str) -> None:
        self.paths["ceiling"] = ceiling_path
        self.paths["floor"] = floor_path
        for p in (ceiling_path, floor_path):
            self.worsen(_PATH_STATUS.get(p, "ok"))

    def worsen(self, status: str) -> None:
        if _STATUS_ORDER.index(status) < _STATUS_ORDER.index(self.status):
            self.status = status

    def to_dict(self) -> dict:
        out = {
            "id": self.item_id,
            "status": self.status,
            "paths": self.paths,
            "timings_ms": self.timings_ms,
        }
        out.update(self.metrics)
        if self.message:
            out["message"] = self.message
        return out


@dataclass
class RunReport:
    items: list[ItemReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(item.status != "error" for item in self.items)

    def aggregate(self) -> dict:
        agg: dict[str, float] = {"n": len(self.items)}
        agg["n_error"] = sum(1 for item in self.items if item.status == "error")
        for key in ("ce", "pe"):
            values = [item.metrics[key] for item in self.items if key in item.metrics]
            if values:
                agg[f"mean_{key}"] = sum(values) / len(values)
        return agg

    def to_dict(self) -> dict:
        return {
            "schema": "report/1",
            "items": [item.to_dict() for item in self.items],
            "aggregate": self.aggregate(),
        }


class Stopwatch:
    """Stage timer feeding an ItemReport's timings."""

    def __init__(self, report: ItemReport):
        self._report = report

    def time(self, stage: str, fn: Callable[[], T]) -> T:
        start = time.perf_counter()
        result = fn()
        self._report.timings_ms[stage] = (time.perf_counter() - start) * 1000.0
        return result


def process_items(
    item_ids: Sequence[str],
    worker: Callable[[str], ItemReport],
    threads: int = 1,
    strict: bool = False,
) -> RunReport:
    """Run a worker per item with per-item isolation, preserving input order.

    Exceptions become status="error" rows unless strict, in which case the
    first failure propagates.
    """

    def safe(item_id: str) -> ItemReport:
        try:
            return worker(item_id)
        except Exception as exc:
            if strict:
                raise
            report = ItemReport(item_id=item_id, status="error")
            report.message = f"{type(exc).__name__}: {exc}"
            return report

    if threads <= 1:
        items = [safe(i) for i in item_ids]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            items = list(pool.map(safe, item_ids))
    return RunReport(items=items)


def expand_inputs(patterns: Iterable[str], suffix: str = ".json") -> list[Path]:
    """Files from paths, directories, and glob patterns, in deterministic order."""
    out: list[Path] = []
    for pattern in patterns:
        path = Path(pattern)
        if path.is_dir():
            out.extend(sorted(path.glob(f"*{suffix}")))
        elif path.exists():
            out.append(path)
        else:
            matches = sorted(path.parent.glob(path.name))
            if not matches:
                raise FileNotFoundError(f"no input matches '{pattern}'")
            out.extend(matches)
    return out


def format_report_table(report: RunReport) -> str:
    """Plain-text table view of a run report."""
    header = f"{'id':<28} {'status':<16} {'ce':>8} {'pe':>8} {'ms':>8}"
    lines = [header, "-" * len(header)]
    for item in report.items:
        ce = f"{item.metrics['ce']:.4f}" if "ce" in item.metrics else "-"
        pe = f"{item.metrics['pe']:.4f}" if "pe" in item.metrics else "-"
        total_ms = sum(item.timings_ms.values())
        lines.append(f"{item.item_id:<28} {item.status:<16} {ce:>8} {pe:>8} {total_ms:>8.1f}")
    agg = report.aggregate()
    summary = ", ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in agg.items())
    lines.append(summary)
    for item in report.items:
        if item.message:
            lines.append(f"{item.item_id}: {item.message}")
    return "\n".join(lines)
