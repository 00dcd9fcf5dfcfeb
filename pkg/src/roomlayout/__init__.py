"""Room-layout toolkit: flat-representation codec, DP decoding, rectification,
synthetic ground truth, evaluation metrics, and piecewise-planar 3D export."""

from .decode import (
    BoundaryResult,
    CandidateSets,
    DecodeResult,
    DecoderConfig,
    DpResult,
    DpTable,
    WallPeaks,
    build_candidate_sets,
    decode,
    decode_boundary,
    dp_fit,
    find_wall_peaks,
    smooth,
)
from .detect import DetectorConfig, detect_segments
from .flat import (
    FlatRepr,
    LossReport,
    SENTINEL_CEILING,
    SENTINEL_FLOOR,
    WALL_DECAY,
    bce_loss,
    encode,
    loss_report,
    masked_boundary_loss,
    poly_lr_factor,
)
from .layout import (
    ImageGeometry,
    LabelMap,
    LayoutAnnotation,
    Point2,
    boundary_y_at,
    rasterize,
)
from .metrics import CornerError, PixelError, corner_error, pixel_error
from .pipeline import PipelineConfig, RunReport
from .reconstruct import (
    CameraModel,
    RoomMesh,
    WorldPoint,
    default_focal,
    export_obj,
    lift_layout,
    parse_obj_vertices,
    pick_right_angle_triple,
    project,
    solve_focal,
)
from .rectify import (
    CornerSets,
    Homography,
    LineSegment,
    RansacConfig,
    VanishingPoint,
    apply_homography,
    backproject_corners,
    build_rectifying_homography,
    filter_vertical,
    ransac_vpz,
    rectify_points,
    warp_image,
)
from .synth import SynthConfig, SynthSample, perturb, sample_room

__version__ = "0.1.0"
