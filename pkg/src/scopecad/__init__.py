"""Real-time virtual-microscope mosaicking and lesion-overlay engine."""

from .errors import (
    BackendFailure,
    CanvasLimitExceeded,
    Degenerate,
    DidNotConverge,
    DimensionMismatch,
    InsufficientMatches,
    MissingGroundTruth,
    NoConsensus,
    NoOverlap,
    OutOfBounds,
    ScopeCadError,
    TooSmall,
    UnsupportedChannels,
    ViewportLargerThanSlide,
)
from .extend import ExtendedFrame, crop_back, extend_frame
from .features import FeatureConfig, Keypoint, detect_and_describe, match_and_estimate
from .metrics import (
    ComponentSet,
    LesionMatchReport,
    MetricsReport,
    connected_components,
    lesion_metrics,
    match_lesions,
    pixel_metrics,
)
from .mosaic import (
    MosaicCanvas,
    Placement,
    compose_lesion_map,
    mosaic_window,
    place_frame,
    placement_iou,
)
from .pipeline import (
    PipelineOutputs,
    Session,
    SessionConfig,
    run_edge_sweep,
    run_mosaic_experiment,
)
from .raster import Rect, crop_region, load_png, resample, save_png, to_luminance
from .registration import (
    AffineConfig,
    AffineResult,
    CorrelationSurface,
    Displacement,
    RegistrationConfig,
    RegistrationResult,
    affine_register,
    cross_power_surface,
    overlap_mad,
    register_translation,
    resolve_translation,
    warp_affine,
)
from .segment import (
    ExternalBackend,
    OracleBackend,
    ThresholdBackend,
    oracle_segment,
    render_overlay,
    segment,
    segment_extended,
    threshold_segment,
)
from .slidesim import (
    FrameEvent,
    VirtualSlide,
    generate_path_frames,
    rolling_shutter_distort,
    synthetic_slide,
    viewport_frame,
)

__version__ = "0.1.0"
