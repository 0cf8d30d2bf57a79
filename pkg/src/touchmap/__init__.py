"""Contact-geometry estimation for marker-based soft tactile sensors.

The pipeline turns simulated sensor images into contact estimates: a
deterministic marker-deformation simulator generates (image, contacts)
pairs, contacts are encoded as Gaussian heatmaps via Hertzian contact
geometry, a small U-Net learns image -> heatmap, and peak extraction
inverts heatmaps back to sub-pixel contact positions and depths.  A plain
regression CNN serves as the single-point baseline.
"""

from .codec import (
    PEAKS_CSV_HEADER,
    ContactPoint,
    GridMapping,
    HeatmapGrid,
    KernelParams,
    PeakDetection,
    depth_from_value,
    encode_heatmap,
    extract_peaks,
    format_peaks_csv,
    hertz_contact_radius,
    kernel_sigma,
    mm_to_px,
    px_to_mm,
    refine_subpixel,
)
from .config import RunConfig, load_run_config, run_config_from_dict
from .dataset import (
    DataView,
    build_dataset,
    concat_views,
    load_dataset,
    parse_scenario,
    split_dataset,
    subset,
)
from .engine import (
    AdamConfig,
    CnnBaseline,
    CnnBaselineSpec,
    Parameter,
    Tensor,
    UNet,
    UNetSpec,
    adam_step,
    build_from_state,
    cnn_baseline_forward,
    grad_check,
    no_grad,
    run_op_suite,
    unet_forward,
    zero_grads,
)
from .errors import (
    BadDtypeError,
    BadMagicError,
    ConfigError,
    DomainError,
    FormatError,
    MissingInputError,
    ShapeError,
    TouchmapError,
    TrainingError,
    TruncatedFileError,
)
from .evaluation import (
    EvalReport,
    MatchResult,
    MultiContactReport,
    TwoPointReport,
    compare_models,
    evaluate_single_point,
    match_peaks,
    multi_contact_eval,
    two_point_discrimination,
)
from .formats import (
    load_checkpoint,
    load_tensor,
    save_checkpoint,
    save_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
)
from .sim import (
    DUAL_SEPARATIONS_MM,
    TRIPLE_TIP_HEIGHTS_MM,
    SamplerConfig,
    SimConfig,
    displace_markers,
    dual_indenter_contacts,
    render_image,
    rest_marker_positions,
    sample_scenario,
    sample_single_contacts,
    triple_indenter_contacts,
)
from .training import (
    EvalParams,
    TrainConfig,
    TrainResult,
    predict_contacts,
    predict_contacts_batch,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "BadDtypeError",
    "BadMagicError",
    "CnnBaseline",
    "CnnBaselineSpec",
    "ConfigError",
    "ContactPoint",
    "DUAL_SEPARATIONS_MM",
    "DataView",
    "DomainError",
    "EvalParams",
    "EvalReport",
    "FormatError",
    "GridMapping",
    "HeatmapGrid",
    "KernelParams",
    "MatchResult",
    "MissingInputError",
    "MultiContactReport",
    "Parameter",
    "PeakDetection",
    "RunConfig",
    "SamplerConfig",
    "ShapeError",
    "SimConfig",
    "TRIPLE_TIP_HEIGHTS_MM",
    "Tensor",
    "TouchmapError",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "TruncatedFileError",
    "TwoPointReport",
    "UNet",
    "UNetSpec",
    "adam_step",
    "build_dataset",
    "build_from_state",
    "cnn_baseline_forward",
    "compare_models",
    "concat_views",
    "depth_from_value",
    "displace_markers",
    "dual_indenter_contacts",
    "encode_heatmap",
    "evaluate_single_point",
    "extract_peaks",
    "format_peaks_csv",
    "grad_check",
    "hertz_contact_radius",
    "kernel_sigma",
    "load_checkpoint",
    "load_dataset",
    "load_run_config",
    "load_tensor",
    "match_peaks",
    "mm_to_px",
    "multi_contact_eval",
    "no_grad",
    "parse_scenario",
    "predict_contacts",
    "predict_contacts_batch",
    "px_to_mm",
    "refine_subpixel",
    "render_image",
    "rest_marker_positions",
    "run_config_from_dict",
    "run_op_suite",
    "sample_scenario",
    "sample_single_contacts",
    "save_checkpoint",
    "save_tensor",
    "split_dataset",
    "subset",
    "tensor_from_bytes",
    "tensor_to_bytes",
    "train",
    "triple_indenter_contacts",
    "two_point_discrimination",
    "unet_forward",
    "zero_grads",
]
