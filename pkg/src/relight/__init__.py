"""Illumination-aware image compositing in the intrinsic domain.

Images are decomposed as albedo times shading; compositing happens per layer,
the pasted foreground is re-shaded under a light model fitted to the
background, and optional parameterized edits harmonize the foreground albedo.
"""

from .bt import BTScores, PairwiseTally, bt_fit, ingest_responses, report
from .edits import (
    EditParams,
    EditSample,
    apply_color_curve,
    apply_edit_sequence,
    apply_exposure,
    apply_saturation,
    apply_white_balance,
    fit_edit_params,
    sample_random_edits,
)
from .image import (
    AlphaMask,
    DepthMap,
    FloatImage,
    composite,
    downsample_half,
    gradient_xy,
    linear_to_srgb,
    luminance,
    reconstruct,
    srgb_to_linear,
)
from .lighting import (
    FitOptions,
    FitReport,
    LightModel,
    NormalMap,
    fit_light_constrained,
    fit_light_lstsq,
    light_from_angles,
    normalize_normals,
    render_lambertian,
)
from .optim import AdamState, InsufficientDataError, adam_step, minimize, numeric_gradient
from .reshade import (
    PairSample,
    RefinerInput,
    Scene,
    build_refiner_input,
    generate_pair,
    harmonize,
    harmonize_report,
    identity_refiner,
    initial_composite_shading,
    loss_mse,
    loss_multiscale_gradient,
    loss_total,
    loss_total_grad,
    mean_relative_error,
    refine,
    smooth_refiner,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AlphaMask",
    "BTScores",
    "DepthMap",
    "EditParams",
    "EditSample",
    "FitOptions",
    "FitReport",
    "FloatImage",
    "InsufficientDataError",
    "LightModel",
    "NormalMap",
    "PairSample",
    "PairwiseTally",
    "RefinerInput",
    "Scene",
    "adam_step",
    "apply_color_curve",
    "apply_edit_sequence",
    "apply_exposure",
    "apply_saturation",
    "apply_white_balance",
    "bt_fit",
    "build_refiner_input",
    "composite",
    "downsample_half",
    "fit_edit_params",
    "fit_light_constrained",
    "fit_light_lstsq",
    "generate_pair",
    "gradient_xy",
    "harmonize",
    "harmonize_report",
    "identity_refiner",
    "ingest_responses",
    "initial_composite_shading",
    "light_from_angles",
    "linear_to_srgb",
    "loss_mse",
    "loss_multiscale_gradient",
    "loss_total",
    "loss_total_grad",
    "luminance",
    "mean_relative_error",
    "minimize",
    "normalize_normals",
    "numeric_gradient",
    "reconstruct",
    "refine",
    "render_lambertian",
    "report",
    "sample_random_edits",
    "smooth_refiner",
    "srgb_to_linear",
    "__version__",
]
