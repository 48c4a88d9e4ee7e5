"""Vehicle presence per lane block from grayscale traffic video.

No background subtraction, no tracking: texture features are extracted per
detection block, a two-class Gaussian mixture is learned unsupervised
(K-means seed, batch EM, then continual online EM), and a Bayes discriminant
turns each block into an occupied/free decision. Queue length is the run of
occupied blocks at the stop line.
"""

from .classifier import (
    AmbiguousTagsError,
    ClassDecision,
    UntaggedModelError,
    assign_class_tags,
    classify,
    discriminant,
    posterior,
)
from .clustering import DegenerateDataError, KmeansResult, kmeans
from .features import (
    EDGE_KERNELS,
    FEATURE_SYMBOLS,
    DegenerateClassesError,
    EdgeKernel,
    FeatureParams,
    Histogram,
    edge_fraction,
    entropy,
    extract_features,
    first_moment,
    fisher_score,
    format_feature_vector,
    max_local_entropy,
    nonzero_bin_rate,
    parse_feature_vector,
    quantize_histogram,
    second_moment_normalized,
)
from .frameio import read_pgm, read_pgm_dir, read_raw_frames, write_pgm
from .geometry import (
    BlockRect,
    LaneConfigError,
    LaneLayout,
    LaneValidationError,
    RasterizationError,
    parse_lane_config,
    rasterize_blocks,
)
from .gmm import (
    CLASS_LANE,
    CLASS_UNASSIGNED,
    CLASS_VEHICLE,
    ComponentCollapseError,
    GaussianComponent,
    GmmModel,
    e_step,
    fit_em,
    load_model,
    log_density,
    m_step,
    mean_log_likelihood,
    model_from_dict,
    model_to_dict,
    online_update,
    save_model,
)
from .pipeline import (
    BlockObservation,
    Detector,
    DetectorParams,
    Frame,
    LaneStatus,
    StreamError,
    TrafficStatusReport,
    format_report,
    ingest,
    parse_report,
    queue_length,
)

__version__ = "0.1.0"
