"""Order-aware text segmentation labels, fiducial points and a
differentiable thin-plate-spline rectifier for irregular scene text."""

from .detect import (
    ComponentLabeling,
    DetectedInstance,
    connected_components,
    instance_polygon,
    match_head_tail,
    overlay_classes,
    polygon_iou,
)
from .fiducials import (
    BandRegion,
    FiducialConfig,
    FiducialSet,
    band_fiducial,
    band_pixels,
    corner_fiducials,
    generate_fiducials,
)
from .geom import (
    BoundaryChains,
    CornerEstimationConfig,
    PolygonAnnotation,
    annotate,
    identify_corners,
    interior_angle,
    min_edge_len,
    split_chains,
)
from .labels import (
    BandWidthConfig,
    GeometryMaps,
    RegionClass,
    ScoreMaps,
    deserialize_labels,
    gen_geometry_maps,
    gen_labels,
    gen_score_maps,
    serialize_labels,
)
from .losses import (
    LossWeights,
    ScheduleConfig,
    dice_loss,
    loss_schedule,
    regression_losses,
    smooth_l1,
    total_loss,
)
from .tps import (
    DestLayout,
    RegionGrid,
    TpsTransform,
    WarpGradients,
    dest_points,
    scatter_point_grads,
    tps_fit,
    warp,
    warp_backward,
)

__version__ = "0.1.0"
