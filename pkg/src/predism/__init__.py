"""predism: per-building damage forecasting for hypothetical natural hazards.

Pre-disaster imagery plus building footprints go in; per-building damage
levels at analyst-chosen hazard intensities come out, as GeoJSON and PNG
damage maps.
"""

from .backbones import (
    BackboneRegistry,
    HttpBackbone,
    ReferenceOrdinalBackbone,
    ReferenceSoftmaxBackbone,
    SubprocessBackbone,
    ensemble_predict,
    route,
)
from .damagemap import (
    PALETTE,
    DamageMap,
    DamageModel,
    EvalReport,
    evaluate,
    predict_scene,
    render_png,
    sweep,
    to_geojson,
)
from .dataset import (
    DISASTER_TYPES,
    DamageClass,
    EventCatalog,
    LabeledBuilding,
    build_catalog,
    class_to_level,
    filter_training,
    parse_label_file,
    split,
)
from .features import extract_features, meta_vector
from .hazard import (
    HazardAttributes,
    ThresholdTable,
    attribute_levels,
    load_thresholds,
    overall_level,
    score_attribute,
)
from .heads import (
    OrdinalHead,
    SoftmaxHead,
    classify,
    cross_entropy,
    default_ordinal_head,
    default_softmax_head,
    neutral_ordinal_head,
    ordinal_cross_entropy,
    ordinal_probs,
    softmax,
)
from .rastergeom import (
    Chip,
    ChipSet,
    Footprint,
    GeoBounds,
    Scene,
    chip_set,
    extract_chip,
    parse_wkt,
    rasterize,
)
from .training import TrainConfig, TrainingSet, train

__version__ = "0.1.0"
