"""wildprep: deterministic dataset preparation for class-per-directory photo
corpora — k-means color segmentation, label denoising, geometric
augmentation, class balancing, stratified splitting, and k-fold planning,
all reproducible from a single seed."""

from .augment import (
    AugmentChain,
    AugmentOp,
    AugmentPolicy,
    apply_chain,
    apply_op,
    flip_h,
    flip_v,
    rotate_angle,
    rotate_right_angle,
    sample_chain,
    zoom,
)
from .config import PipelineConfig, read_config_file
from .dataset import (
    CLASS_NAMES,
    DatasetManifest,
    FoldPlan,
    SampleRecord,
    apply_fold_plan,
    balance,
    class_index,
    ingest,
    kfold_plan,
    preprocess_all,
    read_manifest,
    stratified_split,
    write_manifest,
)
from .errors import (
    ConfigError,
    ImageLoadError,
    ImageSaveError,
    ManifestError,
    SegmentationError,
    WildprepError,
)
from .imaging import RasterImage, load_image, resize, save_image
from .segmentation import (
    KMeansConfig,
    KMeansModel,
    LabelMap,
    assign_labels,
    denoise_labels,
    inertia,
    kmeans_fit,
    recolor,
    segment_image,
)

__version__ = "0.1.0"
