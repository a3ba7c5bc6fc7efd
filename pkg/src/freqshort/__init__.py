"""Frequency-shortcut analysis for image classifiers.

A classifier can learn to recognize a class from a small subset of Fourier
spectrum frequencies. This package searches for those subsets per class
(coarse-to-fine over spectrum patches), represents them as binary dominant
frequency maps, quantifies how strongly a model leans on them via
TPR-threshold grouping, and compares shortcut vs non-shortcut class
performance across in- and out-of-distribution test sets.
"""

from .errors import (
    ConfigurationError,
    DataError,
    FreqshortError,
    RemoteEndpointError,
    SamplingError,
)
from .spectral import (
    FrequencyMask,
    ImageTensor,
    filter_batch,
    filter_image,
    forward_spectrum,
    inverse_spectrum,
    mask_union,
)
from .patches import (
    PatchPosition,
    SearchConfig,
    StagePlan,
    build_grid,
    eligible_patches,
    intersecting_patches,
    sample_subset,
)
from .models import (
    ClassifierEndpoint,
    NormalizationRecipe,
    PixelLinearClassifier,
    SpectralLinearClassifier,
    class_losses,
    class_tpr,
    predict_logits,
    reference_pixel_classifier,
)
from .datasets import (
    LabeledDataset,
    PlantedClass,
    PlantedSpec,
    add_level_pair,
    build_planted_oracle,
    generate_planted,
    load_folder_dataset,
    make_band_spec,
    recovery_score,
    rendition_variant,
    save_dataset_tree,
    texture_variant,
)
from .search import (
    CandidateRecord,
    DFMSet,
    SearchTrace,
    run_refinement_stage,
    run_search,
    run_stage_one,
    sample_mask_lineage,
    select_eval_subset,
)
from .metrics import (
    DEFAULT_THRESHOLDS,
    ShortcutReport,
    group_and_average,
    shortcut_class_counts,
)
from .harness import (
    EvaluationDataset,
    EvaluationRun,
    compare_groups,
    evaluate_datasets,
)
from .dfmfile import read_dfms, write_dfms
from .presets import available_presets, load_config, preset, save_config

__version__ = "0.1.0"
