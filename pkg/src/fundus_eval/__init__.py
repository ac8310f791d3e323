"""Evaluation toolkit for diabetic retinopathy screening classifiers."""

__version__ = "0.1.0"

from .errors import (
    DegenerateClasses,
    DegenerateMarginals,
    DegenerateReplicates,
    EmptyClass,
    EmptyMatrix,
    EmptyPatient,
    FatalFormat,
    FundusEvalError,
    InfeasibleSplit,
    InvalidBox,
    InvariantError,
    MissingGrade,
    NoFundusDetected,
    RangeError,
    UnassignedRecord,
    UngradableForSystem,
    Unattainable,
)
from .grading import (
    ClassLabel,
    Diagnostic,
    GradeRecord,
    GradingSystem,
    derive_class,
    map_messidor,
    parse_manifest,
    parse_messidor,
    records_for_system,
    serialize_manifest,
)
from .metrics import (
    ConfusionMatrix,
    Interval,
    RocCurve,
    ScoreSet,
    accuracy,
    auc,
    binary_rates,
    clopper_pearson,
    cluster_bootstrap_auc,
    confusion,
    macro_roc,
    parse_scores,
    quadratic_weighted_kappa,
    roc_curve,
    serialize_scores,
)
from .splitting import (
    DistributionTable,
    SplitAssignment,
    SplitSpec,
    parse_split,
    patient_stratum,
    serialize_split,
    split,
    split_table,
)
from .preprocessing import (
    CropBox,
    PRESET_SIZES,
    PreprocessReport,
    crop_resize,
    detect_fundus_square,
    resize_bicubic,
    run_preprocess,
)
from .evaluation import (
    BinaryReport,
    MulticlassReport,
    OperatingPoint,
    evaluate_binary,
    evaluate_multiclass,
    select_operating_point,
)
from .rendering import write_report_files
from .synth import (
    BinormalSpec,
    PopulationSpec,
    binormal_mu,
    gen_binary_scores,
    gen_fundus_image,
    gen_ordinal_scores,
    gen_population,
    preset_population,
    scores_for_manifest,
)
