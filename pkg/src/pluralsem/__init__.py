"""Singular-to-plural semantic prediction and audio form-to-meaning tools.

The package covers the full path from audio manifests to evaluation: corpus
loading, two plural conceptualizers (class-average shifts and a global
linear map), chunk-based acoustic summary features, linear form-to-meaning
mapping, stratified cross-validation over interchangeable gold semantic
spaces, and distance-structure studies between word forms and meanings.
"""

__version__ = "0.1.0"

from .errors import (
    AudioReadFailure,
    ChunkTooShort,
    DanglingTypeReference,
    DimensionMismatch,
    DuplicateId,
    EmptySignal,
    EmptyTrainingSet,
    InvalidCounts,
    InvalidSpec,
    IoFailure,
    LengthMismatch,
    MalformedRow,
    NoUsableTokens,
    NonFiniteInput,
    PluralsemError,
    ShapeMismatch,
    TooFewTypes,
    TooManyChunks,
    TypeTooRare,
    UnknownTarget,
    UnparsableFloat,
)
from .conceptualize import (
    FracssMap,
    SemanticPair,
    ShiftTable,
    decompose,
    fit_cca,
    fit_fracss,
    fit_fracss_from_pairs,
    pairs_from_types,
    predict_cca,
    predict_fracss,
)
from .corpus import (
    PLURAL,
    SINGULAR,
    AudioToken,
    Corpus,
    EmbeddingTable,
    LexemeGroups,
    WordType,
    embeddings_by_type,
    load_embeddings,
    load_manifest,
    pair_lexemes,
    write_manifest,
)
from .crossval import (
    GOLD_SPACES,
    FoldPlan,
    FoldResult,
    GoldSpace,
    build_gold_space,
    cross_gold_eval,
    load_fold_plan,
    make_folds,
    permutation_control,
    run_fold,
    save_fold_plan,
    summarize_folds,
)
from .evaluate import (
    EvalReport,
    GoldIndex,
    NumberConfusion,
    ProportionComparison,
    evaluate_predictions,
    group_accuracy,
    number_confusion,
    predicted_types,
    rank_candidates,
    target_ranks,
    top_n_accuracy,
    two_proportion_test,
    weighted_f1,
    write_report,
)
from .features import (
    CfbsfConfig,
    CfbsfVector,
    FormMatrix,
    amplitude_envelope,
    band_correlations,
    band_summary,
    build_form_matrix,
    chunk_boundaries,
    extract,
    extract_waveform,
    load_features,
    mel_log_spectrogram,
    save_features,
    split_chunks,
)
from .isomorphy import (
    AudioPhoneReport,
    DistanceStudyReport,
    SpaceCorrelation,
    ZeroVectorWarning,
    audio_study,
    audio_vs_phone,
    correlation_significance,
    cosine_distance,
    damerau_levenshtein,
    phone_study,
    write_audio_phone_csv,
    write_study_csv,
)
from .linmap import (
    LinearMap,
    load_map,
    predict,
    save_map,
    solve_grouped,
    solve_least_squares,
)
from .synth import SynthResult, SynthSpec, generate
