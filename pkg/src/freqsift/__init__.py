"""freqsift: minimal sufficient / delta-complete frequency subsets of audio
signals for black-box classifiers, and whether those subsets transfer their
classification across other models."""

__version__ = "0.1.0"

from .composition import CompositeSignature, TransplantResult, compose_global, cross_label_transplant
from .errors import (
    BackendError,
    DegenerateInputError,
    FreqsiftError,
    IncompatibleModelsError,
    InvalidInputError,
    InvalidParameterError,
    SearchNotFoundError,
    TooShortError,
    UndefinedEntropyError,
    UndefinedInverseError,
    UnsupportedConfigurationError,
)
from .metrics import (
    MannWhitneyResult,
    PsdEstimate,
    levenshtein,
    levenshtein_ratio,
    mann_whitney_u,
    psd,
    spectral_entropy,
    stoi,
)
from .oracle import (
    BandEnergySpec,
    ClassDistribution,
    ClassifierHandle,
    OracleFailure,
    TemplateSpec,
    build_registry,
    classify,
    classify_batch,
    shannon_entropy,
    top1,
)
from .protocol import connect_external
from .search import (
    CompletenessResult,
    SearchBudget,
    SufficiencyResult,
    exhaustive_minimal,
    find_complete,
    find_sufficient,
    inverse_signal,
    mask_from_json,
    mask_to_json,
    verify_sufficient,
)
from .signal import (
    Fill,
    FrequencyMask,
    Signal,
    Spectrum,
    apply_mask,
    forward_fft,
    inverse_fft,
    istft,
    reconstruct,
    stft,
)
from .transfer import (
    TransferMatrix,
    TransferReport,
    TransferVerdict,
    TTestResult,
    assess_transfer,
    paired_t_test,
    report_from_distributions,
    transfer_matrix,
)
from .wavio import read_wav, write_wav
