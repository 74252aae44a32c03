"""walklab: random walks on finitely generated groups and lattice exit labs.

Group models with canonical element encodings, sparse measures and their
convolution calculus, truncated Green-function tables with Martin kernels
and deviation statistics, Martin-limit extraction of positive harmonic
candidates, and exact discrete Dirichlet solves for exit measures on grid
domains.  The ``walklab`` CLI packages these into reproducible scenarios.
"""

from .errors import (
    InsufficientTruncationError,
    ModelMismatchError,
    NumericError,
    RecurrentWalkError,
    ResourceBudgetError,
    UsageError,
    WalklabError,
)
from .groups import (
    BaumslagSolitarGroup,
    DirectProductGroup,
    FiniteGroup,
    FreeAbelianGroup,
    FreeGroup,
    GroupElement,
    GroupModel,
    HeisenbergGroup,
    LamplighterGroup,
    WordBall,
    growth_rate,
    inv,
    model_from_spec,
    mul,
    word_ball,
    word_balls,
)
from .measures import (
    ConvolutionPower,
    Measure,
    convolve,
    lazy,
    make_measure,
    measure_from_spec,
    nondegenerate,
    power,
    spectral_radius,
    srw,
    translate,
)
from .potential import (
    DeviationStat,
    Estimate,
    GreenCalculator,
    GreenValue,
    MetricBall,
)
from .harmonic import (
    Classification,
    MartinDiagnostics,
    ObstructionReport,
    WindowFunction,
    classify,
    harmonic_residual,
    martin_limit,
    obstruction_report,
    product_identity_check,
)
from . import gridlab

__version__ = "0.1.0"

__all__ = [
    "BaumslagSolitarGroup",
    "Classification",
    "ConvolutionPower",
    "DeviationStat",
    "DirectProductGroup",
    "Estimate",
    "FiniteGroup",
    "FreeAbelianGroup",
    "FreeGroup",
    "GreenCalculator",
    "GreenValue",
    "GroupElement",
    "GroupModel",
    "HeisenbergGroup",
    "InsufficientTruncationError",
    "LamplighterGroup",
    "MartinDiagnostics",
    "Measure",
    "MetricBall",
    "ModelMismatchError",
    "NumericError",
    "ObstructionReport",
    "RecurrentWalkError",
    "ResourceBudgetError",
    "UsageError",
    "WalklabError",
    "WindowFunction",
    "WordBall",
    "classify",
    "convolve",
    "gridlab",
    "growth_rate",
    "harmonic_residual",
    "inv",
    "lazy",
    "make_measure",
    "martin_limit",
    "measure_from_spec",
    "model_from_spec",
    "mul",
    "nondegenerate",
    "obstruction_report",
    "power",
    "product_identity_check",
    "spectral_radius",
    "srw",
    "translate",
    "word_ball",
    "word_balls",
]
