"""FHE-compatible activation strategies over an emulated leveled scheme.

The package implements three encrypted activation strategies (square,
Chebyshev-approximated ReLU, and exact ReLU via scheme switching), an
emulated SIMD homomorphic-arithmetic engine with exact depth and bootstrap
accounting, and an inference runner for LeNet-5 and ResNet-20 graphs.
"""

from .activations import (
    ActivationKind,
    ApproxReluConfig,
    identity,
    relu_approx,
    relu_switch,
    square,
)
from .cheb import ChebyshevSeries, cheb_eval_plain, cheb_interpolate, degree_sweep
from .errors import (
    CapacityError,
    ConfigError,
    DepthExhausted,
    FheactError,
    ParamsMismatch,
    ShapeMismatch,
    UnschedulableLayer,
    WeightFormatError,
)
from .he_core import GateCiphertext, HeContext, SimdCiphertext
from .ledger import OpLedger
from .netgraph import (
    BUILTINS,
    BootstrapPlan,
    CompiledNetwork,
    CostReport,
    LayerSpec,
    NetworkSpec,
    builtin_lenet5,
    builtin_resnet20,
    layer_depth_cost,
    plaintext_reference,
    plan_bootstraps,
    run_inference,
)
from .params import DEFAULT_COST_TABLE, SchemeParams, lenet_params, profile, resnet_params
from .weights import WeightStore, gen_fixtures, load_weights_csv, save_weights_csv

__version__ = "0.1.0"
