"""No-signalling correlations and the sequential hat-guessing game.

Four layers:

* ``core``: finite scenarios, finitely supported distributions,
  marginalization (push-forward), Dirac points, convex combinations.
* ``nosignalling``: empirical models, the pairwise marginal-consistency
  check and its single-flip variant, hidden-variable (local) models,
  per-party-input functions, and a locality decision with certificates.
* ``hatgame`` / ``concentration``: a streaming hat-game simulator with the
  representative-based strategies computable on eventually-zero inputs, plus
  exact enumeration oracles and deviation-bound verification.
* ``harness``: a referee/worker socket protocol that enforces the
  no-communication rule by topology.
"""

from .core import (
    PROB_ATOL,
    BellScenario,
    FiniteDist,
    JointAssignment,
    agreement_parties,
    convex_combination,
    dirac,
    marginalize,
    max_deviation,
    restrict,
    truncate_countable,
)
from .errors import (
    BellhatError,
    CapacityError,
    ConfigError,
    ContractError,
    DomainError,
    HarnessAbort,
    ProtocolError,
    ValidationError,
)
from .nosignalling import (
    EmpiricalModel,
    HiddenVariableMeasure,
    JointFunction,
    ResponseFunction,
    agreement_set,
    all_response_functions,
    extract_hat_function,
    functional_ns_check,
    is_local,
    is_no_signalling,
    is_no_signalling_fast,
    local_model,
    mix_models,
    model_deviation,
    model_of,
    pr_box,
)
from .hatgame import (
    HatInput,
    InputSampler,
    RunStats,
    StrategySpec,
    bind_strategy,
    guess,
    parse_sampler,
    parse_strategy,
    repeat_runs,
    run_game,
    sample_input,
    sample_mixture_index,
)
from .concentration import (
    AzumaQuery,
    azuma_bound,
    exact_expected_wins,
    tail_loss_census,
    verify_concentration,
    win_set,
)

__version__ = "0.1.0"

__all__ = [
    "PROB_ATOL",
    "BellScenario",
    "FiniteDist",
    "JointAssignment",
    "agreement_parties",
    "convex_combination",
    "dirac",
    "marginalize",
    "max_deviation",
    "restrict",
    "truncate_countable",
    "BellhatError",
    "CapacityError",
    "ConfigError",
    "ContractError",
    "DomainError",
    "HarnessAbort",
    "ProtocolError",
    "ValidationError",
    "EmpiricalModel",
    "HiddenVariableMeasure",
    "JointFunction",
    "ResponseFunction",
    "agreement_set",
    "all_response_functions",
    "extract_hat_function",
    "functional_ns_check",
    "is_local",
    "is_no_signalling",
    "is_no_signalling_fast",
    "local_model",
    "mix_models",
    "model_deviation",
    "model_of",
    "pr_box",
    "HatInput",
    "InputSampler",
    "RunStats",
    "StrategySpec",
    "bind_strategy",
    "guess",
    "parse_sampler",
    "parse_strategy",
    "repeat_runs",
    "run_game",
    "sample_input",
    "sample_mixture_index",
    "AzumaQuery",
    "azuma_bound",
    "exact_expected_wins",
    "tail_loss_census",
    "verify_concentration",
    "win_set",
    "__version__",
]
