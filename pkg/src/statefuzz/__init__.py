"""Coverage-guided fuzzing of simulated stateful protocol servers.

The package compares state-selection schedulers: flat response-code state
machines with random / round-robin / favor-score selection, and a
response-sequence tree scheduler that treats state and seed choice as a
bandit problem. Targets are deterministic in-process server simulations
instrumented for branch coverage; the shipped harness is a small FTP
server with a glob pattern engine.
"""

from .campaign import (
    ALGORITHMS,
    CampaignConfig,
    TrialReport,
    compare_reports,
    run_campaign,
    run_trial,
    trial_seed,
)
from .coverage import CoverageMap, VirginMap, coverage_percent, merge_and_classify
from .errors import (
    ConfigurationError,
    CorpusFormatError,
    EmptyCorpusError,
    StateFuzzError,
    StateMismatchError,
)
from .mcts import (
    ExpandResult,
    SimulationNode,
    Tree,
    TreeEngine,
    TreeNode,
    UctParams,
    audit,
    backpropagate,
    expand,
    iter_nodes,
    select_path,
    select_seed,
    uct,
)
from .mutation import MutationConfig, MutationScope, load_dictionary, mutate
from .protocol import (
    DUMMY_CODE,
    Message,
    Origin,
    RegionSplit,
    RequestSequence,
    ResponseSequence,
    decode_framed,
    decode_text,
    encode_framed,
    encode_text,
    load_corpus,
    split_regions,
)
from .state_machine import (
    FlatEngine,
    SeedEntry,
    StateMachineModel,
    StateRecord,
    target_prefix_for,
)
from .stats import (
    ConfidenceInterval,
    WelchResult,
    confidence_interval_95,
    t_cdf,
    t_ppf,
    t_sf,
    welch_t_test,
)
from .sut import ExecutionResult, execute, get_harness, list_glob_cases

__version__ = "0.1.0"
