"""Rate-distortion computation and adaptive random-codebook simulation.

Submodules:
  probability - distributions, types, entropy/divergence primitives
  rd          - Blahut-Arimoto rate-distortion solver and diagnostics
  stream      - deterministic counter-based uniform streams
  codebooks   - codeword sampling laws and annealing schedules
  engine      - the adaptive encoder/decoder loop
  harness     - experiment drivers, config parsing, artifact output
  cli         - the `nts-lab` command-line interface
"""

__version__ = "0.1.0"

from .probability import (  # noqa: E402,F401
    Distribution,
    TypeDistribution,
    binary_entropy,
    empirical_type,
    entropy,
    enumerate_types,
    kl_divergence,
    log_type_class_size,
    make_distribution,
    num_types,
    point_mass,
    uniform_distribution,
)
from .rd import (  # noqa: E402,F401
    ConvergenceTrace,
    DistortionMeasure,
    RDPoint,
    TestChannel,
    ba_fixed_slope_step,
    d_max,
    hamming,
    mismatched_rate,
    rdf_curve,
    solve_at_distortion,
    solve_fixed_slope,
)
from .codebooks import (  # noqa: E402,F401
    AnnealSchedule,
    IIDCodebook,
    TypeMixtureCodebook,
    UniformTypeCodebook,
    anneal_model,
    codeword_log_prob,
    sample_codeword,
    sample_codewords,
    type_law,
)
from .engine import (  # noqa: E402,F401
    BlockAverageUpdate,
    CodecState,
    HardUpdate,
    NtsConfig,
    SessionTrace,
    SmoothedUpdate,
    SyncError,
    d_match_search,
    decode_word,
    encode_word,
    initial_state,
    run_session,
)
from .harness import (  # noqa: E402,F401
    ConfigError,
    ExperimentConfig,
    RunManifest,
    SolverError,
    parse_config,
    run_explore_compare,
    run_nts,
    run_rdf,
    run_redundancy_sweep,
)
