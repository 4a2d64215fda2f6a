"""Weak-compressibility experiments for i.i.d. sources over the naturals.

Pmfs and divergences, sequential coding measures with mixtures, countable
class quantizations, the trap indicator with its Monte-Carlo harness,
percentile/premium schemes, falsification suites for the supporting
inequalities, and a deterministic experiment CLI (``dwc-lab``).
"""

__version__ = "0.1.0"

from .pmf import (  # noqa: F401
    Pmf, kl, kl_partial_sums, j_divergence, l1, percentile, entropy,
    tail_mass, uniform_pmf, point_mass, harmonic_pmf, zipf_two_pmf,
    geometric_half_pmf, block_split_pmf, mix,
)
from .sources import (  # noqa: F401
    Uniform, BMember, BZERO, BZero, IMember, MonotonePmf, MhMember, FhMember,
    Contaminated, SourceSpec, make_pmf, sample, SampleStream, sample_array,
    mh_catalog, spec_to_json, spec_from_json, t_block,
)
from .codes import (  # noqa: F401
    SequentialMeasure, IIDMeasure, KnownSupportCode, PatternCode,
    BlockEscapeCode, MixtureMeasure, iid_measure, known_support_code,
    pattern_code, mixture, bound_mh, codelength, codelength_trace,
    redundancy, RedundancyReport, index_weight, index_penalty_bits,
)
from .quantize import (  # noqa: F401
    Centroid, Quantization, RefineRule, DEFAULT_RULE, finite_alphabet_rule,
    uniform_class_quantization, b_class_quantization, fh_class_quantization,
    j_uniform,
)
from .dwc import (  # noqa: F401
    IndicatorState, capture_candidates, refine, phi_step, run_phi, sc_phi,
    ThresholdIndicator, premature_probability, PrematureReport, PhiOutcome,
    b_class_adversary, AdversaryReport, trap_budget,
)
from .insure import (  # noqa: F401
    PercentileScheme, percentile_scheme, premium, AnalyticPercentileScheme,
    i_class_scheme, run_insurance, InsuranceReport, relationship_demos,
)
from .bounds import (  # noqa: F401
    BoundReport, run_bounds_suite,
)
from .experiments import (  # noqa: F401
    ExperimentConfig, ExperimentReport, ConfigError, config_from_json,
    run, emit,
)
