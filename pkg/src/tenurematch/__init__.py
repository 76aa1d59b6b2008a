"""Dynamic school choice with tenured positions.

Teachers hold multi-school assignments chosen by substitutable
preferences; schools rank teachers and have quotas; the inherited
matching of each period constrains the next one. The package implements
the tenure-respecting deferred acceptance mechanism, its efficiency-
improving reapplication variant, stability and efficiency audits,
exhaustive and random report domains, and a manipulation search over
multi-period economies.
"""

from .audit import (
    Claim,
    ClaimKind,
    ENUM_MAX_SCHOOLS,
    ENUM_MAX_TEACHERS,
    StabilityVerdict,
    blair_dominates_weakly,
    count_matchings_closed_form,
    enumerate_dynamically_stable,
    enumerate_matchings,
    find_claims,
    is_blair_efficient,
    is_dynamically_rational,
    is_dynamically_stable,
    is_individually_rational,
    is_nonwasteful,
    is_statically_stable,
    minimality_of_unjustified_claims,
    unjustified_claim_pairs,
)
from .da import (
    DaStep,
    DaTrace,
    InterrupterPair,
    StaticProblem,
    detect_interrupters,
    find_interrupter_pairs,
    run_da,
)
from .domains import (
    EXHAUSTIVE_MAX_SCHOOLS,
    canonical_preference,
    enumerate_path_independent,
    enumerate_substitutable_preferences,
    order_signatures,
    random_choice_function,
    random_substitutable_preference,
)
from .dynamic import (
    DynamicProblem,
    run_cohort_da,
    run_trda,
    validate_problem,
)
from .economy import (
    EXHAUSTIVE,
    Economy,
    ManipulationCertificate,
    ManipulationFinding,
    Obviousness,
    OptionSet,
    PeriodOutcome,
    PeriodSpec,
    find_dynamic_manipulations,
    find_obvious_manipulations,
    option_set,
    simulate,
    simulate_detailed,
)
from .errors import (
    DomainTooLarge,
    InvalidProblem,
    NotLexicographicByTenure,
    NotStableInput,
    QuotaExceededByTenure,
    SubstitutabilityViolation,
    TenureMatchError,
    UnknownAgent,
)
from .model import (
    BlairOrdering,
    ChoiceFunction,
    MAX_SCHOOLS,
    Matching,
    SchoolId,
    SubsetPreference,
    TeacherId,
    ValidationReport,
    Violation,
    blair_compare,
    choose,
    empty_matching,
    induce_choice,
    s_truncate,
    school_set,
    set_labels,
    set_members,
    subsets_of,
    validate_choice_function,
    validate_matching,
    weakly_improves,
)
from .priority import (
    DerivedPriorityProfile,
    PriorityProfile,
    derive_priorities,
    first_cohort_inversion,
    is_lexicographic_by_tenure,
    validate_priority_consistency,
)
from .scenario import (
    ParseError,
    SCHEMA_VERSION,
    ScenarioDocument,
    SchemaVersionMismatch,
    ValidationError,
    emit_scenario,
    emit_trace,
    parse_document,
    parse_scenario,
)
from .sweeps import (
    SweepViolation,
    grid_problems,
    manipulation_structures,
    obvious_manipulation_search,
    random_problem,
    tenure_economies,
)
from .treada import (
    ConsentProfile,
    TreadaLog,
    TreadaRound,
    run_treada,
)

__all__ = [name for name in dir() if not name.startswith("_")]
