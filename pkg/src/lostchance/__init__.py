"""Compensation engine for lost-chance claims.

A claim is modelled as a pair of distributions over a shared outcome
space: the counterfactual world (duty honoured) and the factual world
(duty breached).  The engine joins the two worlds with a coupling,
conditions on an information policy, and converts the conditional value
gap into a compensation schedule under a clamped or fair-mean indemnity.
Lost-choice claims add an explicit choice layer that is flattened onto
the same machinery.
"""

from .casefile import LoadedCase, SCHEMA_TEXT, dump_case, load_case, save_case
from .choice import (
    MATOS_CONSOLATION,
    MATOS_FACTUAL_TOP_CHANCE,
    MATOS_GUARANTEED,
    MATOS_TOP,
    ChoiceCaseModel,
    DualCaseModel,
    best_dutiful_choice,
    evaluate_choice_case,
    flatten_choice_case,
    matos_award,
    matos_threshold,
    mitigation_offset,
    presume_choice_ii_cp,
    presume_choice_it_cp,
    validate_choice_case,
    vk_factorize,
)
from .coupling import (
    Coupling,
    comonotone_matrix,
    coupling_from_map,
    evidence_coupling,
    independence_coupling,
    least_divergence_coupling,
    oracle_min_cost,
    transport_cost,
)
from .outcome import (
    CaseModel,
    CaseValidationError,
    CurveMoneyMap,
    DiscreteDistribution,
    IdentityMoneyMap,
    OutcomeSpace,
    TabulatedMoneyMap,
    UtilityCurve,
    award_from_compensation,
    money_equivalent,
    utility_value,
    validate_case,
)
from .scenarios import (
    MATOS_BAND_EDGES,
    RejectedFormulaComparison,
    Scenario,
    matos_band,
    matos_case,
    matos_sweep,
    medical_malpractice,
    medical_sweep,
    prize_case,
    rejected_formula_comparison,
    urn_independent,
    urn_painted,
)
from .tables import TableCell, reproduce_table
from .valuation import (
    CompensationSchedule,
    ConfigurationError,
    GapTable,
    PolicyCombo,
    cc_indemnity,
    conditional_gap,
    evaluate_policy,
    fm_indemnity,
    oracle_best_schedule,
    schedule_risk,
    selective_groups,
    solve_lambda,
)
from .verify import run_verification

__version__ = "0.1.0"

__all__ = [
    "CaseModel",
    "CaseValidationError",
    "ChoiceCaseModel",
    "CompensationSchedule",
    "ConfigurationError",
    "Coupling",
    "CurveMoneyMap",
    "DiscreteDistribution",
    "DualCaseModel",
    "GapTable",
    "IdentityMoneyMap",
    "LoadedCase",
    "MATOS_BAND_EDGES",
    "MATOS_CONSOLATION",
    "MATOS_FACTUAL_TOP_CHANCE",
    "MATOS_GUARANTEED",
    "MATOS_TOP",
    "OutcomeSpace",
    "PolicyCombo",
    "RejectedFormulaComparison",
    "SCHEMA_TEXT",
    "Scenario",
    "TableCell",
    "TabulatedMoneyMap",
    "UtilityCurve",
    "award_from_compensation",
    "best_dutiful_choice",
    "cc_indemnity",
    "comonotone_matrix",
    "conditional_gap",
    "coupling_from_map",
    "dump_case",
    "evaluate_choice_case",
    "evaluate_policy",
    "evidence_coupling",
    "flatten_choice_case",
    "fm_indemnity",
    "independence_coupling",
    "least_divergence_coupling",
    "load_case",
    "matos_award",
    "matos_band",
    "matos_case",
    "matos_sweep",
    "matos_threshold",
    "medical_malpractice",
    "medical_sweep",
    "mitigation_offset",
    "money_equivalent",
    "oracle_best_schedule",
    "oracle_min_cost",
    "presume_choice_ii_cp",
    "presume_choice_it_cp",
    "prize_case",
    "rejected_formula_comparison",
    "reproduce_table",
    "run_verification",
    "save_case",
    "schedule_risk",
    "selective_groups",
    "solve_lambda",
    "transport_cost",
    "urn_independent",
    "urn_painted",
    "utility_value",
    "validate_case",
    "validate_choice_case",
    "vk_factorize",
]
