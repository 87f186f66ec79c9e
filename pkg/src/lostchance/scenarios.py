"""Built-in case families: generators for the worked examples.

Each generator returns a Scenario bundling a validated case model with
whatever published couplings belong to it.  The prize scenario carries
two: the evidence table, and a published least-divergence table that the
engine's own comonotone matching beats on cost (the discrepancy is
flagged wherever that table is used).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .choice import (
    MATOS_CONSOLATION,
    MATOS_FACTUAL_TOP_CHANCE,
    MATOS_GUARANTEED,
    MATOS_TOP,
    ChoiceCaseModel,
    matos_award,
    validate_choice_case,
)
from .outcome import (
    CaseModel,
    CurveMoneyMap,
    DiscreteDistribution,
    IdentityMoneyMap,
    OutcomeSpace,
    UtilityCurve,
    validate_case,
)
from .valuation import PolicyCombo, evaluate_policy


@dataclass(frozen=True, eq=False)
class Scenario:
    """A case model plus its published couplings and provenance notes."""

    name: str
    model: CaseModel
    evidence_joint: Optional[np.ndarray] = None
    paper_table_joint: Optional[np.ndarray] = None
    notes: tuple[str, ...] = ()
    params: tuple[tuple[str, float], ...] = ()


def _check_chances(p0: float, p1: float) -> tuple[float, float]:
    p0, p1 = float(p0), float(p1)
    if not (math.isfinite(p0) and math.isfinite(p1)):
        raise ValueError("chances must be finite")
    if not (0.0 <= p1 <= p0 <= 1.0):
        raise ValueError(
            f"need 0 <= p1 <= p0 <= 1; got p0={p0!r}, p1={p1!r}"
        )
    if p0 <= 0.0:
        raise ValueError("counterfactual success chance p0 must be positive")
    return p0, p1


def medical_malpractice(p0: float, p1: float, delta_v: float) -> Scenario:
    """Two-outcome malpractice case: proper treatment cures with chance p0,
    the negligent treatment with chance p1; the patient was not cured.

    The evidence coupling is the threshold construction: every patient
    cured under negligence would also have been cured under proper care.
    """
    p0, p1 = _check_chances(p0, p1)
    delta_v = float(delta_v)
    if not (math.isfinite(delta_v) and delta_v > 0.0):
        raise ValueError(f"value gap delta_v must be positive, got {delta_v!r}")
    space = OutcomeSpace(("bad", "good"), (0.0, delta_v))
    model = validate_case(
        CaseModel(
            space=space,
            counterfactual=DiscreteDistribution((1.0 - p0, p0)),
            factual=DiscreteDistribution((1.0 - p1, p1)),
            money=IdentityMoneyMap(),
            factual_observed=0,
        )
    )
    evidence = np.array([[1.0 - p0, 0.0], [p0 - p1, p1]])
    return Scenario(
        name="medical",
        model=model,
        evidence_joint=evidence,
        params=(("p0", p0), ("p1", p1), ("delta_v", delta_v)),
    )


def urn_independent(
    p0: float, p1: float, v_red: float = 0.0, v_blue: float = 1.0
) -> Scenario:
    """Draw from an urn whose blue share was reduced from p0 to p1; the
    draws are physically unrelated, so the evidence coupling is the
    independent one.  Blue is the good outcome."""
    p0, p1 = _check_chances(p0, p1)
    if not float(v_blue) > float(v_red):
        raise ValueError("blue must out-value red")
    space = OutcomeSpace(("red", "blue"), (float(v_red), float(v_blue)))
    model = validate_case(
        CaseModel(
            space=space,
            counterfactual=DiscreteDistribution((1.0 - p0, p0)),
            factual=DiscreteDistribution((1.0 - p1, p1)),
            money=IdentityMoneyMap(),
            factual_observed=0,
        )
    )
    cf = model.counterfactual.array
    f = model.factual.array
    return Scenario(
        name="urn-independent",
        model=model,
        evidence_joint=np.outer(cf, f),
        params=(("p0", p0), ("p1", p1), ("v_red", float(v_red)), ("v_blue", float(v_blue))),
    )


def urn_painted(
    p0: float, p1: float, v_red: float = 0.0, v_blue: float = 1.0
) -> Scenario:
    """Same urn, but the harmful act painted some blue balls red, so the
    drawn ball is the same physical ball in both runs: the evidence
    coupling is the threshold one."""
    p0, p1 = _check_chances(p0, p1)
    if not float(v_blue) > float(v_red):
        raise ValueError("blue must out-value red")
    space = OutcomeSpace(("red", "blue"), (float(v_red), float(v_blue)))
    model = validate_case(
        CaseModel(
            space=space,
            counterfactual=DiscreteDistribution((1.0 - p0, p0)),
            factual=DiscreteDistribution((1.0 - p1, p1)),
            money=IdentityMoneyMap(),
            factual_observed=0,
        )
    )
    evidence = np.array([[1.0 - p0, 0.0], [p0 - p1, p1]])
    return Scenario(
        name="urn-painted",
        model=model,
        evidence_joint=evidence,
        params=(("p0", p0), ("p1", p1), ("v_red", float(v_red)), ("v_blue", float(v_blue))),
    )


PRIZE_VALUES = (5.0, 30.0, 35.0, 70.0, 110.0)

# Deterministic outcome maps, counterfactual to factual.
_PRIZE_EVIDENCE_MAP = {"a1": "a3", "a2": "a3", "a3": "a2", "a4": "a1", "a5": "a4"}
_PRIZE_PUBLISHED_LD_MAP = {"a1": "a1", "a2": "a2", "a3": "a3", "a4": "a4", "a5": "a3"}


def _expand_map(space: OutcomeSpace, cf: DiscreteDistribution, m: dict) -> np.ndarray:
    j = np.zeros((space.size, space.size))
    for src, dst in m.items():
        j[space.index(src), space.index(dst)] += cf.weights[space.index(src)]
    return j


def prize_case() -> Scenario:
    """Five equally likely prize levels; the harmful act permuted who gets
    what.  Ships with the published evidence table and a published
    least-divergence table whose cost the comonotone matching improves on
    (1125 vs 565), which downstream evaluation flags."""
    space = OutcomeSpace(("a1", "a2", "a3", "a4", "a5"), PRIZE_VALUES)
    cf = DiscreteDistribution((0.2, 0.2, 0.2, 0.2, 0.2))
    f = DiscreteDistribution((0.2, 0.2, 0.4, 0.2, 0.0))
    model = validate_case(
        CaseModel(
            space=space,
            counterfactual=cf,
            factual=f,
            money=IdentityMoneyMap(),
        )
    )
    return Scenario(
        name="prize",
        model=model,
        evidence_joint=_expand_map(space, cf, _PRIZE_EVIDENCE_MAP),
        paper_table_joint=_expand_map(space, cf, _PRIZE_PUBLISHED_LD_MAP),
        notes=(
            "published least-divergence table costs 1125; the comonotone "
            "matching costs 565 and is the engine default",
        ),
    )


def matos_case(p: float, theta: float) -> ChoiceCaseModel:
    """The Matos quiz-show case as a lost-choice model.

    The contestant was denied the real final question.  Refusing to
    answer keeps the guaranteed prize; answering wins the top prize with
    chance p in the counterfactual run (25% in the factual one, where the
    question was defective).  Both answering and refusing are treated as
    dutiful, so the presumption is free to pick either.
    """
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"success chance must lie in [0, 1], got {p!r}")
    curve = UtilityCurve(theta)
    results = (
        str(int(MATOS_CONSOLATION)),
        str(int(MATOS_GUARANTEED)),
        str(int(MATOS_TOP)),
    )
    result_money = (MATOS_CONSOLATION, MATOS_GUARANTEED, MATOS_TOP)
    values = tuple(
        tuple(curve.value(m) for m in result_money) for _ in ("answer", "refuse")
    )
    q = MATOS_FACTUAL_TOP_CHANCE
    model = ChoiceCaseModel(
        choices=("answer", "refuse"),
        duty=frozenset({"answer", "refuse"}),
        results=results,
        values=values,
        money=CurveMoneyMap(curve),
        result_given_choice_cf=(
            DiscreteDistribution((1.0 - p, 0.0, p)),
            DiscreteDistribution((0.0, 1.0, 0.0)),
        ),
        result_given_choice_f=(
            DiscreteDistribution((1.0 - q, 0.0, q)),
            DiscreteDistribution((0.0, 1.0, 0.0)),
        ),
        factual_choice="refuse",
        factual_result=str(int(MATOS_GUARANTEED)),
        notes=(
            "duty set includes refusing: declining the defective question "
            "was itself dutiful",
        ),
    )
    return validate_choice_case(model)


MATOS_BAND_EDGES = (0.0, 125_000.0, 250_000.0, 375_000.0, 500_000.0)


def matos_band(award: float) -> str:
    """Caption band for an award: zero, or one of four half-open slabs.

    Edges get a small relative tolerance so money round-trip error at the
    guaranteed-payout ceiling cannot push an award out of the top band.
    """
    top = MATOS_BAND_EDGES[-1]
    if award > top * (1.0 + 1e-9) + 1e-9:
        raise ValueError(f"award {award!r} beyond the top band")
    award = min(award, top)
    if award <= 0.0:
        return "zero"
    for lo, hi in zip(MATOS_BAND_EDGES, MATOS_BAND_EDGES[1:]):
        if award <= hi:
            return f"({lo:g},{hi:g}]"
    raise AssertionError("unreachable")


def matos_sweep(
    thetas: Iterable[float], ps: Iterable[float]
) -> Iterator[dict[str, object]]:
    """Award grid over risk aversion and success chance, banded for plotting."""
    for theta in thetas:
        for p in ps:
            award = matos_award(p, theta)
            yield {
                "theta": float(theta),
                "p": float(p),
                "award": award,
                "band": matos_band(award),
            }


@dataclass(frozen=True)
class RejectedFormulaComparison:
    """The relative-chance formula (p0-p1)/p0 * delta_v, for comparison only.

    No information/connection/indemnity combination produces it; it is
    reported alongside engine output, never as a policy.
    """

    p0: float
    p1: float
    delta_v: float
    value: float
    flag: str = "comparison only: no policy combination produces this value"


def rejected_formula_comparison(
    p0: float, p1: float, delta_v: float
) -> RejectedFormulaComparison:
    p0, p1 = _check_chances(p0, p1)
    delta_v = float(delta_v)
    if not (math.isfinite(delta_v) and delta_v > 0.0):
        raise ValueError(f"value gap delta_v must be positive, got {delta_v!r}")
    return RejectedFormulaComparison(
        p0=p0, p1=p1, delta_v=delta_v, value=(p0 - p1) / p0 * delta_v
    )


def medical_sweep(
    p0: float, delta_v: float, p1_values: Iterable[float]
) -> Iterator[dict[str, object]]:
    """Awards at the bad outcome as the negligent cure chance varies.

    Columns cover the distinct policy formulas plus the rejected
    relative-chance formula as a flagged comparison.
    """
    for p1 in p1_values:
        sc = medical_malpractice(p0, float(p1), delta_v)
        row: dict[str, object] = {
            "p0": float(p0),
            "p1": float(p1),
            "delta_v": float(delta_v),
        }
        combos = {
            "award_l_fi": ("l-fi", "e-c", "cc-i"),
            "award_e_c": ("h-fi", "e-c", "cc-i"),
            "award_i_c_cc_i": ("h-fi", "i-c", "cc-i"),
            "award_i_c_fm_i": ("h-fi", "i-c", "fm-i"),
        }
        for col, (info, conn, indem) in combos.items():
            schedule = evaluate_policy(
                sc.model,
                PolicyCombo(info, conn, indem),
                evidence_joint=sc.evidence_joint,
            )
            row[col] = schedule.award_for("bad")
        row["rejected_formula_comparison"] = (p0 - float(p1)) / p0 * float(delta_v)
        yield row
