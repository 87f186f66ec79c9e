import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostchance.outcome import (
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


def make_case(**overrides):
    base = dict(
        space=OutcomeSpace(("bad", "good"), (0.0, 1.0)),
        counterfactual=DiscreteDistribution((0.05, 0.95)),
        factual=DiscreteDistribution((0.10, 0.90)),
        money=IdentityMoneyMap(),
        factual_observed=0,
    )
    base.update(overrides)
    return CaseModel(**base)


class TestUtilityCurve:
    def test_risk_neutral_is_money_minus_one(self):
        curve = UtilityCurve(0.0)
        assert curve.value(100.0) == 99.0
        assert curve.money(99.0) == 100.0

    def test_log_branch_at_theta_one(self):
        curve = UtilityCurve(1.0)
        assert curve.value(math.e) == pytest.approx(1.0, rel=1e-12)
        assert curve.money(1.0) == pytest.approx(math.e, rel=1e-12)
        assert curve.value(1.0) == 0.0

    def test_interior_theta_half(self):
        # (1 - 10000^0.5) / (0.5 - 1) = 198
        curve = UtilityCurve(0.5)
        assert curve.value(10_000.0) == pytest.approx(198.0, rel=1e-12)
        assert curve.money(198.0) == pytest.approx(10_000.0, rel=1e-12)

    def test_value_at_one_is_zero_for_every_theta(self):
        for theta in np.linspace(0.0, 1.0, 21):
            assert UtilityCurve(float(theta)).value(1.0) == 0.0

    def test_monotone_in_money(self):
        monies = np.logspace(0.0, 7.0, 29)
        for theta in np.linspace(0.0, 1.0, 21):
            curve = UtilityCurve(float(theta))
            vals = [curve.value(float(m)) for m in monies]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_round_trip_across_theta_grid(self):
        monies = np.logspace(0.0, 7.0, 29)
        for theta in np.linspace(0.0, 1.0, 21):
            curve = UtilityCurve(float(theta))
            for m in monies:
                back = curve.money(curve.value(float(m)))
                assert back == pytest.approx(float(m), rel=1e-10)

    def test_near_one_theta_approaches_log(self):
        # With theta = 1 - eps the value is log(m) + eps*log(m)^2/2 to
        # leading order.  The raw gap stays under 1e-4 for money up to
        # 1e6; beyond that only the quadratic estimate is honest, so the
        # tail is checked against it instead of a flat constant.
        eps = 1e-6
        curve = UtilityCurve(1.0 - eps)
        for m in np.logspace(0.0, 6.0, 25):
            assert abs(curve.value(float(m)) - math.log(m)) < 1e-4
        for m in np.logspace(0.0, 7.0, 29):
            gap = curve.value(float(m)) - math.log(m)
            quad = 0.5 * eps * math.log(m) ** 2
            assert 0.0 <= gap <= 1.02 * quad + 1e-12

    def test_theta_outside_unit_interval_rejected(self):
        for bad in (-0.1, 1.1, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                UtilityCurve(bad)

    def test_nonpositive_money_rejected(self):
        curve = UtilityCurve(0.5)
        for bad in (0.0, -1.0, float("nan")):
            with pytest.raises(ValueError):
                curve.value(bad)

    def test_inverse_domain_errors(self):
        with pytest.raises(ValueError):
            UtilityCurve(0.5).money(-2.5)  # 1 + v*eps <= 0
        with pytest.raises(ValueError):
            UtilityCurve(0.0).money(-1.0)
        # the log branch accepts any finite value
        assert UtilityCurve(1.0).money(-50.0) > 0.0

    def test_module_level_wrappers(self):
        curve = UtilityCurve(0.0)
        assert utility_value(curve, 100.0) == 99.0
        assert money_equivalent(curve, 99.0) == 100.0

    @given(
        theta=st.floats(0.0, 1.0),
        money=st.floats(1e-3, 1e9),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, theta, money):
        curve = UtilityCurve(theta)
        assert curve.money(curve.value(money)) == pytest.approx(money, rel=1e-9)


class TestMoneyMaps:
    def test_identity(self):
        m = IdentityMoneyMap()
        assert m.to_money(12.5) == 12.5
        assert m.spec() == {"kind": "identity"}

    def test_curve_map_inverts_curve(self):
        m = CurveMoneyMap(UtilityCurve(1.0))
        assert m.to_money(0.0) == pytest.approx(1.0)
        assert m.spec() == {"kind": "crra", "theta": 1.0}

    def test_tabulated_interpolates(self):
        m = TabulatedMoneyMap(((0.0, 0.0), (1.0, 10.0), (2.0, 40.0)))
        assert m.to_money(0.5) == pytest.approx(5.0)
        assert m.to_money(1.5) == pytest.approx(25.0)
        assert m.to_money(2.0) == 40.0

    def test_tabulated_rejects_outside_domain(self):
        m = TabulatedMoneyMap(((0.0, 0.0), (1.0, 10.0)))
        with pytest.raises(ValueError):
            m.to_money(-0.1)
        with pytest.raises(ValueError):
            m.to_money(1.1)

    def test_tabulated_needs_increasing_knots(self):
        with pytest.raises(ValueError):
            TabulatedMoneyMap(((0.0, 0.0),))
        with pytest.raises(ValueError):
            TabulatedMoneyMap(((0.0, 0.0), (1.0, 0.0)))
        with pytest.raises(ValueError):
            TabulatedMoneyMap(((1.0, 0.0), (0.0, 1.0)))


class TestAwardFromCompensation:
    def test_identity_award_is_compensation(self):
        assert award_from_compensation(IdentityMoneyMap(), 7.0, 3.0) == 3.0

    def test_zero_compensation_zero_award(self):
        m = CurveMoneyMap(UtilityCurve(0.7))
        assert award_from_compensation(m, 2.0, 0.0) == 0.0

    def test_negative_or_nonfinite_compensation_rejected(self):
        for bad in (-0.5, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                award_from_compensation(IdentityMoneyMap(), 0.0, bad)

    def test_risk_averse_award_exceeds_value_gap(self):
        # Concave value curve means the money needed to buy a fixed value
        # lift grows with the starting position.
        curve = UtilityCurve(1.0)
        m = CurveMoneyMap(curve)
        low = award_from_compensation(m, curve.value(10.0), 1.0)
        high = award_from_compensation(m, curve.value(1000.0), 1.0)
        assert high > low


class TestOutcomeSpace:
    def test_index_lookup(self):
        space = OutcomeSpace(("a", "b"), (1.0, 2.0))
        assert space.index("b") == 1
        with pytest.raises(KeyError):
            space.index("c")

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            OutcomeSpace(("a",), (1.0, 2.0))
        with pytest.raises(ValueError):
            OutcomeSpace((), ())


class TestDiscreteDistribution:
    def test_support_and_mean(self):
        d = DiscreteDistribution((0.25, 0.0, 0.75))
        assert d.support() == (0, 2)
        assert d.mean((1.0, 5.0, 3.0)) == pytest.approx(2.5)

    def test_sum_tolerance_is_tight(self):
        ok = DiscreteDistribution((0.5, 0.5 + 5e-13))
        assert ok.violations("x", 2) == []
        off = DiscreteDistribution((0.5, 0.49))
        msgs = off.violations("x", 2)
        assert len(msgs) == 1 and "sum to" in msgs[0]


class TestValidateCase:
    def test_valid_case_returned_unchanged(self):
        model = make_case()
        assert validate_case(model) is model

    def test_all_violations_reported_together(self):
        model = make_case(
            space=OutcomeSpace(("dup", "dup", ""), (0.0, 1.0, float("nan"))),
            counterfactual=DiscreteDistribution((0.5, 0.49, 0.0)),
            factual=DiscreteDistribution((-0.1, 1.1, 0.0)),
            factual_observed=2,
        )
        with pytest.raises(CaseValidationError) as exc:
            validate_case(model)
        text = "\n".join(exc.value.violations)
        assert "duplicate outcome label" in text
        assert "empty outcome label" in text
        assert "non-finite value" in text
        assert "sum to" in text
        assert "negative" in text
        assert "zero factual probability" in text
        assert len(exc.value.violations) >= 6

    def test_observed_index_range_checked(self):
        with pytest.raises(CaseValidationError) as exc:
            validate_case(make_case(factual_observed=5))
        assert any("out of range" in v for v in exc.value.violations)

    def test_marginal_length_mismatch(self):
        with pytest.raises(CaseValidationError) as exc:
            validate_case(make_case(factual=DiscreteDistribution((1.0,))))
        assert any("1 weights for 2 outcomes" in v for v in exc.value.violations)

    def test_expected_gap(self):
        model = make_case()
        # E[V0] - E[V1] = 0.95 - 0.90
        assert model.expected_gap() == pytest.approx(0.05, abs=1e-15)
