"""Randomized audit of the closed-form rules against brute-force oracles.

Every suite draws seeded random instances and checks an exact claim:
couplings keep their marginals, the comonotone matching is transport
optimal, the clamped conditional gap minimizes expected squared
shortfall, the fair-mean schedule does so among mean-matching schedules,
and the lost-choice factorization keeps the counterfactual choice
uninformative about the factual result given the factual choice.

The harness can inject a deliberate shift into the fair-mean root
(lambda_offset) to demonstrate that the checks actually bite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choice import (
    ChoiceCaseModel,
    DualCaseModel,
    best_dutiful_choice,
    mitigation_offset,
    presume_choice_it_cp,
    presume_choice_ii_cp,
    vk_factorize,
)
from .coupling import (
    Coupling,
    _nw_fill,
    evidence_coupling,
    independence_coupling,
    least_divergence_coupling,
    oracle_min_cost,
    transport_cost,
)
from .outcome import CaseModel, DiscreteDistribution, IdentityMoneyMap, OutcomeSpace
from .valuation import (
    GapTable,
    PolicyCombo,
    build_partition,
    cc_indemnity,
    conditional_gap,
    fm_indemnity,
    oracle_best_schedule,
    schedule_risk,
    selective_groups,
    solve_lambda,
)

MAX_FAILURES_SHOWN = 5


def random_case(
    rng: np.random.Generator,
    min_outcomes: int = 2,
    max_outcomes: int = 4,
    allow_value_ties: bool = True,
    allow_zero_factual: bool = True,
) -> CaseModel:
    """Random validated case with well-separated weights.

    Weights are floored at 0.01 so conditional means stay stable; one
    factual weight is zeroed now and then to exercise support handling,
    and occasional duplicated values exercise tie-breaking.
    """
    n = int(rng.integers(min_outcomes, max_outcomes + 1))
    values = rng.uniform(-10.0, 10.0, size=n)
    if allow_value_ties and n >= 3 and rng.random() < 0.2:
        values[int(rng.integers(1, n))] = values[0]
    labels = tuple(f"o{i}" for i in range(n))

    def weights(zero_one: bool) -> tuple[float, ...]:
        w = rng.dirichlet(np.ones(n))
        w = np.maximum(w, 0.01)
        if zero_one and n > 2 and rng.random() < 0.3:
            w[int(rng.integers(0, n))] = 0.0
        w = w / w.sum()
        return tuple(float(x) for x in w)

    return CaseModel(
        space=OutcomeSpace(labels, tuple(float(v) for v in values)),
        counterfactual=DiscreteDistribution(weights(False)),
        factual=DiscreteDistribution(weights(allow_zero_factual)),
        money=IdentityMoneyMap(),
    )


def random_vertex_coupling(rng: np.random.Generator, model: CaseModel) -> np.ndarray:
    """Convex combination of transportation-polytope vertices.

    Each vertex is a northwest-corner solution under a random pair of
    row/column orderings, so marginals are preserved exactly.
    """
    rows = list(model.counterfactual.support())
    cols = list(model.factual.support())
    row_mass = [float(w) for w in model.counterfactual.weights]
    col_mass = [float(w) for w in model.factual.weights]
    k = int(rng.integers(1, 4))
    mix = rng.dirichlet(np.ones(k))
    j = np.zeros((model.space.size, model.space.size))
    for w in mix:
        ro = tuple(rng.permutation(rows))
        co = tuple(rng.permutation(cols))
        j += w * _nw_fill(ro, co, row_mass, col_mass, model.space.size)
    return j


def random_choice_case(rng: np.random.Generator) -> ChoiceCaseModel:
    nc = int(rng.integers(2, 4))
    nr = int(rng.integers(2, 5))
    choices = tuple(f"c{i}" for i in range(nc))
    results = tuple(f"r{i}" for i in range(nr))
    values = tuple(
        tuple(float(x) for x in rng.uniform(-10.0, 10.0, size=nr))
        for _ in range(nc)
    )

    def conditional() -> DiscreteDistribution:
        w = np.maximum(rng.dirichlet(np.ones(nr)), 0.02)
        return DiscreteDistribution(tuple(float(x) for x in w / w.sum()))

    duty_size = int(rng.integers(1, nc + 1))
    duty = frozenset(rng.choice(choices, size=duty_size, replace=False).tolist())
    evidence = None
    if rng.random() < 0.5:
        w = np.maximum(rng.dirichlet(np.ones(nc)), 0.02)
        evidence = DiscreteDistribution(tuple(float(x) for x in w / w.sum()))
    return ChoiceCaseModel(
        choices=choices,
        duty=duty,
        results=results,
        values=values,
        money=IdentityMoneyMap(),
        result_given_choice_cf=tuple(conditional() for _ in range(nc)),
        result_given_choice_f=tuple(conditional() for _ in range(nc)),
        factual_choice=str(rng.choice(choices)),
        factual_result=str(rng.choice(results)),
        counterfactual_choice=evidence,
    )


@dataclass
class PropertyResult:
    name: str
    checked: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    def ok(self, condition: bool, message: str) -> None:
        self.checked += 1
        if not condition:
            self.failed += 1
            if len(self.failures) < MAX_FAILURES_SHOWN:
                self.failures.append(message)

    @property
    def passed(self) -> bool:
        return self.failed == 0 and self.checked > 0


@dataclass
class VerificationReport:
    seed: int
    instances: int
    lambda_offset: float
    results: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def render(self) -> str:
        lines = [
            f"verification report (seed={self.seed}, instances={self.instances}"
            + (
                f", lambda_offset={self.lambda_offset:g})"
                if self.lambda_offset
                else ")"
            )
        ]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"  {status} {r.name}: {r.checked - r.failed}/{r.checked}")
            for f in r.failures:
                lines.append(f"       {f}")
        lines.append(
            f"overall: {'PASS' if self.passed else 'FAIL'} "
            f"({len(self.results)} properties)"
        )
        return "\n".join(lines)


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


def _any_coupling(rng: np.random.Generator, model: CaseModel) -> Coupling:
    pick = rng.integers(0, 3)
    if pick == 0:
        return evidence_coupling(model, random_vertex_coupling(rng, model))
    if pick == 1:
        return least_divergence_coupling(model)
    return independence_coupling(model)


def _check_marginal_preservation(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        for kind, c in (
            ("evidence", evidence_coupling(model, random_vertex_coupling(rng, model))),
            ("least-divergence", least_divergence_coupling(model)),
            ("independence", independence_coupling(model)),
        ):
            dev = max(
                float(np.max(np.abs(c.counterfactual_marginal - model.counterfactual.array))),
                float(np.max(np.abs(c.factual_marginal - model.factual.array))),
            )
            res.ok(
                dev <= 1e-10,
                f"instance {i}: {kind} coupling drifts marginals by {dev:g}",
            )


def _check_comonotone_optimal(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng, min_outcomes=2, max_outcomes=5)
        ld = least_divergence_coupling(model)
        cost = transport_cost(ld)
        _, best = oracle_min_cost(model)
        v = model.space.values_array
        scale = max(1.0, float((v.max() - v.min()) ** 2))
        res.ok(
            abs(cost - best) <= 1e-9 * scale,
            f"instance {i}: comonotone cost {cost!r} vs oracle {best!r}",
        )


def _check_monotone_rearrangement(res: PropertyResult, rng, instances: int) -> None:
    # Positive-mass cells, taken in column-value order, must have
    # non-decreasing row values: no mass pair may be anti-sorted.
    for i in range(instances):
        model = random_case(rng)
        ld = least_divergence_coupling(model)
        v = model.space.values_array
        cells = [
            (v[r], v[c])
            for r in range(model.space.size)
            for c in range(model.space.size)
            if ld.joint[r, c] > 1e-14
        ]
        bad = False
        for a in range(len(cells)):
            for b in range(len(cells)):
                if cells[a][0] < cells[b][0] and cells[a][1] > cells[b][1]:
                    bad = True
        res.ok(not bad, f"instance {i}: comonotone support is anti-sorted")


def _check_independence_covariance(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        c = independence_coupling(model)
        v = model.space.values_array
        mean0 = float(c.counterfactual_marginal @ v)
        mean1 = float(c.factual_marginal @ v)
        cov = float(np.einsum("ij,i,j->", c.joint, v - mean0, v - mean1))
        res.ok(abs(cov) <= 1e-10, f"instance {i}: independent coupling cov {cov:g}")


def _partitions_for(coupling: Coupling, model: CaseModel):
    groups = selective_groups(coupling)
    support = model.factual.support()
    for info in ("l-fi", "m-fi", "h-fi"):
        yield info, build_partition(info, support, groups)


def _check_unconstrained_optimal(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        v = model.space.values_array
        vrange = float(v.max() - v.min())
        step = max(0.005 * vrange, 1e-6)
        risk_tol = 1e-9 * max(1.0, vrange**2)
        for info, partition in _partitions_for(coupling, model):
            gaps = conditional_gap(coupling, partition)
            x_cc = cc_indemnity(gaps)
            x_or, r_or = oracle_best_schedule(
                coupling, partition, constrained=False, target_step=step
            )
            r_cc = schedule_risk(coupling, partition, x_cc)
            res.ok(
                r_cc <= r_or + risk_tol,
                f"instance {i} {info}: clamped-gap risk {r_cc!r} above "
                f"oracle {r_or!r}",
            )
            res.ok(
                float(np.max(np.abs(x_cc - x_or))) <= 0.01 * vrange + 1e-9,
                f"instance {i} {info}: clamped-gap schedule drifts from the "
                f"oracle beyond grid resolution",
            )


def _check_constrained_optimal(
    res: PropertyResult, rng, instances: int, lambda_offset: float
) -> None:
    positives = 0
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        v = model.space.values_array
        vrange = float(v.max() - v.min())
        risk_tol = 1e-9 * max(1.0, vrange**2)
        for info, partition in _partitions_for(coupling, model):
            gaps = conditional_gap(coupling, partition)
            target = gaps.expected_gap
            x_fm = fm_indemnity(gaps)
            if target <= 0.0:
                res.ok(
                    not np.any(x_fm),
                    f"instance {i} {info}: nonzero fair-mean schedule for "
                    f"non-positive mean gap",
                )
                continue
            positives += 1
            lam = solve_lambda(gaps, target) + lambda_offset
            x = np.maximum(0.0, gaps.gaps - lam)
            if lambda_offset == 0.0:
                res.ok(
                    bool(np.array_equal(x, x_fm)),
                    f"instance {i} {info}: harness schedule differs from "
                    f"fm_indemnity",
                )
            mean = float(gaps.probabilities @ x)
            res.ok(
                abs(mean - target) <= 1e-10,
                f"instance {i} {info}: fair-mean payout {mean!r} misses "
                f"target {target!r}",
            )
            x_or, r_or = oracle_best_schedule(
                coupling,
                partition,
                constrained=True,
                target=target,
                target_step=max(0.001 * vrange, 1e-6),
            )
            r_x = schedule_risk(coupling, partition, x)
            res.ok(
                r_x <= r_or + risk_tol,
                f"instance {i} {info}: fair-mean risk {r_x!r} above "
                f"constrained oracle {r_or!r}",
            )
            res.ok(
                float(np.max(np.abs(x - x_or))) <= 0.01 * vrange + 1e-9,
                f"instance {i} {info}: fair-mean schedule drifts from the "
                f"constrained oracle beyond grid resolution",
            )
    if positives == 0:
        res.ok(False, "no instance produced a positive mean gap")


def _check_cc_dominates_fm(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        for info, partition in _partitions_for(coupling, model):
            gaps = conditional_gap(coupling, partition)
            x_cc = cc_indemnity(gaps)
            x_fm = fm_indemnity(gaps)
            res.ok(
                bool(np.all(x_cc >= x_fm)),
                f"instance {i} {info}: fair-mean payout exceeds clamped gap",
            )


def _check_shift_function_shape(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        partition = build_partition(
            "h-fi", model.factual.support(), selective_groups(coupling)
        )
        gaps = conditional_gap(coupling, partition)

        def f(lam: float) -> float:
            return float(gaps.probabilities @ np.maximum(0.0, gaps.gaps - lam))

        lo = float(gaps.gaps.min()) - 1.0
        hi = float(gaps.gaps.max()) + 1.0
        points = sorted(rng.uniform(lo, hi, size=6))
        for a, b in zip(points, points[1:]):
            fa, fb = f(a), f(b)
            res.ok(fb <= fa + 1e-12, f"instance {i}: payout curve increased")
            res.ok(
                fa - fb <= (b - a) + 1e-12,
                f"instance {i}: payout curve steeper than slope one",
            )


def _check_mfi_fmi_closed_form(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        groups = selective_groups(coupling)
        partition = build_partition("m-fi", model.factual.support(), groups)
        gaps = conditional_gap(coupling, partition)
        target = gaps.expected_gap
        # The closed form presumes a strictly non-compensable second block;
        # a tied outcome can leave it with a positive gap at tie-tolerance
        # scale, in which case the generic root is the right answer.
        if target <= 0.0 or not groups.plus or groups.ties:
            continue
        x_fm = fm_indemnity(gaps)
        # The compensable block always comes first in an m-fi partition.
        expected = target / gaps.blocks[0].probability
        res.ok(
            abs(x_fm[0] - expected) <= 1e-9 * max(1.0, abs(expected)),
            f"instance {i}: compensable-block payout {x_fm[0]!r} differs "
            f"from {expected!r}",
        )
        res.ok(
            all(abs(x) == 0.0 for x in x_fm[1:]),
            f"instance {i}: non-compensable block paid",
        )


def _check_gap_identity(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_case(rng)
        coupling = _any_coupling(rng, model)
        mean_gap = model.expected_gap()
        for info, partition in _partitions_for(coupling, model):
            gaps = conditional_gap(coupling, partition)
            res.ok(
                abs(gaps.expected_gap - mean_gap) <= 1e-10,
                f"instance {i} {info}: block gaps aggregate to "
                f"{gaps.expected_gap!r}, case mean gap is {mean_gap!r}",
            )


def _check_choice_independence(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = presume_choice_it_cp(random_choice_case(rng))
        joint4 = vk_factorize(model)
        fc = model.choice_index(model.factual_choice)
        f_cond = model.result_given_choice_f[fc].array
        for c0 in range(model.n_choices):
            pc = float(joint4[c0].sum())
            if pc <= 0.0:
                continue
            r1_given = joint4[c0, :, fc, :].sum(axis=0) / pc
            dev = float(np.max(np.abs(r1_given - f_cond)))
            res.ok(
                dev <= 1e-10,
                f"instance {i}: factual result law shifts by {dev:g} when "
                f"conditioning on counterfactual choice {c0}",
            )


def _check_presumptions(res: PropertyResult, rng, instances: int) -> None:
    for i in range(instances):
        model = random_choice_case(rng)
        it = presume_choice_it_cp(model)
        ii = presume_choice_ii_cp(model)
        if model.counterfactual_choice is not None:
            res.ok(
                it == model,
                f"instance {i}: rebuttable presumption overrode evidence",
            )
        else:
            res.ok(
                it.counterfactual_choice is not None,
                f"instance {i}: rebuttable presumption left choice unresolved",
            )
        best = best_dutiful_choice(model)
        point = ii.counterfactual_choice.weights[ii.choice_index(best)]
        res.ok(
            point == 1.0,
            f"instance {i}: absolute presumption did not fix the best "
            f"dutiful choice",
        )
        res.ok(
            presume_choice_it_cp(it) == it and presume_choice_ii_cp(ii) == ii,
            f"instance {i}: presumption is not idempotent",
        )


def _check_mitigation(res: PropertyResult, rng, instances: int) -> None:
    combo = PolicyCombo("h-fi", "e-c", "cc-i")
    for i in range(instances):
        base = random_choice_case(rng)
        dual = DualCaseModel(
            choices=base.choices,
            duty=base.duty,
            results=base.results,
            values=base.values,
            money=base.money,
            result_given_choice_cf=base.result_given_choice_cf,
            result_given_choice_f=base.result_given_choice_f,
            factual_choice=base.factual_choice,
            factual_result=base.factual_result,
            counterfactual_choice=base.counterfactual_choice,
        )
        main = float(rng.uniform(0.0, 5.0))
        final = mitigation_offset(main, dual, combo)
        res.ok(final >= 0.0, f"instance {i}: mitigation went negative")
        res.ok(
            final <= main + 1e-12,
            f"instance {i}: mitigation increased the award",
        )
        if dual.factual_choice in dual.duty:
            res.ok(
                final == main,
                f"instance {i}: dutiful factual choice still reduced the award",
            )
        res.ok(
            mitigation_offset(0.0, dual, combo) == 0.0,
            f"instance {i}: zero main award did not clamp at zero",
        )


def run_verification(
    seed: int = 0, instances: int = 200, lambda_offset: float = 0.0
) -> VerificationReport:
    """Run every property suite on seeded random instances.

    lambda_offset shifts the fair-mean root inside the harness (not the
    engine) so a non-zero value must make the report fail; it exists to
    prove the checks are live.
    """
    report = VerificationReport(
        seed=int(seed), instances=int(instances), lambda_offset=float(lambda_offset)
    )
    comonotone_instances = min(instances, 60)
    suites = [
        ("coupling-marginals", _check_marginal_preservation, instances, {}),
        ("comonotone-transport-optimal", _check_comonotone_optimal, comonotone_instances, {}),
        ("comonotone-monotone-support", _check_monotone_rearrangement, instances, {}),
        ("independence-zero-covariance", _check_independence_covariance, instances, {}),
        ("clamped-gap-risk-optimal", _check_unconstrained_optimal, instances, {}),
        (
            "fair-mean-constrained-optimal",
            _check_constrained_optimal,
            instances,
            {"lambda_offset": lambda_offset},
        ),
        ("clamped-dominates-fair-mean", _check_cc_dominates_fm, instances, {}),
        ("payout-curve-shape", _check_shift_function_shape, instances, {}),
        ("two-block-fair-mean-closed-form", _check_mfi_fmi_closed_form, instances, {}),
        ("block-gap-aggregation", _check_gap_identity, instances, {}),
        ("choice-result-independence", _check_choice_independence, instances, {}),
        ("presumption-behavior", _check_presumptions, instances, {}),
        ("mitigation-clamp", _check_mitigation, instances, {}),
    ]
    for stream, (name, fn, count, kwargs) in enumerate(suites):
        res = PropertyResult(name)
        fn(res, _rng_for(seed, stream), count, **kwargs)
        report.results.append(res)
    return report
