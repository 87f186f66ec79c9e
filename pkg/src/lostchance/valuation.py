"""Policy evaluation: information partitions, value gaps, indemnity rules.

A policy combination picks three things:

* how much of the factual outcome the court may condition on (an
  information partition of the factual support);
* which coupling connects the two runs (evidence, least divergence, or
  independence; "paper-table" evaluates an externally published matrix in
  place of the engine's own least-divergence coupling);
* the indemnity rule: cover-the-conditional-gap (clamped conditional mean
  of V0 - V1) or fair-mean (the same, shifted down by the unique lambda
  that makes the expected payout equal the unconditional mean gap).

The fair-mean shift lambda solves E[max(0, gap_K - lambda)] = E[V0 - V1]
exactly: the left side is piecewise linear and non-increasing in lambda,
so scanning its breakpoints gives a closed-form root.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coupling import (
    Coupling,
    coupling_from_map,
    evidence_coupling,
    independence_coupling,
    least_divergence_coupling,
    transport_cost,
)
from .outcome import CaseModel, award_from_compensation

# Sum of block probability times block gap must equal the mean gap
# within this tolerance.
GAP_IDENTITY_TOL = 1e-10

INFO_POLICIES = ("l-fi", "m-fi", "h-fi", "custom")
CONNECTION_POLICIES = ("e-c", "ld-c", "i-c", "paper-table")
INDEMNITY_POLICIES = ("cc-i", "fm-i")


class ConfigurationError(ValueError):
    """A policy evaluation request is incomplete or inconsistent."""


@dataclass(frozen=True)
class PolicyCombo:
    """One information / connection / indemnity choice."""

    info: str
    connection: str
    indemnity: str

    def __post_init__(self) -> None:
        for name, got, allowed in (
            ("info", self.info, INFO_POLICIES),
            ("connection", self.connection, CONNECTION_POLICIES),
            ("indemnity", self.indemnity, INDEMNITY_POLICIES),
        ):
            norm = str(got).strip().lower()
            if norm not in allowed:
                raise ConfigurationError(
                    f"unknown {name} policy {got!r}; expected one of {allowed}"
                )
            object.__setattr__(self, name, norm)

    @property
    def descriptor(self) -> str:
        return f"{self.info}/{self.connection}/{self.indemnity}"


@dataclass(frozen=True)
class SelectiveGroups:
    """Split of the factual support by conditional counterfactual mean.

    An outcome is compensable (plus group) when the mean counterfactual
    value given that outcome strictly exceeds the outcome's own value.
    Outcomes at or below their conditional mean form the minus group;
    exact ties are recorded separately since they sit on the boundary.
    """

    plus: tuple[int, ...]
    minus: tuple[int, ...]
    ties: tuple[int, ...] = ()


def selective_groups(coupling: Coupling) -> SelectiveGroups:
    v = coupling.space.values_array
    col_mass = coupling.factual_marginal
    scale = max(1.0, float(np.max(np.abs(v))))
    tol = 1e-9 * scale
    plus: list[int] = []
    minus: list[int] = []
    ties: list[int] = []
    for k in range(coupling.space.size):
        if col_mass[k] <= 0.0:
            continue
        cond_mean = float(coupling.joint[:, k] @ v) / float(col_mass[k])
        diff = cond_mean - float(v[k])
        if abs(diff) <= tol:
            ties.append(k)
            minus.append(k)
        elif diff > 0.0:
            plus.append(k)
        else:
            minus.append(k)
    return SelectiveGroups(tuple(plus), tuple(minus), tuple(ties))


@dataclass(frozen=True)
class InformationPartition:
    """Blocks of factual outcome indices the court can tell apart."""

    blocks: tuple[tuple[int, ...], ...]
    origin: str

    def __post_init__(self) -> None:
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        flat = [i for b in blocks for i in b]
        if len(set(flat)) != len(flat):
            raise ValueError("partition blocks overlap")
        if any(not b for b in blocks):
            raise ValueError("partition contains an empty block")

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def block_of(self) -> dict[int, int]:
        return {i: bi for bi, block in enumerate(self.blocks) for i in block}


def build_partition(
    info: str,
    support: Sequence[int],
    groups: Optional[SelectiveGroups] = None,
    custom_blocks: Optional[Sequence[Sequence[int]]] = None,
) -> InformationPartition:
    """Assemble the partition a given information policy allows.

    * l-fi: one block, the whole factual support;
    * m-fi: the compensable/non-compensable split (empty side dropped);
    * h-fi: singletons, full knowledge of the factual outcome;
    * custom: caller-supplied blocks, which must tile the support exactly.
    """
    info = str(info).strip().lower()
    sup = tuple(int(i) for i in support)
    if not sup:
        raise ValueError("factual support is empty")
    if info == "l-fi":
        return InformationPartition((sup,), "l-fi")
    if info == "h-fi":
        return InformationPartition(tuple((i,) for i in sup), "h-fi")
    if info == "m-fi":
        if groups is None:
            raise ConfigurationError("m-fi partition needs selective groups")
        blocks = tuple(b for b in (groups.plus, groups.minus) if b)
        return InformationPartition(blocks, "m-fi")
    if info == "custom":
        if custom_blocks is None:
            raise ConfigurationError("custom partition needs explicit blocks")
        blocks = tuple(tuple(int(i) for i in b) for b in custom_blocks)
        part = InformationPartition(blocks, "custom")
        covered = sorted(i for b in blocks for i in b)
        if covered != sorted(sup):
            raise ValueError(
                f"custom blocks cover indices {covered}, expected exactly the "
                f"factual support {sorted(sup)}"
            )
        return part
    raise ConfigurationError(f"unknown information policy {info!r}")


@dataclass(frozen=True)
class GapBlock:
    outcomes: tuple[int, ...]
    probability: float
    gap: float


@dataclass(frozen=True)
class GapTable:
    """Conditional mean value gaps, one row per partition block."""

    blocks: tuple[GapBlock, ...]

    @property
    def probabilities(self) -> np.ndarray:
        return np.asarray([b.probability for b in self.blocks])

    @property
    def gaps(self) -> np.ndarray:
        return np.asarray([b.gap for b in self.blocks])

    @property
    def expected_gap(self) -> float:
        return float(self.probabilities @ self.gaps)


def conditional_gap(coupling: Coupling, partition: InformationPartition) -> GapTable:
    """E[V0 - V1 | block] and block probability for each block.

    Blocks with zero factual probability carry no conditional mean; they
    are dropped with a warning rather than reported as 0/0.
    """
    v = coupling.space.values_array
    col_mass = coupling.factual_marginal
    # E[(V0 - V1) 1{O1 = k}] column by column.
    col_gap = coupling.joint.T @ v - col_mass * v
    blocks: list[GapBlock] = []
    for block in partition.blocks:
        idx = list(block)
        p = float(col_mass[idx].sum())
        if p <= 0.0:
            warnings.warn(
                f"dropping zero-probability block {tuple(block)}", stacklevel=2
            )
            continue
        g = float(col_gap[idx].sum()) / p
        blocks.append(GapBlock(tuple(block), p, g))
    table = GapTable(tuple(blocks))
    mean_gap = float(coupling.joint.sum(axis=1) @ v - col_mass @ v)
    scale = max(1.0, float(np.max(np.abs(v))))
    if abs(table.expected_gap - mean_gap) > GAP_IDENTITY_TOL * scale:
        raise AssertionError(
            f"gap table inconsistent: blocks aggregate to {table.expected_gap!r} "
            f"but the coupling's mean gap is {mean_gap!r}"
        )
    return table


def cc_indemnity(gaps: GapTable) -> np.ndarray:
    """Clamp each block's conditional gap at zero; one payout per block."""
    return np.maximum(0.0, gaps.gaps)


def solve_lambda(gaps: GapTable, target: float) -> float:
    """Root of sum_b p_b * max(0, gap_b - lambda) = target, for target > 0.

    The left side is piecewise linear, continuous and non-increasing with
    breakpoints at the block gaps.  Sorting gaps in decreasing order, the
    segment between consecutive breakpoints has the closed form
    S_k - P_k * lambda with S_k and P_k the partial mass-weighted sum and
    mass of the blocks above the segment, so the root is exact.
    """
    if not (math.isfinite(target) and target > 0.0):
        raise ValueError(f"target payout must be positive, got {target!r}")
    order = np.argsort(-gaps.gaps, kind="stable")
    g = gaps.gaps[order]
    p = gaps.probabilities[order]
    s_k = 0.0
    p_k = 0.0
    lam = None
    for k in range(len(g)):
        s_k += p[k] * g[k]
        p_k += p[k]
        lo = g[k + 1] if k + 1 < len(g) else -math.inf
        cand = (s_k - target) / p_k
        if lo <= cand <= g[k]:
            lam = float(cand)
            break
    if lam is None:
        raise AssertionError(
            f"no breakpoint segment contained the root for target {target!r}; "
            f"gaps {g.tolist()!r}"
        )
    scale = max(1.0, float(np.max(np.abs(g))) if len(g) else 1.0)
    if lam < -1e-12 * scale:
        raise ValueError(
            f"target {target!r} exceeds the payout at zero shift; no "
            f"non-negative shift exists"
        )
    return max(0.0, lam)


def fm_indemnity(gaps: GapTable) -> np.ndarray:
    """Fair-mean payouts: clamped gaps shifted so their mean hits the mean gap.

    When the mean gap is not positive the whole schedule is zero.
    Otherwise the shift is solve_lambda's exact root, which is always
    non-negative, so fair-mean payouts never exceed the clamped ones.
    """
    target = gaps.expected_gap
    if target <= 0.0:
        return np.zeros(len(gaps.blocks))
    lam = solve_lambda(gaps, target)
    return np.maximum(0.0, gaps.gaps - lam)


@dataclass(frozen=True)
class CompensationSchedule:
    """Per-outcome compensation (value units) and monetary award."""

    policy: PolicyCombo
    outcomes: tuple[str, ...]
    values: tuple[float, ...]
    awards: tuple[float, ...]
    notes: tuple[str, ...] = ()

    def _index(self, label: str) -> int:
        try:
            return self.outcomes.index(label)
        except ValueError:
            raise ValueError(
                f"outcome {label!r} is not in this schedule; only factually "
                f"possible outcomes are scheduled"
            ) from None

    def value_for(self, label: str) -> float:
        return self.values[self._index(label)]

    def award_for(self, label: str) -> float:
        return self.awards[self._index(label)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.outcomes, self.values))

    def to_csv_rows(self) -> list[tuple[str, str, float, float]]:
        return [
            (self.policy.descriptor, o, x, a)
            for o, x, a in zip(self.outcomes, self.values, self.awards)
        ]


def _coupling_for(
    model: CaseModel, combo: PolicyCombo, evidence_joint
) -> tuple[Coupling, list[str]]:
    notes: list[str] = []
    conn = combo.connection
    if conn in ("e-c", "paper-table"):
        if evidence_joint is None:
            raise ConfigurationError(
                f"connection policy {conn!r} needs an explicit coupling and "
                f"none was supplied"
            )
        if isinstance(evidence_joint, Coupling):
            c = evidence_joint
        elif isinstance(evidence_joint, dict):
            c = coupling_from_map(model, evidence_joint)
        else:
            c = evidence_coupling(model, evidence_joint)
        if conn == "paper-table":
            own = least_divergence_coupling(model)
            supplied_cost = transport_cost(c)
            own_cost = transport_cost(own)
            if supplied_cost > own_cost + 1e-9:
                notes.append(
                    "FLAG published least-divergence table is not cost-minimal: "
                    f"cost {supplied_cost:.6g} vs optimal {own_cost:.6g}"
                )
        return c, notes
    if conn == "ld-c":
        vals = model.space.values
        if len(set(vals)) < len(vals):
            notes.append(
                "note: value ties present; least-divergence matching breaks "
                "them by label order and the schedule may depend on that order"
            )
        return least_divergence_coupling(model), notes
    if conn == "i-c":
        return independence_coupling(model), notes
    raise ConfigurationError(f"unknown connection policy {conn!r}")


def evaluate_policy(
    model: CaseModel,
    combo: PolicyCombo,
    evidence_joint=None,
    custom_blocks: Optional[Sequence[Sequence[int]]] = None,
    extra_notes: Sequence[str] = (),
) -> CompensationSchedule:
    """Full pipeline: coupling, partition, gaps, indemnity, money awards."""
    coupling, notes = _coupling_for(model, combo, evidence_joint)
    groups = selective_groups(coupling)
    if groups.ties and combo.info == "m-fi":
        tied = ", ".join(model.space.labels[i] for i in groups.ties)
        notes.append(
            f"note: outcome(s) {tied} sit exactly at their conditional mean "
            f"and are grouped as non-compensable"
        )
    support = model.factual.support()
    partition = build_partition(combo.info, support, groups, custom_blocks)
    gaps = conditional_gap(coupling, partition)
    if combo.indemnity == "cc-i":
        block_x = cc_indemnity(gaps)
    else:
        block_x = fm_indemnity(gaps)
    x_of: dict[int, float] = {}
    for block, x in zip(gaps.blocks, block_x):
        for k in block.outcomes:
            x_of[k] = float(x)
    v = model.space.values_array
    outcomes: list[str] = []
    values: list[float] = []
    awards: list[float] = []
    for k in support:
        x = x_of.get(k, 0.0)
        outcomes.append(model.space.labels[k])
        values.append(x)
        awards.append(award_from_compensation(model.money, float(v[k]), x))
    return CompensationSchedule(
        policy=combo,
        outcomes=tuple(outcomes),
        values=tuple(values),
        awards=tuple(awards),
        notes=tuple(extra_notes) + tuple(notes),
    )


def schedule_risk(
    coupling: Coupling, partition: InformationPartition, block_x: np.ndarray
) -> float:
    """E[(V0 - V1 - X)^2] for a block-constant schedule, straight from the joint."""
    v = coupling.space.values_array
    n = coupling.space.size
    x_col = np.zeros(n)
    for block, x in zip(partition.blocks, block_x):
        for k in block:
            x_col[k] = x
    d = v[:, None] - v[None, :] - x_col[None, :]
    return float(np.einsum("ij,ij->", coupling.joint, d * d))


def _risk_batch(joint, v, col_block, candidates) -> np.ndarray:
    """Risk of many block schedules at once; candidates is (m, B)."""
    x_cols = candidates[:, col_block]  # (m, n)
    d = v[None, :, None] - v[None, None, :] - x_cols[:, None, :]
    return np.einsum("ij,mij->m", joint, d * d)


def oracle_best_schedule(
    coupling: Coupling,
    partition: InformationPartition,
    constrained: bool = False,
    target: Optional[float] = None,
    target_step: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Grid-search reference for the best block-constant schedule.

    Minimizes the expected squared shortfall by direct evaluation on the
    joint, refining a coarse grid around the incumbent until the spacing
    falls below target_step.  With constrained=True only schedules whose
    expected payout equals `target` (default: the coupling's mean gap)
    are considered, plus the all-zero schedule.  Kept deliberately
    independent of the closed-form rules so it can audit them; refuses
    partitions with more than 4 blocks.
    """
    nb = partition.block_count
    if nb > 4:
        raise ValueError(f"oracle refuses {nb} blocks; grids are exhaustive up to 4")
    v = coupling.space.values_array
    joint = coupling.joint
    col_mass = coupling.factual_marginal
    n = coupling.space.size
    col_block = np.zeros(n, dtype=int)
    for bi, block in enumerate(partition.blocks):
        for k in block:
            col_block[k] = bi
    block_p = np.array(
        [float(col_mass[list(block)].sum()) for block in partition.blocks]
    )
    vrange = float(v.max() - v.min())
    if vrange <= 0.0:
        zero = np.zeros(nb)
        return zero, schedule_risk(coupling, partition, zero)
    if target_step is None:
        target_step = min(0.01, 0.005 * vrange)

    def eval_cands(c: np.ndarray) -> tuple[np.ndarray, float]:
        risks = _risk_batch(joint, v, col_block, c)
        i = int(np.argmin(risks))
        return c[i].copy(), float(risks[i])

    if constrained:
        t = float(coupling.joint.sum(axis=1) @ v - col_mass @ v) if target is None else float(target)
        best_x = np.zeros(nb)
        best_r = schedule_risk(coupling, partition, best_x)
        if t > 0.0:
            # One block is always solved from the mean constraint instead of
            # being gridded, so every candidate meets the constraint exactly.
            def caps_for(free: list) -> np.ndarray:
                # q_b * x_b can never exceed the payout target, so each axis
                # is capped hard; the level-0 grid then resolves the whole
                # feasible box even when it is much thinner than the range.
                return np.array(
                    [
                        min(vrange, t / block_p[b]) if block_p[b] > 0 else vrange
                        for b in free
                    ]
                )

            def assemble(det: int, free: list, free_vals: np.ndarray) -> np.ndarray:
                m = free_vals.shape[0]
                c = np.zeros((m, nb))
                for j, b in enumerate(free):
                    c[:, b] = free_vals[:, j]
                rem = (t - free_vals @ block_p[free]) / block_p[det]
                c[:, det] = rem
                c = c[rem >= -1e-9]
                c[:, det] = np.maximum(c[:, det], 0.0)
                return c

            det0 = int(np.argmax(block_p))
            free0 = [b for b in range(nb) if b != det0]
            if not free0:
                cands = assemble(det0, free0, np.zeros((1, 0)))
                if len(cands):
                    x, r = eval_cands(cands)
                    if r < best_r:
                        best_x, best_r = x, r
            else:
                caps = caps_for(free0)
                centre = caps / 2.0
                halfw = caps / 2.0
                while True:
                    axes = [
                        np.linspace(max(0.0, c - h), min(cap, c + h), 11)
                        for c, h, cap in zip(centre, halfw, caps)
                    ]
                    grid = np.stack(
                        [g.ravel() for g in np.meshgrid(*axes, indexing="ij")],
                        axis=1,
                    )
                    cands = assemble(det0, free0, grid)
                    if len(cands):
                        x, r = eval_cands(cands)
                        if r < best_r:
                            best_x, best_r = x, r
                    spacing = halfw / 5.0
                    if float(np.max(spacing)) <= target_step:
                        break
                    centre = best_x[free0]
                    halfw = 2.0 * spacing
                # Window refinement can stall along the correlated valley the
                # constraint carves, and single-axis moves cannot walk a facet
                # where the solved-for block pays zero.  Per-axis line sweeps
                # at the final resolution, rotating which block is solved for,
                # cover both: a point no sweep improves sits within a couple
                # of steps of the true constrained minimizer.
                step = float(target_step)
                for _round in range(8):
                    r_before = best_r
                    for det in range(nb):
                        if block_p[det] <= 0.0:
                            continue
                        free = [b for b in range(nb) if b != det]
                        dcaps = caps_for(free)
                        x_free = best_x[free].copy()
                        for _ in range(80):
                            improved = False
                            for j, b in enumerate(free):
                                others = float(
                                    block_p[free] @ x_free
                                    - block_p[b] * x_free[j]
                                )
                                if block_p[b] > 0:
                                    hi = min(dcaps[j], (t - others) / block_p[b])
                                else:
                                    hi = dcaps[j]
                                hi = max(0.0, hi)
                                line = np.clip(
                                    np.arange(0.0, hi + step, step), 0.0, hi
                                )
                                line = np.append(line, x_free[j])
                                fv = np.tile(x_free, (line.size, 1))
                                fv[:, j] = line
                                cands = assemble(det, free, fv)
                                if not len(cands):
                                    continue
                                x, r = eval_cands(cands)
                                if r < best_r:
                                    best_x, best_r = x, r
                                    x_free = x[free].copy()
                                    improved = True
                            if not improved:
                                break
                    if not best_r < r_before:
                        break
        return best_x, best_r

    centre = np.full(nb, vrange / 2.0)
    halfw = vrange / 2.0
    best_x = np.zeros(nb)
    best_r = schedule_risk(coupling, partition, best_x)
    while True:
        axes = [np.linspace(c - halfw, c + halfw, 11) for c in centre]
        grid = np.stack(
            [g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1
        )
        grid = np.clip(grid, 0.0, None)
        x, r = eval_cands(grid)
        if r < best_r:
            best_x, best_r = x, r
        step = halfw / 5.0
        if step <= target_step:
            break
        centre = best_x
        halfw = 2.0 * step
    return best_x, best_r
