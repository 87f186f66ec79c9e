"""Couplings: joint laws gluing the factual and counterfactual runs.

A coupling is an n x n matrix of probability mass, rows indexed by the
counterfactual outcome and columns by the factual one.  Row sums must
reproduce the counterfactual marginal and column sums the factual
marginal.  Three constructions are supported:

* evidence: an explicitly supplied matrix (or deterministic outcome map),
  checked against the case marginals;
* independence: the outer product of the marginals;
* least divergence: the joint minimizing the expected squared value gap,
  which for fixed marginals is the comonotone (value-sorted) matching.

An exhaustive oracle is included for testing: every vertex of the
transportation polytope is a northwest-corner solution under some pair of
row/column orderings, so enumerating orderings finds the exact minimum
for small spaces.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .outcome import CaseModel, OutcomeSpace

# A coupling's total mass must be 1 within this tolerance.
MASS_SUM_TOL = 1e-12
# Row/column sums must match the case marginals within this tolerance.
MARGINAL_TOL = 1e-10

_ORACLE_MAX_OUTCOMES = 6


@dataclass(frozen=True)
class Coupling:
    """Joint law over (counterfactual outcome, factual outcome)."""

    space: OutcomeSpace
    joint: np.ndarray

    def __post_init__(self) -> None:
        j = np.array(self.joint, dtype=float)
        n = self.space.size
        if j.shape != (n, n):
            raise ValueError(f"joint has shape {j.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(j)):
            raise ValueError("joint contains non-finite mass")
        if np.any(j < -1e-15):
            i, k = map(int, np.argwhere(j < -1e-15)[0])
            raise ValueError(f"negative mass {j[i, k]!r} at ({i}, {k})")
        np.clip(j, 0.0, None, out=j)
        total = float(j.sum())
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise ValueError(f"joint mass sums to {total!r}, not 1")
        j.setflags(write=False)
        object.__setattr__(self, "joint", j)

    @property
    def counterfactual_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def factual_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def to_csv_rows(self) -> list[tuple[str, str, float]]:
        """(counterfactual label, factual label, mass) for positive cells."""
        labels = self.space.labels
        return [
            (labels[i], labels[k], float(self.joint[i, k]))
            for i in range(self.space.size)
            for k in range(self.space.size)
            if self.joint[i, k] > 0.0
        ]


def transport_cost(coupling: Coupling) -> float:
    """Expected squared value gap E[(V0 - V1)^2] under the coupling."""
    v = coupling.space.values_array
    d = v[:, None] - v[None, :]
    return float(np.einsum("ij,ij->", coupling.joint, d * d))


def _check_marginals(model: CaseModel, joint: np.ndarray) -> None:
    rows = joint.sum(axis=1)
    cols = joint.sum(axis=0)
    cf = model.counterfactual.array
    f = model.factual.array
    labels = model.space.labels
    for i in range(model.space.size):
        if abs(rows[i] - cf[i]) > MARGINAL_TOL:
            raise ValueError(
                f"counterfactual marginal mismatch at row {i} ({labels[i]!r}): "
                f"coupling gives {rows[i]!r}, case says {cf[i]!r}"
            )
    for k in range(model.space.size):
        if abs(cols[k] - f[k]) > MARGINAL_TOL:
            raise ValueError(
                f"factual marginal mismatch at column {k} ({labels[k]!r}): "
                f"coupling gives {cols[k]!r}, case says {f[k]!r}"
            )


def evidence_coupling(model: CaseModel, joint) -> Coupling:
    """Wrap an explicitly supplied joint matrix, checking it against the case."""
    j = np.array(joint, dtype=float)
    n = model.space.size
    if j.shape != (n, n):
        raise ValueError(f"evidence joint has shape {j.shape}, expected {(n, n)}")
    _check_marginals(model, j)
    return Coupling(model.space, j)


def coupling_from_map(model: CaseModel, mapping: dict[str, str]) -> Coupling:
    """Expand a deterministic counterfactual-to-factual outcome map.

    Each counterfactual outcome sends its whole mass to one factual
    outcome.  Every counterfactual outcome with positive mass must be
    mapped.
    """
    n = model.space.size
    j = np.zeros((n, n))
    cf = model.counterfactual.array
    for src, dst in mapping.items():
        j[model.space.index(src), model.space.index(dst)] += cf[model.space.index(src)]
    for i in model.counterfactual.support():
        if model.space.labels[i] not in mapping:
            raise ValueError(
                f"deterministic map misses counterfactual outcome "
                f"{model.space.labels[i]!r} (mass {cf[i]!r})"
            )
    _check_marginals(model, j)
    return Coupling(model.space, j)


def independence_coupling(model: CaseModel) -> Coupling:
    """Outer product of the marginals: the runs share no information."""
    j = np.outer(model.counterfactual.array, model.factual.array)
    return Coupling(model.space, j)


def _sorted_support(keys, weights) -> list[tuple[int, float]]:
    # Stable sort on the key keeps equal-keyed entries in label order.
    order = sorted(
        (i for i, w in enumerate(weights) if w > 0.0),
        key=lambda i: (keys[i], i),
    )
    return [(i, float(weights[i])) for i in order]


def comonotone_matrix(row_weights, col_weights, row_keys, col_keys) -> np.ndarray:
    """Mass matrix pairing two marginals in increasing key order.

    Both supports are swept lowest key first, matching mass greedily, so
    high row keys land on high column keys.  Key ties are broken by index
    order, which pins down one matrix when several qualify.
    """
    rows = _sorted_support(row_keys, row_weights)
    cols = _sorted_support(col_keys, col_weights)
    j = np.zeros((len(row_weights), len(col_weights)))
    ri = ci = 0
    r_rem = rows[0][1] if rows else 0.0
    c_rem = cols[0][1] if cols else 0.0
    while ri < len(rows) and ci < len(cols):
        take = min(r_rem, c_rem)
        if take > 0.0:
            j[rows[ri][0], cols[ci][0]] += take
        r_rem -= take
        c_rem -= take
        if r_rem <= 1e-15:
            ri += 1
            r_rem = rows[ri][1] if ri < len(rows) else 0.0
        if c_rem <= 1e-15:
            ci += 1
            c_rem = cols[ci][1] if ci < len(cols) else 0.0
    return j


def least_divergence_coupling(model: CaseModel) -> Coupling:
    """Comonotone matching: sort both supports by value and sweep.

    Among all joints with the case marginals this minimizes the expected
    squared value gap.  Value ties are broken by label order, which pins
    down one minimizer when several exist.
    """
    v = model.space.values
    j = comonotone_matrix(
        model.counterfactual.weights, model.factual.weights, v, v
    )
    return Coupling(model.space, j)


def _nw_cost(
    row_order: tuple[int, ...],
    col_order: tuple[int, ...],
    row_mass: list[float],
    col_mass: list[float],
    sq: list[list[float]],
) -> float:
    """Cost of the northwest-corner solution for the given orderings."""
    cost = 0.0
    ri = ci = 0
    r_rem = row_mass[row_order[0]]
    c_rem = col_mass[col_order[0]]
    nr, nc = len(row_order), len(col_order)
    while True:
        take = r_rem if r_rem < c_rem else c_rem
        cost += take * sq[row_order[ri]][col_order[ci]]
        r_rem -= take
        c_rem -= take
        if r_rem <= 1e-15:
            ri += 1
            if ri == nr:
                break
            r_rem = row_mass[row_order[ri]]
        if c_rem <= 1e-15:
            ci += 1
            if ci == nc:
                break
            c_rem = col_mass[col_order[ci]]
    return cost


def _nw_fill(row_order, col_order, row_mass, col_mass, n) -> np.ndarray:
    j = np.zeros((n, n))
    ri = ci = 0
    r_rem = row_mass[row_order[0]]
    c_rem = col_mass[col_order[0]]
    while True:
        take = r_rem if r_rem < c_rem else c_rem
        j[row_order[ri], col_order[ci]] += take
        r_rem -= take
        c_rem -= take
        if r_rem <= 1e-15:
            ri += 1
            if ri == len(row_order):
                break
            r_rem = row_mass[row_order[ri]]
        if c_rem <= 1e-15:
            ci += 1
            if ci == len(col_order):
                break
            c_rem = col_mass[col_order[ci]]
    return j


def oracle_min_cost(model: CaseModel) -> tuple[Coupling, float]:
    """Exact minimum transport cost by enumerating polytope vertices.

    Every basic feasible solution of a transportation problem is the
    northwest-corner solution under some ordering of rows and columns, so
    trying all ordering pairs visits every vertex.  Factorial blowup
    limits this to supports of at most 6 outcomes per side; larger models
    are refused.
    """
    v = model.space.values
    row_sup = list(model.counterfactual.support())
    col_sup = list(model.factual.support())
    if len(row_sup) > _ORACLE_MAX_OUTCOMES or len(col_sup) > _ORACLE_MAX_OUTCOMES:
        raise ValueError(
            f"oracle refuses support sizes {len(row_sup)}x{len(col_sup)}; "
            f"enumeration is exhaustive only up to "
            f"{_ORACLE_MAX_OUTCOMES}x{_ORACLE_MAX_OUTCOMES}"
        )
    row_mass = [float(w) for w in model.counterfactual.weights]
    col_mass = [float(w) for w in model.factual.weights]
    sq = [[(a - b) ** 2 for b in v] for a in v]
    best = math.inf
    best_orders = None
    for ro in itertools.permutations(row_sup):
        for co in itertools.permutations(col_sup):
            c = _nw_cost(ro, co, row_mass, col_mass, sq)
            if c < best:
                best = c
                best_orders = (ro, co)
    assert best_orders is not None
    j = _nw_fill(best_orders[0], best_orders[1], row_mass, col_mass, model.space.size)
    return Coupling(model.space, j), best
