"""JSON case files: one case per file, loaded strictly.

Two forms exist.  The outcome form gives the shared outcome space, both
marginals, a money map, and optionally an evidence coupling (a full
matrix or a deterministic outcome map).  The choice form instead
carries a lost-choice block.  Policies are deliberately not part of the
file; they are selected per run through command-line flags.

Unknown keys are rejected everywhere, and all structural problems are
reported together.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .choice import ChoiceCaseModel, validate_choice_case
from .outcome import (
    CaseModel,
    CaseValidationError,
    CurveMoneyMap,
    DiscreteDistribution,
    IdentityMoneyMap,
    MoneyMap,
    OutcomeSpace,
    TabulatedMoneyMap,
    UtilityCurve,
    validate_case,
)

_TOP_KEYS_OUTCOME = {
    "outcomes",
    "counterfactual",
    "factual",
    "observed",
    "money",
    "evidence_coupling",
}
_TOP_KEYS_CHOICE = {"choice", "money"}
_CHOICE_KEYS = {
    "choices",
    "duty",
    "results",
    "values",
    "counterfactual_choice",
    "result_given_choice_counterfactual",
    "result_given_choice_factual",
    "factual_choice",
    "factual_result",
    "result_couplings",
    "notes",
}
_MONEY_KEYS = {"identity": set(), "crra": {"theta"}, "tabulated": {"points"}}

SCHEMA_TEXT = """\
Case file grammar (JSON, one case per file)

Outcome form:
  {
    "outcomes":       [{"label": str, "value": number}, ...],
    "counterfactual": {label: weight, ...},   # weights sum to 1
    "factual":        {label: weight, ...},
    "observed":       label,                  # optional
    "money":          MONEY,
    "evidence_coupling":                      # optional
        {"matrix": [[mass, ...], ...]}        # rows: counterfactual outcome
      | {"map": {from_label: to_label, ...}}  # deterministic, expanded
  }

Choice form:
  {
    "money":  MONEY,
    "choice": {
      "choices":  [str, ...],
      "duty":     [str, ...],                 # non-empty subset of choices
      "results":  [str, ...],
      "values":   [[number, ...], ...],       # choices x results
      "counterfactual_choice": {choice: weight, ...} | null,
      "result_given_choice_counterfactual": {choice: {result: weight}},
      "result_given_choice_factual":        {choice: {result: weight}},
      "factual_choice": str,
      "factual_result": str,
      "result_couplings": {choice: [[mass, ...], ...]},  # optional
      "notes": [str, ...]                                # optional
    }
  }

MONEY is one of:
  {"kind": "identity"}
  {"kind": "crra", "theta": number in [0, 1]}
  {"kind": "tabulated", "points": [[value, money], ...]}  # strictly increasing

Policies (information / connection / indemnity) are not part of the
file; pass them as command-line flags.
"""


@dataclass(eq=False)
class LoadedCase:
    """What a case file parses to."""

    case: Union[CaseModel, ChoiceCaseModel]
    evidence_joint: Optional[np.ndarray]
    kind: str  # "outcome" or "choice"


def _money_from_spec(data, errs: list[str]) -> MoneyMap:
    if not isinstance(data, dict) or "kind" not in data:
        errs.append("money must be an object with a 'kind' field")
        return IdentityMoneyMap()
    kind = data["kind"]
    if kind not in _MONEY_KEYS:
        errs.append(f"unknown money kind {kind!r}; expected one of {sorted(_MONEY_KEYS)}")
        return IdentityMoneyMap()
    extra = set(data) - {"kind"} - _MONEY_KEYS[kind]
    if extra:
        errs.append(f"unknown keys in money spec: {sorted(extra)}")
    missing = _MONEY_KEYS[kind] - set(data)
    if missing:
        errs.append(f"money spec of kind {kind!r} is missing {sorted(missing)}")
        return IdentityMoneyMap()
    try:
        if kind == "identity":
            return IdentityMoneyMap()
        if kind == "crra":
            return CurveMoneyMap(UtilityCurve(float(data["theta"])))
        return TabulatedMoneyMap(tuple((v, m) for v, m in data["points"]))
    except (TypeError, ValueError) as exc:
        errs.append(f"bad money spec: {exc}")
        return IdentityMoneyMap()


def _weights_from_dict(
    data, labels: tuple[str, ...], name: str, errs: list[str]
) -> DiscreteDistribution:
    weights = [0.0] * len(labels)
    if not isinstance(data, dict):
        errs.append(f"{name} must be an object mapping labels to weights")
        return DiscreteDistribution(tuple(weights))
    for lab, w in data.items():
        if lab not in labels:
            errs.append(f"{name} refers to unknown label {lab!r}")
            continue
        try:
            weights[labels.index(lab)] = float(w)
        except (TypeError, ValueError):
            errs.append(f"{name} weight for {lab!r} is not a number")
    return DiscreteDistribution(tuple(weights))


def _reject_policy_keys(data: dict, errs: list[str]) -> None:
    for key in ("policy", "policies", "policy_list"):
        if key in data:
            errs.append(
                f"case files do not carry policies ({key!r} found); select "
                f"them with the --info/--connection/--indemnity flags"
            )


def _load_outcome_form(data: dict) -> LoadedCase:
    errs: list[str] = []
    _reject_policy_keys(data, errs)
    extra = set(data) - _TOP_KEYS_OUTCOME
    extra -= {"policy", "policies", "policy_list"}
    if extra:
        errs.append(f"unknown top-level keys: {sorted(extra)}")
    missing = {"outcomes", "counterfactual", "factual", "money"} - set(data)
    if missing:
        errs.append(f"missing required keys: {sorted(missing)}")
        raise CaseValidationError(errs)
    labels: list[str] = []
    values: list[float] = []
    if not isinstance(data["outcomes"], list) or not data["outcomes"]:
        errs.append("outcomes must be a non-empty list")
    else:
        for i, entry in enumerate(data["outcomes"]):
            if (
                not isinstance(entry, dict)
                or set(entry) != {"label", "value"}
            ):
                errs.append(
                    f"outcomes[{i}] must be an object with exactly "
                    f"'label' and 'value'"
                )
                continue
            labels.append(str(entry["label"]))
            try:
                values.append(float(entry["value"]))
            except (TypeError, ValueError):
                errs.append(f"outcomes[{i}] value is not a number")
                values.append(0.0)
    if not labels:
        raise CaseValidationError(errs or ["no outcomes"])
    space = OutcomeSpace(tuple(labels), tuple(values))
    counterfactual = _weights_from_dict(
        data["counterfactual"], space.labels, "counterfactual", errs
    )
    factual = _weights_from_dict(data["factual"], space.labels, "factual", errs)
    money = _money_from_spec(data["money"], errs)
    observed = None
    if "observed" in data:
        lab = str(data["observed"])
        if lab not in space.labels:
            errs.append(f"observed outcome {lab!r} is not in the outcome space")
        else:
            observed = space.labels.index(lab)
    evidence = None
    if "evidence_coupling" in data:
        ev = data["evidence_coupling"]
        if not isinstance(ev, dict) or set(ev) not in ({"matrix"}, {"map"}):
            errs.append(
                "evidence_coupling must be an object with exactly one of "
                "'matrix' or 'map'"
            )
        elif "matrix" in ev:
            mat = np.asarray(ev["matrix"], dtype=float)
            if mat.shape != (space.size, space.size):
                errs.append(
                    f"evidence matrix has shape {mat.shape}, expected "
                    f"{(space.size, space.size)}"
                )
            else:
                evidence = mat
        else:
            mapping = ev["map"]
            if not isinstance(mapping, dict):
                errs.append("evidence map must be an object of label pairs")
            else:
                bad = [
                    lab
                    for pair in mapping.items()
                    for lab in pair
                    if lab not in space.labels
                ]
                if bad:
                    errs.append(
                        f"evidence map refers to unknown labels {sorted(set(bad))}"
                    )
                else:
                    j = np.zeros((space.size, space.size))
                    for src, dst in mapping.items():
                        j[space.index(src), space.index(dst)] += (
                            counterfactual.weights[space.index(src)]
                        )
                    evidence = j
    if errs:
        raise CaseValidationError(errs)
    case = validate_case(
        CaseModel(
            space=space,
            counterfactual=counterfactual,
            factual=factual,
            money=money,
            factual_observed=observed,
        )
    )
    return LoadedCase(case=case, evidence_joint=evidence, kind="outcome")


def _load_choice_form(data: dict) -> LoadedCase:
    errs: list[str] = []
    _reject_policy_keys(data, errs)
    extra = set(data) - _TOP_KEYS_CHOICE - {"policy", "policies", "policy_list"}
    if extra:
        errs.append(f"unknown top-level keys: {sorted(extra)}")
    if "money" not in data:
        errs.append("missing required keys: ['money']")
        raise CaseValidationError(errs)
    block = data["choice"]
    if not isinstance(block, dict):
        raise CaseValidationError(errs + ["choice must be an object"])
    extra = set(block) - _CHOICE_KEYS
    if extra:
        errs.append(f"unknown keys in choice block: {sorted(extra)}")
    required = _CHOICE_KEYS - {"result_couplings", "notes"}
    missing = required - set(block)
    if missing:
        errs.append(f"choice block is missing {sorted(missing)}")
        raise CaseValidationError(errs)
    choices = tuple(str(c) for c in block["choices"])
    results = tuple(str(r) for r in block["results"])

    def cond_table(key: str) -> tuple[DiscreteDistribution, ...]:
        table = block[key]
        out = []
        if not isinstance(table, dict):
            errs.append(f"{key} must be an object keyed by choice")
            return tuple(
                DiscreteDistribution((0.0,) * len(results)) for _ in choices
            )
        unknown = set(table) - set(choices)
        if unknown:
            errs.append(f"{key} keys {sorted(unknown)} are not choices")
        for c in choices:
            if c not in table:
                errs.append(f"{key} is missing choice {c!r}")
                out.append(DiscreteDistribution((0.0,) * len(results)))
            else:
                out.append(
                    _weights_from_dict(table[c], results, f"{key}[{c!r}]", errs)
                )
        return tuple(out)

    cf_conds = cond_table("result_given_choice_counterfactual")
    f_conds = cond_table("result_given_choice_factual")
    evidence = block["counterfactual_choice"]
    cf_choice = None
    if evidence is not None:
        cf_choice = _weights_from_dict(
            evidence, choices, "counterfactual_choice", errs
        )
    couplings = None
    if block.get("result_couplings") is not None:
        raw = block["result_couplings"]
        if not isinstance(raw, dict):
            errs.append("result_couplings must be an object keyed by choice")
        else:
            couplings = tuple(
                (str(c), tuple(tuple(float(x) for x in row) for row in m))
                for c, m in raw.items()
            )
    money = _money_from_spec(data["money"], errs)
    if errs:
        raise CaseValidationError(errs)
    model = validate_choice_case(
        ChoiceCaseModel(
            choices=choices,
            duty=frozenset(str(c) for c in block["duty"]),
            results=results,
            values=tuple(tuple(float(x) for x in row) for row in block["values"]),
            money=money,
            result_given_choice_cf=cf_conds,
            result_given_choice_f=f_conds,
            factual_choice=str(block["factual_choice"]),
            factual_result=str(block["factual_result"]),
            counterfactual_choice=cf_choice,
            result_couplings=couplings,
            notes=tuple(str(n) for n in block.get("notes", ())),
        )
    )
    return LoadedCase(case=model, evidence_joint=None, kind="choice")


def parse_case(data: dict) -> LoadedCase:
    if not isinstance(data, dict):
        raise CaseValidationError(["case file must contain a JSON object"])
    if "choice" in data:
        return _load_choice_form(data)
    return _load_outcome_form(data)


def load_case(path) -> LoadedCase:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseValidationError([f"invalid JSON: {exc}"]) from exc
    return parse_case(data)


def dump_case(
    case: Union[CaseModel, ChoiceCaseModel],
    evidence_joint: Optional[np.ndarray] = None,
) -> dict:
    """Serializable dict that parses back to an equal case."""
    if isinstance(case, ChoiceCaseModel):
        block: dict = {
            "choices": list(case.choices),
            "duty": sorted(case.duty),
            "results": list(case.results),
            "values": [list(row) for row in case.values],
            "counterfactual_choice": (
                None
                if case.counterfactual_choice is None
                else dict(zip(case.choices, case.counterfactual_choice.weights))
            ),
            "result_given_choice_counterfactual": {
                c: dict(zip(case.results, d.weights))
                for c, d in zip(case.choices, case.result_given_choice_cf)
            },
            "result_given_choice_factual": {
                c: dict(zip(case.results, d.weights))
                for c, d in zip(case.choices, case.result_given_choice_f)
            },
            "factual_choice": case.factual_choice,
            "factual_result": case.factual_result,
        }
        if case.result_couplings is not None:
            block["result_couplings"] = {
                c: [list(row) for row in m] for c, m in case.result_couplings
            }
        if case.notes:
            block["notes"] = list(case.notes)
        return {"money": case.money.spec(), "choice": block}
    data: dict = {
        "outcomes": [
            {"label": lab, "value": val}
            for lab, val in zip(case.space.labels, case.space.values)
        ],
        "counterfactual": dict(zip(case.space.labels, case.counterfactual.weights)),
        "factual": dict(zip(case.space.labels, case.factual.weights)),
        "money": case.money.spec(),
    }
    if case.factual_observed is not None:
        data["observed"] = case.space.labels[case.factual_observed]
    if evidence_joint is not None:
        data["evidence_coupling"] = {
            "matrix": [list(map(float, row)) for row in np.asarray(evidence_joint)]
        }
    return data


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written file.  Newlines are always LF."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_case(
    path,
    case: Union[CaseModel, ChoiceCaseModel],
    evidence_joint: Optional[np.ndarray] = None,
) -> None:
    atomic_write_text(path, json.dumps(dump_case(case, evidence_joint), indent=2) + "\n")
