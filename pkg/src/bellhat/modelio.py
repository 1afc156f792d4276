"""JSON schemas for scenarios, models, verdicts, and certificates.

Model documents look like::

    {"scenario": {"parties": [...], "inputs": [...], "outcomes": [...]},
     "table": [{"input": [...], "dist": [{"outcome": [...], "p": 0.5}, ...]},
               ...]}

The table must cover every joint input exactly once and each distribution
must be normalized within the package tolerance.  Symbols are JSON scalars
(strings or numbers); party identifiers are arbitrary JSON scalars.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .core import BellScenario, FiniteDist
from .errors import ValidationError
from .nosignalling import EmpiricalModel, HiddenVariableMeasure, ResponseFunction


def _as_symbol_list(value: Any, what: str) -> tuple:
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{what} must be a nonempty list")
    for v in value:
        if not isinstance(v, (str, int, float, bool)):
            raise ValidationError(f"{what} entries must be JSON scalars")
    return tuple(value)


def scenario_to_json(scenario: BellScenario) -> dict:
    return {"parties": list(scenario.parties),
            "inputs": list(scenario.inputs),
            "outcomes": list(scenario.outcomes)}


def scenario_from_json(doc: Any) -> BellScenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be an object")
    return BellScenario(parties=_as_symbol_list(doc.get("parties"), "parties"),
                        inputs=_as_symbol_list(doc.get("inputs"), "inputs"),
                        outcomes=_as_symbol_list(doc.get("outcomes"), "outcomes"))


def model_to_json(e: EmpiricalModel) -> dict:
    table = []
    for x, d in e.items():
        table.append({"input": list(x),
                      "dist": [{"outcome": list(o), "p": p}
                               for o, p in d.support]})
    return {"scenario": scenario_to_json(e.scenario), "table": table}


def model_from_json(doc: Any) -> EmpiricalModel:
    if not isinstance(doc, dict):
        raise ValidationError("model document must be an object")
    scenario = scenario_from_json(doc.get("scenario"))
    rows = doc.get("table")
    if not isinstance(rows, list):
        raise ValidationError("table must be a list")
    table = {}
    for row in rows:
        if not isinstance(row, dict) or "input" not in row or "dist" not in row:
            raise ValidationError("table rows need 'input' and 'dist'")
        x = tuple(row["input"])
        if x in table:
            raise ValidationError(f"joint input {x!r} appears twice")
        entries = row["dist"]
        if not isinstance(entries, list):
            raise ValidationError("dist must be a list")
        probs = {}
        for entry in entries:
            if not isinstance(entry, dict) or "outcome" not in entry or "p" not in entry:
                raise ValidationError("dist entries need 'outcome' and 'p'")
            o = tuple(entry["outcome"])
            if o in probs:
                raise ValidationError(f"outcome {o!r} appears twice at {x!r}")
            p = entry["p"]
            if not isinstance(p, (int, float)) or isinstance(p, bool):
                raise ValidationError("probabilities must be numbers")
            probs[o] = float(p)
        table[x] = FiniteDist(scenario.parties, scenario.outcomes, probs)
    return EmpiricalModel(scenario, table)


def load_model(path: str | Path) -> EmpiricalModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file is not valid JSON: {exc}") from exc
    return model_from_json(doc)


def save_model(e: EmpiricalModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model_to_json(e)) + "\n", encoding="utf-8")


def certificate_from_json(doc: Any, scenario: BellScenario) -> HiddenVariableMeasure:
    if not isinstance(doc, dict) or "support" not in doc:
        raise ValidationError("certificate needs a 'support' list")
    support = []
    for item in doc["support"]:
        mapping = {}
        for triple in item.get("function", []):
            if not isinstance(triple, list) or len(triple) != 3:
                raise ValidationError("function entries are [party, input, outcome]")
            party, inp, out = triple
            mapping[(party, inp)] = out
        support.append((ResponseFunction.from_mapping(scenario, mapping),
                        float(item.get("weight", 0.0))))
    return HiddenVariableMeasure(support)


def dumps(doc: Any) -> str:
    """Canonical serialization: stable key order, no whitespace drift."""
    return json.dumps(doc, indent=2, sort_keys=True)
