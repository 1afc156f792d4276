"""Seeded random generators for scenarios, measures, models, and functions.

Used by the property and acceptance suites.  All draws go through the
package's counter-based streams, so a generator call is reproducible from its
key alone.  Weight vectors are drawn independently uniform and normalized;
signalling perturbations move a fixed epsilon of mass between two outcomes
conditional on a remote party's input, so a correct checker must flag them
well above tolerance.
"""

from __future__ import annotations

import itertools

from .core import BellScenario, FiniteDist, convex_combination, truncate_countable
from .errors import ValidationError
from .nosignalling import (
    EmpiricalModel,
    HiddenVariableMeasure,
    JointFunction,
    ResponseFunction,
    local_model,
    mix_models,
    pr_box,
)
from .rng import Rng

SIGNALLING_EPS = 0.05


def random_scenario(rng: Rng, max_parties: int = 3, max_inputs: int = 3,
                    max_outcomes: int = 3, min_parties: int = 1,
                    min_inputs: int = 1, min_outcomes: int = 1) -> BellScenario:
    n_j = min_parties + rng.randrange(max_parties - min_parties + 1)
    n_i = min_inputs + rng.randrange(max_inputs - min_inputs + 1)
    n_o = min_outcomes + rng.randrange(max_outcomes - min_outcomes + 1)
    return BellScenario(parties=tuple(f"p{k}" for k in range(n_j)),
                        inputs=tuple(range(n_i)),
                        outcomes=tuple(range(n_o)))


def random_response_function(rng: Rng, scenario: BellScenario) -> ResponseFunction:
    slots = len(scenario.parties) * len(scenario.inputs)
    return ResponseFunction(
        scenario, tuple(rng.choice(scenario.outcomes) for _ in range(slots)))


def random_weights(rng: Rng, count: int) -> list[float]:
    raw = [rng.uniform() for _ in range(count)]
    total = sum(raw)
    if total <= 0.0:
        return [1.0 / count] * count
    return [w / total for w in raw]


def random_hidden_variable_measure(rng: Rng, scenario: BellScenario,
                                   max_support: int = 5) -> HiddenVariableMeasure:
    size = 1 + rng.randrange(max_support)
    functions: dict[ResponseFunction, float] = {}
    for _ in range(size):
        functions[random_response_function(rng, scenario)] = 0.0
    weights = random_weights(rng, len(functions))
    return HiddenVariableMeasure(list(zip(functions.keys(), weights)))


def random_local_model(rng: Rng, scenario: BellScenario | None = None,
                       max_support: int = 5) -> EmpiricalModel:
    if scenario is None:
        scenario = random_scenario(rng)
    mu = random_hidden_variable_measure(rng, scenario, max_support=max_support)
    return local_model(mu, scenario)


def random_dist(rng: Rng, parties: tuple, alphabet: tuple) -> FiniteDist:
    points = list(itertools.product(alphabet, repeat=len(parties)))
    weights = random_weights(rng, len(points))
    return FiniteDist(parties, alphabet, dict(zip(points, weights)))


def random_model(rng: Rng, scenario: BellScenario | None = None) -> EmpiricalModel:
    """Arbitrary (usually signalling) model: independent table rows."""
    if scenario is None:
        scenario = random_scenario(rng)
    table = {x: random_dist(rng, scenario.parties, scenario.outcomes)
             for x in scenario.joint_inputs()}
    return EmpiricalModel(scenario, table)


def uniform_product_model(scenario: BellScenario) -> EmpiricalModel:
    points = list(itertools.product(scenario.outcomes,
                                    repeat=len(scenario.parties)))
    p = 1.0 / len(points)
    d = FiniteDist(scenario.parties, scenario.outcomes,
                   {o: p for o in points})
    return EmpiricalModel(scenario, {x: d for x in scenario.joint_inputs()})


def perturb_signalling(rng: Rng, e: EmpiricalModel,
                       eps: float = SIGNALLING_EPS) -> EmpiricalModel:
    """Move eps of mass between outcomes differing at one party, at a single
    joint input.  Flipping a remote party's input then shifts the perturbed
    party's marginal by eps, which any sound checker must flag.

    Requires at least two parties and two outcomes.
    """
    scenario = e.scenario
    if (len(scenario.parties) < 2 or len(scenario.outcomes) < 2
            or len(scenario.inputs) < 2):
        raise ValidationError("signalling perturbation needs >=2 parties, "
                              "inputs, and outcomes")
    xs = list(e.inputs())
    for _ in range(64):
        x = xs[rng.randrange(len(xs))]
        pi = rng.randrange(len(scenario.parties))
        d = e.dist(x)
        for values, p in rng.shuffled(d.support):
            if p < eps:
                continue
            others = [o for o in scenario.outcomes if o != values[pi]]
            target = values[:pi] + (rng.choice(others),) + values[pi + 1:]
            probs = {vs: q for vs, q in d.support}
            probs[values] = p - eps
            probs[target] = probs.get(target, 0.0) + eps
            table = {k: v for k, v in e.items()}
            table[x] = FiniteDist(scenario.parties, scenario.outcomes, probs)
            return EmpiricalModel(scenario, table)
    raise ValidationError("no support point carries enough mass to perturb")


def random_ns_model(rng: Rng, scenario: BellScenario | None = None) -> EmpiricalModel:
    """No-signalling sample: local mixture, optionally blended with a
    nonlocal no-signalling box on the 2x2x2 scenario."""
    if scenario is None:
        scenario = random_scenario(rng)
    base = random_local_model(rng, scenario)
    box = pr_box()
    if scenario == box.scenario and rng.bit():
        lam = rng.uniform()
        return mix_models([(lam, box), (1.0 - lam, base)])
    return base


def random_geometric_mixture(rng: Rng, models: list[EmpiricalModel]) -> EmpiricalModel:
    """Truncated countable mixture with geometric weights over given models."""
    weights = truncate_countable(2.0 ** -(j + 1) for j in itertools.count())
    terms = [(w, models[i % len(models)]) for i, w in enumerate(weights)]
    return mix_models(terms)


def random_functional_joint_function(rng: Rng,
                                     scenario: BellScenario) -> JointFunction:
    """Per-party-input deterministic function (passes the functional check)."""
    rf = random_response_function(rng, scenario)
    return JointFunction.from_response(rf)


def random_violating_joint_function(rng: Rng,
                                    scenario: BellScenario) -> JointFunction:
    """Deterministic function guaranteed to fail the functional check.

    Starts per-party-input deterministic, then rewrites one party's outcome at
    one joint input; some other input sharing that party's symbol keeps the
    old outcome, so the dependence is on a remote coordinate.
    """
    if (len(scenario.parties) < 2 or len(scenario.outcomes) < 2
            or len(scenario.inputs) < 2):
        raise ValidationError("violation needs >=2 parties, inputs, outcomes")
    f = random_functional_joint_function(rng, scenario)
    table = {x: o for x, o in f.items()}
    xs = list(table.keys())
    x = xs[rng.randrange(len(xs))]
    pi = rng.randrange(len(scenario.parties))
    old = table[x][pi]
    new = rng.choice([o for o in scenario.outcomes if o != old])
    table[x] = table[x][:pi] + (new,) + table[x][pi + 1:]
    return JointFunction(scenario, table)
