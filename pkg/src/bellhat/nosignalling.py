"""Empirical models, no-signalling checks, and locality.

An empirical model assigns a distribution over joint outcomes to every joint
input.  It is no-signalling when, for every pair of joint inputs, the two
distributions marginalized onto the parties where the inputs agree coincide.
Models generated by a measure over deterministic response functions (one
outcome per party per input) are local; locality implies no-signalling via
functoriality of marginalization, and both facts are checked empirically here
rather than assumed.

Deterministic joint input -> joint outcome functions get the same treatment:
if each party's outcome depends only on its own input, the function collapses
to a per-party response table, whose point-mass model is local.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    PROB_ATOL,
    BellScenario,
    FiniteDist,
    JointAssignment,
    Symbol,
    convex_combination,
    dirac,
    marginalize,
    max_deviation,
)
from .errors import CapacityError, ContractError, DomainError, ValidationError

#: Tabular guard: number of joint inputs an EmpiricalModel may enumerate.
MAX_JOINT_INPUTS = 10 ** 6

#: Guard for locality decisions: number of deterministic response functions.
MAX_RESPONSE_FUNCTIONS = 4096


class EmpiricalModel:
    """A table joint input -> FiniteDist over joint outcomes.

    Immutable by convention after construction; the table is keyed by joint
    input value tuples in the scenario's party order.
    """

    __slots__ = ("scenario", "_table")

    def __init__(self, scenario: BellScenario,
                 table: Mapping[tuple, FiniteDist]):
        n = scenario.n_joint_inputs()
        if n > MAX_JOINT_INPUTS:
            raise CapacityError(f"{n} joint inputs exceeds the tabular guard")
        table = {tuple(k): v for k, v in table.items()}
        for x in scenario.joint_inputs():
            if x not in table:
                raise ValidationError(f"table is missing joint input {x!r}")
        if len(table) != n:
            raise ValidationError("table has entries outside the input space")
        for x, d in table.items():
            if d.parties != scenario.parties:
                raise DomainError(f"distribution at {x!r} is over wrong parties")
            if d.alphabet != scenario.outcomes:
                raise DomainError(f"distribution at {x!r} is over wrong alphabet")
        self.scenario = scenario
        self._table = {x: table[x] for x in scenario.joint_inputs()}

    def dist(self, x: Sequence[Symbol]) -> FiniteDist:
        try:
            return self._table[tuple(x)]
        except KeyError:
            raise DomainError(f"joint input {tuple(x)!r} not in model") from None

    def items(self):
        return iter(self._table.items())

    def inputs(self):
        return iter(self._table.keys())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmpiricalModel):
            return NotImplemented
        return self.scenario == other.scenario and self._table == other._table

    def __repr__(self) -> str:
        return (f"EmpiricalModel({len(self.scenario.parties)} parties, "
                f"{len(self._table)} inputs)")


def agreement_set(scenario: BellScenario, x: Sequence[Symbol],
                  y: Sequence[Symbol]) -> frozenset:
    """Parties on which joint inputs x and y choose the same symbol."""
    x, y = tuple(x), tuple(y)
    if len(x) != len(scenario.parties) or len(y) != len(scenario.parties):
        raise DomainError("joint inputs have the wrong arity for the scenario")
    allowed = set(scenario.inputs)
    for v in itertools.chain(x, y):
        if v not in allowed:
            raise DomainError(f"symbol {v!r} outside the input alphabet")
    return frozenset(p for p, a, b in zip(scenario.parties, x, y) if a == b)


@dataclass(frozen=True)
class NSWitness:
    """Worst marginal disagreement found by a no-signalling check."""

    x: tuple
    y: tuple
    agreement: tuple
    deviation: float

    def to_json(self) -> dict:
        return {"x": list(self.x), "y": list(self.y),
                "agreement": list(self.agreement), "deviation": self.deviation}


@dataclass(frozen=True)
class NSVerdict:
    passed: bool
    max_deviation: float
    tol: float
    pairs_checked: int
    witness: NSWitness | None = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_deviation": self.max_deviation,
                "tol": self.tol, "pairs_checked": self.pairs_checked,
                "witness": None if self.witness is None else self.witness.to_json()}


def _scan_pairs(e: EmpiricalModel, pairs, tol: float) -> NSVerdict:
    parties = e.scenario.parties
    cache: dict = {}

    def marginal(x: tuple, sub: frozenset) -> FiniteDist:
        key = (x, sub)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = marginalize(e.dist(x), sub)
        return hit

    worst = 0.0
    worst_witness: NSWitness | None = None
    checked = 0
    for x, y in pairs:
        checked += 1
        sub = frozenset(p for p, a, b in zip(parties, x, y) if a == b)
        dev = max_deviation(marginal(x, sub), marginal(y, sub))
        if dev > worst:
            worst = dev
            worst_witness = NSWitness(
                x=x, y=y,
                agreement=tuple(p for p in parties if p in sub),
                deviation=dev)
    passed = worst <= tol
    return NSVerdict(passed=passed, max_deviation=worst, tol=tol,
                     pairs_checked=checked,
                     witness=None if passed else worst_witness)


def is_no_signalling(e: EmpiricalModel, tol: float = PROB_ATOL) -> NSVerdict:
    """Check marginal consistency over every pair of joint inputs.

    Passes when, for all x, y, the marginals of e_x and e_y on their
    agreement set differ by at most ``tol`` pointwise.  On failure the verdict
    carries the single worst witnessing pair.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    xs = list(e.inputs())
    pairs = ((xs[i], xs[j])
             for i in range(len(xs)) for j in range(i + 1, len(xs)))
    return _scan_pairs(e, pairs, tol)


def is_no_signalling_fast(e: EmpiricalModel, tol: float = PROB_ATOL) -> NSVerdict:
    """Single-coordinate-flip variant of the no-signalling check.

    Only compares input pairs that differ at exactly one party, against the
    marginal on the other parties.  Agreement with the full pairwise check is
    validated by property tests, not assumed.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    scenario = e.scenario
    rank = {v: i for i, v in enumerate(scenario.inputs)}

    def flip_pairs():
        for x in e.inputs():
            for pi in range(len(scenario.parties)):
                for v in scenario.inputs:
                    if rank[v] <= rank[x[pi]]:
                        continue
                    y = x[:pi] + (v,) + x[pi + 1:]
                    yield x, y

    return _scan_pairs(e, flip_pairs(), tol)


class ResponseFunction:
    """Deterministic per-party response: (party, input) -> outcome.

    Stored as a flat tuple, party-major and input-minor in the scenario's
    declared orders, so response functions are hashable and enumerable.
    """

    __slots__ = ("scenario", "values")

    def __init__(self, scenario: BellScenario, values: Sequence[Symbol]):
        values = tuple(values)
        expect = len(scenario.parties) * len(scenario.inputs)
        if len(values) != expect:
            raise DomainError(f"response table needs {expect} entries, "
                              f"got {len(values)}")
        allowed = set(scenario.outcomes)
        for v in values:
            if v not in allowed:
                raise DomainError(f"outcome {v!r} outside the alphabet")
        self.scenario = scenario
        self.values = values

    @classmethod
    def from_mapping(cls, scenario: BellScenario,
                     mapping: Mapping[tuple, Symbol]) -> "ResponseFunction":
        values = []
        for party in scenario.parties:
            for inp in scenario.inputs:
                try:
                    values.append(mapping[(party, inp)])
                except KeyError:
                    raise DomainError(f"response map is not total: missing "
                                      f"({party!r}, {inp!r})") from None
        return cls(scenario, values)

    @classmethod
    def constant(cls, scenario: BellScenario, outcome: Symbol) -> "ResponseFunction":
        n = len(scenario.parties) * len(scenario.inputs)
        return cls(scenario, (outcome,) * n)

    @classmethod
    def echo(cls, scenario: BellScenario) -> "ResponseFunction":
        """f(j, i) = i; requires the inputs to be valid outcomes."""
        return cls(scenario, tuple(i for _ in scenario.parties
                                   for i in scenario.inputs))

    def __call__(self, party, inp) -> Symbol:
        try:
            pi = self.scenario.parties.index(party)
            ii = self.scenario.inputs.index(inp)
        except ValueError:
            raise DomainError(f"({party!r}, {inp!r}) outside the scenario") from None
        return self.values[pi * len(self.scenario.inputs) + ii]

    def outcome_for(self, x: Sequence[Symbol]) -> tuple:
        """Joint outcome produced on joint input x."""
        n_inputs = len(self.scenario.inputs)
        rank = {v: i for i, v in enumerate(self.scenario.inputs)}
        return tuple(self.values[pi * n_inputs + rank[v]]
                     for pi, v in enumerate(x))

    def __eq__(self, other):
        if not isinstance(other, ResponseFunction):
            return NotImplemented
        return self.scenario == other.scenario and self.values == other.values

    def __hash__(self):
        return hash((self.scenario, self.values))

    def __repr__(self):
        return f"ResponseFunction({self.values!r})"

    def to_json(self) -> list:
        return [[party, inp, self(party, inp)]
                for party in self.scenario.parties
                for inp in self.scenario.inputs]


def all_response_functions(scenario: BellScenario):
    """Enumerate every deterministic response function, canonical order."""
    slots = len(scenario.parties) * len(scenario.inputs)
    count = len(scenario.outcomes) ** slots
    if count > MAX_RESPONSE_FUNCTIONS:
        raise CapacityError(f"{count} response functions exceeds the "
                            f"enumeration guard ({MAX_RESPONSE_FUNCTIONS})")
    for values in itertools.product(scenario.outcomes, repeat=slots):
        yield ResponseFunction(scenario, values)


class HiddenVariableMeasure:
    """Finitely supported distribution over response functions."""

    __slots__ = ("support",)

    def __init__(self, support: Iterable[tuple[ResponseFunction, float]]):
        support = tuple(support)
        if not support:
            raise ValidationError("hidden-variable measure has empty support")
        seen = set()
        total = 0.0
        for rf, w in support:
            if w < -PROB_ATOL:
                raise ValidationError(f"negative weight {w!r}")
            if rf in seen:
                raise ValidationError("duplicate response function in support")
            seen.add(rf)
            total += w
        if abs(total - 1.0) > PROB_ATOL:
            raise ValidationError(f"weights sum to {total!r}, not 1")
        self.support = tuple((rf, max(w, 0.0)) for rf, w in support)

    @classmethod
    def point(cls, rf: ResponseFunction) -> "HiddenVariableMeasure":
        return cls([(rf, 1.0)])

    def to_json(self) -> dict:
        return {"support": [{"weight": w, "function": rf.to_json()}
                            for rf, w in self.support]}

    def __repr__(self):
        return f"HiddenVariableMeasure({len(self.support)} functions)"


def local_model(mu: HiddenVariableMeasure,
                scenario: BellScenario) -> EmpiricalModel:
    """Model induced by a hidden-variable measure.

    e_x gives joint outcome o the total weight of response functions whose
    per-party responses to x produce o.
    """
    for rf, _ in mu.support:
        if rf.scenario != scenario:
            raise DomainError("response function over a different scenario")
    table = {}
    for x in scenario.joint_inputs():
        acc: dict = {}
        for rf, w in mu.support:
            o = rf.outcome_for(x)
            acc[o] = acc.get(o, 0.0) + w
        table[x] = FiniteDist(scenario.parties, scenario.outcomes, acc)
    return EmpiricalModel(scenario, table)


class JointFunction:
    """Total deterministic map joint input -> joint outcome."""

    __slots__ = ("scenario", "_table")

    def __init__(self, scenario: BellScenario, table: Mapping[tuple, tuple]):
        if scenario.n_joint_inputs() > MAX_JOINT_INPUTS:
            raise CapacityError("input space exceeds the tabular guard")
        table = {tuple(k): tuple(v) for k, v in table.items()}
        allowed = set(scenario.outcomes)
        for x in scenario.joint_inputs():
            if x not in table:
                raise ValidationError(f"function is not total: missing {x!r}")
            o = table[x]
            if len(o) != len(scenario.parties):
                raise DomainError(f"outcome {o!r} has wrong arity")
            for v in o:
                if v not in allowed:
                    raise DomainError(f"outcome symbol {v!r} outside alphabet")
        if len(table) != scenario.n_joint_inputs():
            raise ValidationError("table has entries outside the input space")
        self.scenario = scenario
        self._table = {x: table[x] for x in scenario.joint_inputs()}

    @classmethod
    def from_callable(cls, scenario: BellScenario, fn) -> "JointFunction":
        return cls(scenario, {x: tuple(fn(x)) for x in scenario.joint_inputs()})

    @classmethod
    def from_response(cls, rf: ResponseFunction) -> "JointFunction":
        return cls(rf.scenario, {x: rf.outcome_for(x)
                                 for x in rf.scenario.joint_inputs()})

    def __call__(self, x: Sequence[Symbol]) -> tuple:
        try:
            return self._table[tuple(x)]
        except KeyError:
            raise DomainError(f"joint input {tuple(x)!r} not in function") from None

    def items(self):
        return iter(self._table.items())

    def component(self, x: Sequence[Symbol], party) -> Symbol:
        return self(x)[self.scenario.parties.index(party)]

    def __eq__(self, other):
        if not isinstance(other, JointFunction):
            return NotImplemented
        return self.scenario == other.scenario and self._table == other._table


@dataclass(frozen=True)
class FunctionalNSWitness:
    """Party whose outcome changed while its own input did not."""

    party: object
    x: tuple
    y: tuple

    def to_json(self) -> dict:
        return {"party": self.party, "x": list(self.x), "y": list(self.y)}


@dataclass(frozen=True)
class FunctionalNSVerdict:
    passed: bool
    witness: FunctionalNSWitness | None = None

    def to_json(self) -> dict:
        return {"passed": self.passed,
                "witness": None if self.witness is None else self.witness.to_json()}


def functional_ns_check(f: JointFunction) -> FunctionalNSVerdict:
    """Does every party's outcome depend only on its own input?

    Groups inputs by the party's own symbol; within a group the party's
    outcome must be constant.  The first offending pair is the witness.
    """
    scenario = f.scenario
    for pi, party in enumerate(scenario.parties):
        seen: dict = {}
        for x, o in f.items():
            key = x[pi]
            if key not in seen:
                seen[key] = (x, o[pi])
            elif seen[key][1] != o[pi]:
                return FunctionalNSVerdict(
                    passed=False,
                    witness=FunctionalNSWitness(party=party,
                                                x=seen[key][0], y=x))
    return FunctionalNSVerdict(passed=True)


def extract_hat_function(f: JointFunction) -> ResponseFunction:
    """Collapse a per-party-input function to its response table.

    Well-defined exactly when ``functional_ns_check`` passes; the value at
    (j, i) is read off any joint input whose j-th coordinate is i.
    """
    verdict = functional_ns_check(f)
    if not verdict.passed:
        raise ContractError("function is not per-party-input deterministic",
                            witness=verdict.witness)
    scenario = f.scenario
    base = scenario.inputs[0]
    values = []
    for pi in range(len(scenario.parties)):
        for inp in scenario.inputs:
            x = tuple(inp if k == pi else base
                      for k in range(len(scenario.parties)))
            values.append(f(x)[pi])
    return ResponseFunction(scenario, values)


def model_of(f: JointFunction) -> EmpiricalModel:
    """Point-mass model: e_x is the Dirac measure at f(x)."""
    scenario = f.scenario
    table = {x: dirac(scenario.outcome_assignment(o), scenario.outcomes)
             for x, o in f.items()}
    return EmpiricalModel(scenario, table)


@dataclass(frozen=True)
class LocalVerdict:
    passed: bool
    tol: float
    certificate: HiddenVariableMeasure | None = None
    max_residual: float | None = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol,
                "max_residual": self.max_residual,
                "certificate": None if self.certificate is None
                else self.certificate.to_json()}


def is_local(e: EmpiricalModel, tol: float = 1e-8) -> LocalVerdict:
    """Decide membership in the local polytope at enumeration scale.

    Solves for nonnegative weights over all deterministic response functions
    reproducing the table (a zero-objective linear program).  A pass returns a
    certifying measure, re-verified against the model within ``tol``; any
    feasible point is accepted, so certificates are not unique.
    """
    from scipy.optimize import linprog

    scenario = e.scenario
    columns = list(all_response_functions(scenario))
    inputs = list(scenario.joint_inputs())
    outcomes = list(scenario.joint_outcomes())
    o_rank = {o: i for i, o in enumerate(outcomes)}
    n_rows = len(inputs) * len(outcomes)

    a_eq = np.zeros((n_rows + 1, len(columns)))
    b_eq = np.zeros(n_rows + 1)
    for xi, x in enumerate(inputs):
        d = e.dist(x)
        for o in outcomes:
            b_eq[xi * len(outcomes) + o_rank[o]] = d.prob(o)
    for ci, rf in enumerate(columns):
        for xi, x in enumerate(inputs):
            o = rf.outcome_for(x)
            a_eq[xi * len(outcomes) + o_rank[o], ci] = 1.0
        a_eq[n_rows, ci] = 1.0
    b_eq[n_rows] = 1.0

    result = linprog(c=np.zeros(len(columns)), A_eq=a_eq, b_eq=b_eq,
                     bounds=(0.0, 1.0), method="highs")
    if not result.success:
        return LocalVerdict(passed=False, tol=tol)

    weights = np.clip(result.x, 0.0, None)
    weights = weights / weights.sum()
    support = [(rf, float(w)) for rf, w in zip(columns, weights) if w > 1e-12]
    # Renormalize after dropping numeric dust so the measure validates.
    mass = sum(w for _, w in support)
    mu = HiddenVariableMeasure([(rf, w / mass) for rf, w in support])

    residual = model_deviation(local_model(mu, scenario), e)
    if residual > tol:
        return LocalVerdict(passed=False, tol=tol, max_residual=residual)
    return LocalVerdict(passed=True, tol=tol, certificate=mu,
                        max_residual=residual)


def mix_models(terms: Sequence[tuple[float, EmpiricalModel]]) -> EmpiricalModel:
    """Convex combination of models over one scenario, input by input."""
    if not terms:
        raise ValidationError("empty model mixture")
    scenario = terms[0][1].scenario
    for _, m in terms:
        if m.scenario != scenario:
            raise DomainError("mixture models live on different scenarios")
    table = {x: convex_combination([(w, m.dist(x)) for w, m in terms])
             for x in scenario.joint_inputs()}
    return EmpiricalModel(scenario, table)


def model_deviation(e1: EmpiricalModel, e2: EmpiricalModel) -> float:
    """Largest pointwise table difference between two models."""
    if e1.scenario != e2.scenario:
        raise DomainError("models live on different scenarios")
    return max(max_deviation(d, e2.dist(x)) for x, d in e1.items())


def pr_box() -> EmpiricalModel:
    """Two parties, binary inputs and outcomes: outputs are uniform with
    XOR equal to the AND of the inputs.  No-signalling but not local."""
    scenario = BellScenario(parties=("p0", "p1"), inputs=(0, 1), outcomes=(0, 1))
    table = {}
    for x in scenario.joint_inputs():
        target = x[0] * x[1]
        probs = {(a, b): 0.5
                 for a in (0, 1) for b in (0, 1) if (a + b) % 2 == target}
        table[x] = FiniteDist(scenario.parties, scenario.outcomes, probs)
    return EmpiricalModel(scenario, table)
