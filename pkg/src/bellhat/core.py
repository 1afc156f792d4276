"""Finite Bell scenarios and finitely supported distributions.

A scenario fixes an ordered list of parties, a finite input alphabet, and a
finite outcome alphabet.  Joint inputs and joint outcomes are tuples indexed
by the party list.  Distributions are finitely supported with canonical,
sorted support, so equality and serialization are deterministic.

Marginalization is the push-forward along coordinate restriction.  Its
functoriality (restricting in two steps equals restricting once) is what makes
locality imply no-signalling, and is property-tested rather than assumed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import DomainError, ValidationError

Symbol = Union[int, str]
Party = Hashable

#: Absolute tolerance for normalization and weight-sum checks.
PROB_ATOL = 1e-9

#: Countable mixtures are truncated once cumulative weight reaches 1 - this.
COUNTABLE_TRUNCATION = 1e-12


@dataclass(frozen=True)
class BellScenario:
    """Parties, input alphabet, and outcome alphabet of a finite scenario."""

    parties: tuple
    inputs: tuple
    outcomes: tuple

    def __post_init__(self):
        if not self.parties:
            raise ValidationError("scenario needs at least one party")
        if len(set(self.parties)) != len(self.parties):
            raise ValidationError("party identifiers must be distinct")
        if not self.inputs:
            raise ValidationError("input alphabet is empty")
        if not self.outcomes:
            raise ValidationError("outcome alphabet is empty")
        if len(set(self.inputs)) != len(self.inputs):
            raise ValidationError("input alphabet has duplicates")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValidationError("outcome alphabet has duplicates")

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    def joint_inputs(self) -> Iterator[tuple]:
        """All joint inputs in canonical (party-major) order."""
        return itertools.product(self.inputs, repeat=len(self.parties))

    def joint_outcomes(self) -> Iterator[tuple]:
        return itertools.product(self.outcomes, repeat=len(self.parties))

    def n_joint_inputs(self) -> int:
        return len(self.inputs) ** len(self.parties)

    def input_assignment(self, values: Sequence[Symbol]) -> "JointAssignment":
        return JointAssignment(self.parties, tuple(values), alphabet=self.inputs)

    def outcome_assignment(self, values: Sequence[Symbol]) -> "JointAssignment":
        return JointAssignment(self.parties, tuple(values), alphabet=self.outcomes)


@dataclass(frozen=True)
class JointAssignment:
    """A total map party -> symbol, stored in the party order given."""

    parties: tuple
    values: tuple

    def __init__(self, parties: Iterable[Party], values: Sequence[Symbol],
                 alphabet: Sequence[Symbol] | None = None):
        parties = tuple(parties)
        values = tuple(values)
        if len(set(parties)) != len(parties):
            raise ValidationError("assignment parties must be distinct")
        if len(parties) != len(values):
            raise DomainError(
                f"assignment over {len(parties)} parties got {len(values)} values")
        if alphabet is not None:
            allowed = set(alphabet)
            for party, value in zip(parties, values):
                if value not in allowed:
                    raise DomainError(f"symbol {value!r} at party {party!r} "
                                      f"is outside the alphabet")
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "values", values)

    def __getitem__(self, party: Party) -> Symbol:
        try:
            return self.values[self.parties.index(party)]
        except ValueError:
            raise DomainError(f"party {party!r} not in assignment") from None

    def as_dict(self) -> dict:
        return dict(zip(self.parties, self.values))

    def __len__(self) -> int:
        return len(self.parties)


def restrict(a: JointAssignment, parties: Iterable[Party]) -> JointAssignment:
    """Project an assignment onto a subset of its parties.

    The subset may be given in any order (or as a set); the result keeps the
    original party order.  The empty subset gives the empty assignment.
    """
    wanted = frozenset(parties)
    unknown = wanted - set(a.parties)
    if unknown:
        raise DomainError(f"parties {sorted(map(repr, unknown))} not in assignment")
    keep = [i for i, p in enumerate(a.parties) if p in wanted]
    return JointAssignment(tuple(a.parties[i] for i in keep),
                           tuple(a.values[i] for i in keep))


class FiniteDist:
    """Finitely supported probability distribution over joint assignments.

    The domain descriptor is (parties, alphabet); support points are value
    tuples aligned with ``parties``.  Support is sorted by alphabet index,
    party-major, and zero-probability entries are dropped, so two equal
    distributions compare equal structurally.
    """

    __slots__ = ("parties", "alphabet", "support", "_index")

    def __init__(self, parties: Iterable[Party], alphabet: Sequence[Symbol],
                 probs: Mapping[tuple, float]):
        parties = tuple(parties)
        alphabet = tuple(alphabet)
        if len(set(parties)) != len(parties):
            raise ValidationError("distribution parties must be distinct")
        if not alphabet:
            raise ValidationError("distribution alphabet is empty")
        rank = {symbol: i for i, symbol in enumerate(alphabet)}
        total = 0.0
        cleaned = {}
        for values, p in probs.items():
            values = tuple(values)
            if len(values) != len(parties):
                raise DomainError(f"support point {values!r} has wrong arity")
            for v in values:
                if v not in rank:
                    raise DomainError(f"symbol {v!r} outside alphabet {alphabet!r}")
            if p < -PROB_ATOL:
                raise ValidationError(f"negative probability {p!r} at {values!r}")
            p = max(p, 0.0)
            total += p
            if p > 0.0:
                if values in cleaned:
                    raise ValidationError(f"duplicate support point {values!r}")
                cleaned[values] = p
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=PROB_ATOL):
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        order = sorted(cleaned, key=lambda vs: tuple(rank[v] for v in vs))
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "support",
                           tuple((vs, cleaned[vs]) for vs in order))
        object.__setattr__(self, "_index", cleaned)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteDist is immutable")

    def prob(self, values: Sequence[Symbol]) -> float:
        return self._index.get(tuple(values), 0.0)

    def items(self):
        return iter(self.support)

    def total(self) -> float:
        return sum(p for _, p in self.support)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteDist):
            return NotImplemented
        return (self.parties == other.parties
                and self.alphabet == other.alphabet
                and self.support == other.support)

    def __hash__(self) -> int:
        return hash((self.parties, self.alphabet, self.support))

    def __repr__(self) -> str:
        body = ", ".join(f"{vs}: {p:g}" for vs, p in self.support)
        return f"FiniteDist({list(self.parties)}, {{{body}}})"


def dirac(a: JointAssignment, alphabet: Sequence[Symbol]) -> FiniteDist:
    """Point mass at one assignment."""
    return FiniteDist(a.parties, alphabet, {a.values: 1.0})


def marginalize(d: FiniteDist, parties: Iterable[Party]) -> FiniteDist:
    """Push ``d`` forward along restriction to a subset of its parties."""
    wanted = frozenset(parties)
    unknown = wanted - set(d.parties)
    if unknown:
        raise DomainError(f"parties {sorted(map(repr, unknown))} not in distribution")
    keep = [i for i, p in enumerate(d.parties) if p in wanted]
    sub_parties = tuple(d.parties[i] for i in keep)
    acc: dict = {}
    for values, p in d.support:
        key = tuple(values[i] for i in keep)
        acc[key] = acc.get(key, 0.0) + p
    return FiniteDist(sub_parties, d.alphabet, acc)


def convex_combination(terms: Sequence[tuple[float, FiniteDist]]) -> FiniteDist:
    """Mixture sum_i w_i * d_i of distributions over one common domain."""
    if not terms:
        raise ValidationError("empty mixture")
    total_w = 0.0
    first = terms[0][1]
    acc: dict = {}
    for w, d in terms:
        if w < -PROB_ATOL:
            raise ValidationError(f"negative mixture weight {w!r}")
        if d.parties != first.parties or d.alphabet != first.alphabet:
            raise DomainError("mixture terms live on different domains")
        total_w += w
        if w <= 0.0:
            continue
        for values, p in d.support:
            acc[values] = acc.get(values, 0.0) + w * p
    if not math.isclose(total_w, 1.0, rel_tol=0.0, abs_tol=PROB_ATOL):
        raise ValidationError(f"mixture weights sum to {total_w!r}, not 1")
    return FiniteDist(first.parties, first.alphabet, acc)


def truncate_countable(weights: Iterable[float]) -> list[float]:
    """Truncate a countable weight sequence for tabular use.

    Weights are consumed until the cumulative mass reaches
    ``1 - COUNTABLE_TRUNCATION``; the remainder is folded into the last term,
    so the result is exactly normalized.  Sampling-based consumers should use
    the exact law instead (see the hat-game mixture sampler).
    """
    taken: list[float] = []
    cumulative = 0.0
    for w in weights:
        if w < 0.0:
            raise ValidationError(f"negative weight {w!r} in countable mixture")
        taken.append(w)
        cumulative += w
        if cumulative >= 1.0 - COUNTABLE_TRUNCATION:
            break
    if not taken or cumulative > 1.0 + PROB_ATOL:
        raise ValidationError("countable weights must stay within [0, 1]")
    taken[-1] += 1.0 - cumulative
    return taken


def max_deviation(d1: FiniteDist, d2: FiniteDist) -> float:
    """Largest pointwise probability difference over the union of supports."""
    if d1.parties != d2.parties or d1.alphabet != d2.alphabet:
        raise DomainError("distributions live on different domains")
    worst = 0.0
    for values, p in d1.support:
        worst = max(worst, abs(p - d2.prob(values)))
    for values, p in d2.support:
        worst = max(worst, abs(p - d1.prob(values)))
    return worst


def agreement_parties(x: JointAssignment, y: JointAssignment) -> frozenset:
    """The set of parties on which two assignments agree."""
    if x.parties != y.parties:
        raise DomainError("assignments compare over different party lists")
    return frozenset(p for p, a, b in zip(x.parties, x.values, y.values) if a == b)
