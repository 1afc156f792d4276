"""Quantitative layer: concentration of the win count and its limits.

For any strategy that reads only the visible suffix, each player's success
against an independent fair hat is a fair coin, so the centered success sum
S_n concentrates like a +-1 martingale: P(|S_n| >= t) <= 2 exp(-t^2 / 2n).
``verify_concentration`` measures that empirically.  ``win_set`` and
``exact_expected_wins`` make the per-player fairness exact at enumeration
scale: over all 2^H hat prefixes the set of wins for any player has measure
exactly 1/2, because the guess is constant on each pair of prefixes that
differ only in the player's own hat.

``tail_loss_census`` shows the other side: on eventually-zero inputs the
representative-based strategies lose only finitely many players, so their win
ratio tends to 1, escaping the concentration regime entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import CapacityError, ContractError, ValidationError
from .hatgame import (
    InputSampler,
    StrategySpec,
    bind_strategy,
    parse_sampler,
    parse_strategy,
    repeat_runs,
)

#: Enumeration guards: bitsets up to 2^24 prefixes, exact sums up to 2^20.
MAX_WINSET_HORIZON = 24
MAX_EXPECTED_HORIZON = 20

#: Sampling slack is 3 sigma; fewer expected exceedances than this is flagged.
LOW_POWER_EXPECTED = 5.0


@dataclass(frozen=True)
class AzumaQuery:
    """Deviation query for a +-1-increment sum of n terms."""

    n: int
    t: float
    c: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("need n >= 1 summands")
        if self.t < 0:
            raise ValidationError("deviation threshold must be >= 0")
        if self.c != 1.0:
            raise ValidationError("only unit increment bounds are supported")


def azuma_bound(query: AzumaQuery) -> float:
    """Two-sided bound P(|S_n| >= t) <= min(1, 2 exp(-t^2 / 2n))."""
    return min(1.0, 2.0 * math.exp(-(query.t ** 2) / (2.0 * query.n)))


@dataclass(frozen=True)
class ConcentrationReport:
    strategy: str
    sampler: str
    n: int
    trials: int
    delta: float
    threshold: float
    bound_at_threshold: float
    exceedances: int
    empirical_fraction: float
    slack: float
    passed: bool
    low_power: bool
    seed: int

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy, "sampler": self.sampler, "n": self.n,
            "trials": self.trials, "delta": self.delta,
            "threshold": self.threshold,
            "bound_at_threshold": self.bound_at_threshold,
            "exceedances": self.exceedances,
            "empirical_fraction": self.empirical_fraction,
            "slack": self.slack, "passed": self.passed,
            "low_power": self.low_power, "seed": self.seed,
        }


def verify_concentration(strategy: StrategySpec | str, *, n: int, trials: int,
                         delta: float, seed: int = 0,
                         sampler: InputSampler | str = "uniform",
                         s_values: Iterable[int] | None = None) -> ConcentrationReport:
    """Empirical check of the deviation bound at confidence delta.

    The threshold t* = sqrt(2 n ln(2/delta)) makes the bound equal delta; the
    run passes when the exceedance fraction stays below delta plus three
    sampling sigmas.  ``s_values`` short-circuits simulation (test hook).
    """
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie strictly between 0 and 1")
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    if isinstance(sampler, str):
        sampler = parse_sampler(sampler)
    threshold = math.sqrt(2.0 * n * math.log(2.0 / delta))
    bound = azuma_bound(AzumaQuery(n=n, t=threshold))
    if s_values is None:
        stats = repeat_runs(strategy, sampler, n=n, trials=trials, seed=seed)
        s_values = [st.s_sum for st in stats]
    else:
        s_values = list(s_values)
        trials = len(s_values)
    exceed = sum(1 for s in s_values if abs(s) >= threshold)
    fraction = exceed / trials
    slack = 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    return ConcentrationReport(
        strategy=strategy.label(), sampler=sampler.label(), n=n,
        trials=trials, delta=delta, threshold=threshold,
        bound_at_threshold=bound, exceedances=exceed,
        empirical_fraction=fraction, slack=slack,
        passed=fraction <= delta + slack,
        low_power=trials * delta < LOW_POWER_EXPECTED, seed=seed)


@dataclass(frozen=True, eq=False)
class WinSet:
    """Exact win set of one player over all 2^horizon hat prefixes."""

    player: int
    horizon: int
    mask: np.ndarray  # bool, length 2**horizon; index bit k is hat k
    count: int

    @property
    def measure(self) -> Fraction:
        return Fraction(self.count, 1 << self.horizon)

    def contains(self, prefix_bits: Iterable[int]) -> bool:
        idx = 0
        for k, b in enumerate(prefix_bits):
            idx |= (int(b) & 1) << k
        return bool(self.mask[idx])


def _require_deterministic(spec: StrategySpec) -> None:
    if not spec.deterministic:
        raise ContractError(f"strategy {spec.label()!r} is probabilistic; "
                            f"exact enumeration needs a deterministic one")


def win_set(strategy: StrategySpec | str, player: int, horizon: int) -> WinSet:
    """Enumerate the prefixes on which ``player`` wins, exactly.

    Prefix index i encodes hats little-endian: hat k is bit k of i, so the
    visible suffix of player j is i >> (j + 1).
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    _require_deterministic(strategy)
    if horizon > MAX_WINSET_HORIZON:
        raise CapacityError(f"horizon {horizon} exceeds the bitset guard "
                            f"({MAX_WINSET_HORIZON})")
    if not 0 <= player < horizon:
        raise ValidationError(f"player {player} outside horizon {horizon}")
    size = 1 << horizon
    idx = np.arange(size, dtype=np.uint32)
    own = ((idx >> np.uint32(player)) & np.uint32(1)).astype(np.uint8)
    bound = bind_strategy(strategy, 0, 0)
    if strategy.kind == "majority":
        ones = np.bitwise_count(idx >> np.uint32(player + 1)).astype(np.int64)
        window = horizon - 1 - player
        guesses = (2 * ones > window).astype(np.uint8)
    else:
        # Representative and constant kinds ignore the suffix entirely.
        guesses = np.full(size, bound.guess(player, ()), dtype=np.uint8)
    mask = guesses == own
    return WinSet(player=player, horizon=horizon, mask=mask,
                  count=int(mask.sum()))


def exact_expected_wins(strategy: StrategySpec | str, n: int) -> Fraction:
    """Expected win count over uniform hats, as an exact rational.

    Equals n/2 for every suffix-only deterministic strategy; computed by
    enumeration, not assumed.
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    _require_deterministic(strategy)
    if n > MAX_EXPECTED_HORIZON:
        raise CapacityError(f"{n} players exceeds the exact-sum guard "
                            f"({MAX_EXPECTED_HORIZON})")
    if n < 1:
        raise ValidationError("need at least one player")
    total = sum(win_set(strategy, j, n).count for j in range(n))
    return Fraction(total, 1 << n)


@dataclass(frozen=True)
class CensusReport:
    """Histogram of the last losing player index over repeated runs."""

    strategy: str
    m: int
    n: int
    trials: int
    seed: int
    histogram: tuple  # ((last_loss | None, count), ...) sorted, None first
    latent_histogram: tuple  # ((latent_index, count), ...) for mixtures

    def fraction_at_least(self, threshold: int) -> float:
        hits = sum(c for key, c in self.histogram
                   if key is not None and key >= threshold)
        return hits / self.trials

    def latent_fraction_at_least(self, threshold: int) -> float:
        hits = sum(c for key, c in self.latent_histogram if key >= threshold)
        return hits / self.trials

    def max_last_loss(self) -> int | None:
        values = [key for key, _ in self.histogram if key is not None]
        return max(values) if values else None

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy, "m": self.m, "n": self.n,
            "trials": self.trials, "seed": self.seed,
            "histogram": [[-1 if key is None else key, c]
                          for key, c in self.histogram],
            "latent_histogram": [[key, c] for key, c in self.latent_histogram],
        }

    def csv_rows(self):
        """(last_loss, count) rows; the no-loss bucket is encoded as -1."""
        for key, count in self.histogram:
            yield (-1 if key is None else key, count)


def tail_loss_census(strategy: StrategySpec | str, *, m: int, n: int,
                     trials: int, seed: int = 0,
                     horizon: int | None = None) -> CensusReport:
    """Distribution of the last loss on eventually-zero inputs.

    For the representative strategy and the fair two-way mixture every run
    stabilizes below m + 1; for the geometric mixture the mass of late losses
    is controlled by the latent index tail, which the report also exposes.
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    sampler = InputSampler("evzero", m=m)
    stats = repeat_runs(strategy, sampler, n=n, horizon=horizon,
                        trials=trials, seed=seed)
    hist: dict = {}
    latent: dict = {}
    for st in stats:
        hist[st.last_loss] = hist.get(st.last_loss, 0) + 1
        if st.latent_index is not None:
            latent[st.latent_index] = latent.get(st.latent_index, 0) + 1
    ordered = sorted(hist.items(), key=lambda kv: -1 if kv[0] is None else kv[0])
    return CensusReport(strategy=strategy.label(), m=m, n=n, trials=trials,
                        seed=seed, histogram=tuple(ordered),
                        latent_histogram=tuple(sorted(latent.items())))
