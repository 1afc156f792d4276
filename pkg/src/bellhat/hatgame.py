"""Streaming simulator for the sequential hat-guessing game.

Countably many players each wear a binary hat; player j sees only the hats of
later players (indices > j) and guesses their own.  Runs are truncated at a
finite horizon H with an all-zeros tail convention, which places every
simulated hat string in the eventually-zero tail class.  On that class the
choice-function strategy is computable: the class representative is the
all-zeros string, so the base strategy always guesses 0, and its index-j flip
variant guesses 1 for the first j players and 0 afterwards.  The two mixture
strategies draw a flip index once per run, fairly between {0, 1} or with the
exact geometric law P(J = j) = 2**-(j+1).

Strategies receive only the visible suffix; nothing in the interface exposes
the player's own hat or earlier hats.  All randomness is counter-based (see
``rng``), so scalar, vectorized, and closed-form-tail evaluation of the same
run agree bit for bit, as do re-runs across processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, DomainError, ValidationError
from .rng import (
    STREAM_GUESS,
    STREAM_INPUT,
    STREAM_LATENT,
    Rng,
    bit_at,
    bit_block,
    derive_key,
    u64_at,
    u64_block,
    uniform_at,
    uniform_block,
)

BLOCK = 1 << 15

STRATEGY_KINDS = ("g", "gj", "d", "e", "random", "majority", "const")


@dataclass(frozen=True)
class StrategySpec:
    """Parsed strategy selector.

    kind "g": guess the tail-class representative (always 0).
    kind "gj": flip variant, guesses 1 for players < param.
    kind "d": fair per-run mixture of flip indices {0, 1}.
    kind "e": per-run flip index with the geometric law 2**-(j+1).
    kind "random": fresh fair bit per player.
    kind "majority": majority bit of the visible suffix, ties to 0.
    kind "const": fixed bit param.
    """

    kind: str
    param: int | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValidationError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "gj":
            if self.param is None or self.param < 0:
                raise ValidationError("gj needs a nonnegative flip parameter")
        elif self.kind == "const":
            if self.param not in (0, 1):
                raise ValidationError("const needs a bit parameter 0 or 1")
        elif self.param is not None:
            raise ValidationError(f"strategy {self.kind!r} takes no parameter")

    @property
    def deterministic(self) -> bool:
        """No latent state and no per-player randomness."""
        return self.kind in ("g", "gj", "const", "majority")

    def label(self) -> str:
        if self.kind == "gj":
            return f"gj:{self.param}"
        if self.kind == "const":
            return f"const:{self.param}"
        return self.kind


def parse_strategy(text: str) -> StrategySpec:
    """Parse CLI selectors: g, gj:J, d, e, random, majority, const:B."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name in ("g", "d", "e", "random", "majority"):
        if arg:
            raise ValidationError(f"strategy {name!r} takes no argument")
        return StrategySpec(name)
    if name in ("gj", "const"):
        if not arg:
            raise ValidationError(f"strategy {name!r} needs an argument")
        try:
            return StrategySpec(name, int(arg))
        except ValueError:
            raise ValidationError(f"bad strategy argument {arg!r}") from None
    raise ValidationError(f"unknown strategy {text!r}")


@dataclass(frozen=True)
class InputSampler:
    """Hat-string law: independent Bernoulli(p) bits, either for the whole
    horizon ("uniform") or only below a stabilization index m ("evzero",
    zeros from m on).  ``seed`` is a default stream key for direct calls;
    the game runner always derives explicit per-run keys instead."""

    kind: str
    p: float = 0.5
    m: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "evzero"):
            raise ValidationError(f"unknown sampler kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"bias {self.p!r} outside [0, 1]")
        if self.kind == "evzero":
            if self.m is None or self.m < 0:
                raise ValidationError("evzero needs a stabilization index m >= 0")
        elif self.m is not None:
            raise ValidationError("uniform sampler takes no stabilization index")

    def random_below(self, horizon: int) -> int:
        """Index below which bits are random draws; zero bits from there on."""
        return horizon if self.kind == "uniform" else min(self.m, horizon)

    def label(self) -> str:
        if self.kind == "evzero":
            return f"evzero:{self.m}"
        if self.p != 0.5:
            return f"uniform:{self.p:g}"
        return "uniform"


def parse_sampler(text: str) -> InputSampler:
    """Parse CLI selectors: uniform, uniform:P, evzero:M, evzero:M:P."""
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "uniform" and len(parts) <= 2:
            p = float(parts[1]) if len(parts) == 2 else 0.5
            return InputSampler("uniform", p=p)
        if parts[0] == "evzero" and 2 <= len(parts) <= 3:
            p = float(parts[2]) if len(parts) == 3 else 0.5
            return InputSampler("evzero", p=p, m=int(parts[1]))
    except ValueError:
        raise ValidationError(f"bad sampler argument in {text!r}") from None
    raise ValidationError(f"unknown input sampler {text!r}")


@dataclass(frozen=True, eq=False)
class HatInput:
    """A sampled hat string at finite horizon (implicit all-zeros tail)."""

    horizon: int
    bits: np.ndarray

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if len(self.bits) != self.horizon:
            raise ConfigError("bit array length must equal the horizon")

    def visible(self, j: int) -> "SuffixView":
        if not 0 <= j < self.horizon:
            raise DomainError(f"player {j} outside horizon {self.horizon}")
        return SuffixView(self.bits, j + 1, self.horizon)


class SuffixView(Sequence):
    """Read window onto bits[lo:hi]; indexing never leaves the window.

    The scalar engine hands these to strategies, so a strategy physically
    cannot read its own hat or earlier ones.  ``accesses`` records absolute
    indices when tracing is on (the isolation tripwire test).
    """

    __slots__ = ("_bits", "lo", "hi", "accesses")

    trace: bool = False

    def __init__(self, bits, lo: int, hi: int):
        self._bits = bits
        self.lo = lo
        self.hi = hi
        self.accesses: list[int] | None = [] if SuffixView.trace else None

    def __len__(self) -> int:
        return self.hi - self.lo

    def __getitem__(self, i: int) -> int:
        n = self.hi - self.lo
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(f"suffix index {i} outside window of length {n}")
        if self.accesses is not None:
            self.accesses.append(self.lo + i)
        return int(self._bits[self.lo + i])

    def ones(self) -> int:
        if self.accesses is not None:
            self.accesses.extend(range(self.lo, self.hi))
        return int(np.sum(self._bits[self.lo:self.hi], dtype=np.int64))


def input_bit(sampler: InputSampler, key: int, i: int) -> int:
    """Bit i of the sampled string: pure function of (sampler, key, i)."""
    if sampler.kind == "evzero" and i >= sampler.m:
        return 0
    return 1 if uniform_at(key, i) < sampler.p else 0


def input_bits_block(sampler: InputSampler, key: int, start: int,
                     count: int, horizon: int) -> np.ndarray:
    """Vectorized ``input_bit`` over a contiguous index range."""
    cut = sampler.random_below(horizon)
    out = np.zeros(count, dtype=np.uint8)
    n_random = min(max(cut - start, 0), count)
    if n_random > 0:
        u = uniform_block(key, start, n_random)
        out[:n_random] = (u < sampler.p).astype(np.uint8)
    return out


def sample_input(sampler: InputSampler, horizon: int,
                 seed: int | None = None) -> HatInput:
    """Materialize a hat string; deterministic given the stream key."""
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    if sampler.kind == "evzero" and sampler.m > horizon:
        raise ConfigError(f"stabilization index {sampler.m} exceeds "
                          f"horizon {horizon}")
    key = seed if seed is not None else (sampler.seed or 0)
    return HatInput(horizon, input_bits_block(sampler, key, 0, horizon, horizon))


def sample_mixture_index(kind: str, seed: int) -> int:
    """Per-run latent flip index: d is fair on {0, 1}; e is geometric with
    P(j) = 2**-(j+1), sampled exactly by counting fair-bit failures."""
    rng = Rng(seed)
    if kind == "d":
        return rng.bit()
    if kind == "e":
        return rng.geometric_index()
    raise ValidationError(f"not a mixture kind: {kind!r}")


class BoundStrategy:
    """A strategy with its per-run latent state already sampled.

    ``flip_until`` is set for the representative-based kinds: players with
    index below it guess 1, everyone after guesses 0.
    """

    __slots__ = ("spec", "latent_index", "guess_key", "flip_until", "const_bit")

    def __init__(self, spec: StrategySpec, latent_index: int | None,
                 guess_key: int | None):
        self.spec = spec
        self.latent_index = latent_index
        self.guess_key = guess_key
        if spec.kind == "g":
            self.flip_until = 0
        elif spec.kind == "gj":
            self.flip_until = spec.param
        elif spec.kind in ("d", "e"):
            self.flip_until = latent_index
        else:
            self.flip_until = None
        self.const_bit = spec.param if spec.kind == "const" else None

    def guess(self, j: int, visible) -> int:
        """Guess for player j from the visible suffix alone."""
        kind = self.spec.kind
        if self.flip_until is not None:
            return 1 if j < self.flip_until else 0
        if kind == "const":
            return self.const_bit
        if kind == "random":
            return bit_at(self.guess_key, j)
        if kind == "majority":
            ones = visible.ones() if isinstance(visible, SuffixView) \
                else int(sum(visible))
            return 1 if 2 * ones > len(visible) else 0
        raise ValidationError(f"unhandled strategy kind {kind!r}")

    def tail_constant(self) -> tuple[int, int] | None:
        """(index, bit): the guess equals ``bit`` for all players >= index,
        independent of the input.  None when the guess reads the suffix."""
        if self.flip_until is not None:
            return (self.flip_until, 0)
        if self.spec.kind == "const":
            return (0, self.const_bit)
        return None

    def guesses_block(self, start: int, count: int, suffix_ones=None,
                      window_lens=None) -> np.ndarray:
        """Vectorized guesses for players start..start+count-1.

        ``suffix_ones``/``window_lens`` are required by the majority kind and
        come from the engine's running tail statistics.
        """
        kind = self.spec.kind
        j = np.arange(start, start + count, dtype=np.int64)
        if self.flip_until is not None:
            return (j < self.flip_until).astype(np.uint8)
        if kind == "const":
            return np.full(count, self.const_bit, dtype=np.uint8)
        if kind == "random":
            return bit_block(self.guess_key, start, count)
        if kind == "majority":
            return (2 * suffix_ones > window_lens).astype(np.uint8)
        raise ValidationError(f"unhandled strategy kind {kind!r}")


def bind_strategy(spec: StrategySpec, latent_seed: int,
                  guess_seed: int) -> BoundStrategy:
    """Sample the latent state once and fix the per-player guess stream."""
    latent = None
    if spec.kind in ("d", "e"):
        latent = sample_mixture_index(spec.kind, latent_seed)
    return BoundStrategy(spec, latent, guess_seed)


def guess(strategy: BoundStrategy, j: int, visible) -> int:
    """Module-level alias for ``BoundStrategy.guess`` with bounds checking."""
    if j < 0:
        raise DomainError("player index must be nonnegative")
    return strategy.guess(j, visible)


@dataclass(frozen=True)
class RunStats:
    """Scored results of one run.

    s_j = 2 r_j - 1 and S_k is the k-player partial sum of s_j; the win ratio
    is defined as (S_n / n + 1) / 2 so the identity holds exactly.
    """

    n: int
    wins: int
    s_sum: int
    win_ratio: float
    last_loss: int | None
    checkpoints: tuple = ()
    # Annotation only: a referee cannot see worker-side latent state, so the
    # scored fields above are what runs compare on.
    latent_index: int | None = field(default=None, compare=False)
    guesses: np.ndarray | None = field(default=None, compare=False)
    results: np.ndarray | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        out = {"n": self.n, "wins": self.wins, "S_n": self.s_sum,
               "W_n": self.win_ratio, "last_loss": self.last_loss,
               "latent_index": self.latent_index}
        if self.checkpoints:
            out["checkpoints"] = [[k, s] for k, s in self.checkpoints]
        return out


def win_ratio(s_sum: int, n: int) -> float:
    return (s_sum / n + 1.0) / 2.0


def _finalize(n: int, wins: int, last_loss: int | None, checkpoints,
              latent_index, guesses=None, results=None) -> RunStats:
    s_sum = 2 * wins - n
    return RunStats(n=n, wins=wins, s_sum=s_sum,
                    win_ratio=win_ratio(s_sum, n), last_loss=last_loss,
                    checkpoints=tuple(checkpoints), latent_index=latent_index,
                    guesses=guesses, results=results)


def _normalize_checkpoints(checkpoints: Iterable[int], n: int) -> list[int]:
    ks = sorted(set(int(k) for k in checkpoints))
    for k in ks:
        if not 1 <= k <= n:
            raise ConfigError(f"checkpoint {k} outside 1..{n}")
    return ks


def _run_scalar(strategy: BoundStrategy, sampler: InputSampler, horizon: int,
                n: int, input_key: int, checkpoints, retain: bool):
    """Reference engine: explicit per-player loop over suffix views."""
    hat = sample_input(sampler, horizon, seed=input_key)
    ks = _normalize_checkpoints(checkpoints, n)
    marks = []
    wins = 0
    s = 0
    last_loss = None
    guesses = np.zeros(n, dtype=np.uint8) if retain else None
    results = np.zeros(n, dtype=np.uint8) if retain else None
    ki = 0
    for j in range(n):
        a = strategy.guess(j, hat.visible(j))
        r = 1 if a == int(hat.bits[j]) else 0
        wins += r
        s += 2 * r - 1
        if r == 0:
            last_loss = j
        if retain:
            guesses[j] = a
            results[j] = r
        while ki < len(ks) and ks[ki] == j + 1:
            marks.append((j + 1, s))
            ki += 1
    return _finalize(n, wins, last_loss, marks, strategy.latent_index,
                     guesses, results)


def _run_blocked(strategy: BoundStrategy, sampler: InputSampler, horizon: int,
                 n: int, input_key: int, checkpoints, retain: bool):
    """Vectorized engine: streams fixed-size player blocks."""
    ks = _normalize_checkpoints(checkpoints, n)
    needs_window = strategy.spec.kind == "majority"
    total_ones = None
    if needs_window:
        # ones(x_{j+1}..x_{H-1}) = total_ones - cumulative_ones(0..j)
        total_ones = 0
        for start in range(0, horizon, BLOCK):
            count = min(BLOCK, horizon - start)
            total_ones += int(input_bits_block(sampler, input_key, start,
                                               count, horizon).sum())
    marks = []
    wins = 0
    s_before = 0
    last_loss = None
    ones_before = 0
    ki = 0
    guesses = np.zeros(n, dtype=np.uint8) if retain else None
    results = np.zeros(n, dtype=np.uint8) if retain else None
    for start in range(0, n, BLOCK):
        count = min(BLOCK, n - start)
        bits = input_bits_block(sampler, input_key, start, count, horizon)
        if needs_window:
            cum = ones_before + np.cumsum(bits, dtype=np.int64)
            suffix_ones = total_ones - cum
            j = np.arange(start, start + count, dtype=np.int64)
            window_lens = horizon - 1 - j
            a = strategy.guesses_block(start, count, suffix_ones, window_lens)
            ones_before = int(cum[-1])
        else:
            a = strategy.guesses_block(start, count)
        r = (a == bits).view(np.uint8)
        if retain:
            guesses[start:start + count] = a
            results[start:start + count] = r
        losses = np.flatnonzero(r == 0)
        if losses.size:
            last_loss = start + int(losses[-1])
        block_wins = int(r.sum())
        if ki < len(ks) and ks[ki] <= start + count:
            s_cum = s_before + np.cumsum(2 * r.astype(np.int64) - 1)
            while ki < len(ks) and ks[ki] <= start + count:
                marks.append((ks[ki], int(s_cum[ks[ki] - start - 1])))
                ki += 1
        wins += block_wins
        s_before += 2 * block_wins - count
    return _finalize(n, wins, last_loss, marks, strategy.latent_index,
                     guesses, results)


def _run_tail(strategy: BoundStrategy, sampler: InputSampler, horizon: int,
              n: int, input_key: int, checkpoints):
    """Closed-form engine for eventually-zero inputs and strategies whose
    guess is a known constant beyond some index.  Beyond
    max(stabilization, that index) every result is decided by the constant
    against a zero hat, so only the prefix is simulated."""
    t, tail_bit = strategy.tail_constant()
    prefix = min(n, max(sampler.m, t))
    ks = _normalize_checkpoints(checkpoints, n)
    marks = []
    wins = 0
    s = 0
    last_loss = None
    if prefix > 0:
        bits = input_bits_block(sampler, input_key, 0, prefix, horizon)
        a = strategy.guesses_block(0, prefix)
        r = (a == bits).view(np.uint8)
        losses = np.flatnonzero(r == 0)
        if losses.size:
            last_loss = int(losses[-1])
        wins = int(r.sum())
        s_cum = np.cumsum(2 * r.astype(np.int64) - 1)
        s = int(s_cum[-1])
    tail_win = 1 if tail_bit == 0 else 0
    if n > prefix:
        wins += tail_win * (n - prefix)
        if tail_win == 0:
            last_loss = n - 1
    for k in ks:
        if k <= prefix:
            marks.append((k, int(s_cum[k - 1])))
        else:
            marks.append((k, s + (k - prefix) * (2 * tail_win - 1)))
    return _finalize(n, wins, last_loss, marks, strategy.latent_index)


def run_game(strategy: StrategySpec | str, sampler: InputSampler | str, *,
             n: int, horizon: int | None = None, checkpoints: Iterable[int] = (),
             seed: int = 0, trial: int = 0, retain: bool = False,
             engine: str = "auto") -> RunStats:
    """Play one run and score every player below n.

    The horizon defaults to n.  The latent state (mixture index, guess
    stream) is sampled once before any guess; every random draw is keyed by
    (seed, trial), so identical arguments replay identical runs on any
    engine.  ``retain`` keeps per-player guess/result arrays.
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    if isinstance(sampler, str):
        sampler = parse_sampler(sampler)
    if n < 1:
        raise ConfigError("need at least one player")
    horizon = n if horizon is None else horizon
    if n > horizon:
        raise ConfigError(f"players {n} exceed horizon {horizon}")
    if sampler.kind == "evzero" and sampler.m > horizon:
        raise ConfigError(f"stabilization index {sampler.m} exceeds "
                          f"horizon {horizon}")
    run_key = derive_key(seed, trial)
    input_key = derive_key(run_key, STREAM_INPUT)
    latent_key = derive_key(run_key, STREAM_LATENT)
    guess_key = derive_key(run_key, STREAM_GUESS)
    bound = bind_strategy(strategy, latent_key, guess_key)

    if engine == "auto":
        tail_ok = (sampler.kind == "evzero"
                   and bound.tail_constant() is not None and not retain)
        engine = "tail" if tail_ok else "blocked"
    if engine == "tail":
        if sampler.kind != "evzero" or bound.tail_constant() is None:
            raise ConfigError("tail engine needs an eventually-zero sampler "
                              "and a tail-constant strategy")
        if retain:
            raise ConfigError("tail engine does not retain per-player arrays")
        return _run_tail(bound, sampler, horizon, n, input_key, checkpoints)
    if engine == "blocked":
        return _run_blocked(bound, sampler, horizon, n, input_key,
                            checkpoints, retain)
    if engine == "scalar":
        return _run_scalar(bound, sampler, horizon, n, input_key,
                           checkpoints, retain)
    raise ConfigError(f"unknown engine {engine!r}")


def repeat_runs(strategy: StrategySpec | str, sampler: InputSampler | str, *,
                n: int, trials: int, seed: int, horizon: int | None = None,
                checkpoints: Iterable[int] = (), retain: bool = False,
                engine: str = "auto") -> list[RunStats]:
    """Independent runs with per-trial keys derived from the master seed."""
    if trials < 1:
        raise ConfigError("need at least one trial")
    return [run_game(strategy, sampler, n=n, horizon=horizon,
                     checkpoints=checkpoints, seed=seed, trial=t,
                     retain=retain, engine=engine)
            for t in range(trials)]
