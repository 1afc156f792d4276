import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellhat.errors import ConfigError, DomainError, ValidationError
from bellhat.hatgame import (
    BLOCK,
    InputSampler,
    StrategySpec,
    SuffixView,
    bind_strategy,
    parse_sampler,
    parse_strategy,
    repeat_runs,
    run_game,
    sample_input,
    sample_mixture_index,
    win_ratio,
)
from bellhat.rng import derive_key

ALL_STRATEGIES = ["g", "gj:3", "d", "e", "random", "majority", "const:0", "const:1"]


class TestParsing:
    @pytest.mark.parametrize("text,kind,param", [
        ("g", "g", None), ("gj:5", "gj", 5), ("d", "d", None), ("e", "e", None),
        ("random", "random", None), ("majority", "majority", None),
        ("const:1", "const", 1), ("CONST:0", "const", 0),
    ])
    def test_strategies(self, text, kind, param):
        spec = parse_strategy(text)
        assert spec.kind == kind and spec.param == param

    @pytest.mark.parametrize("text", ["", "h", "gj", "gj:-1", "const:2",
                                      "g:1", "d:0", "const:x"])
    def test_bad_strategies(self, text):
        with pytest.raises(ValidationError):
            parse_strategy(text)

    @pytest.mark.parametrize("text,kind,p,m", [
        ("uniform", "uniform", 0.5, None), ("uniform:0.25", "uniform", 0.25, None),
        ("evzero:100", "evzero", 0.5, 100), ("evzero:7:0.9", "evzero", 0.9, 7),
    ])
    def test_samplers(self, text, kind, p, m):
        s = parse_sampler(text)
        assert (s.kind, s.p, s.m) == (kind, p, m)

    @pytest.mark.parametrize("text", ["evzero", "uniform:2", "evzero:-1",
                                      "evzero:1:2", "poisson"])
    def test_bad_samplers(self, text):
        with pytest.raises(ValidationError):
            parse_sampler(text)


class TestGuessSemantics:
    def test_base_g_always_zero(self):
        bound = bind_strategy(StrategySpec("g"), 0, 0)
        for j in range(5):
            assert bound.guess(j, [1, 0, 1]) == 0

    def test_flipped_pattern(self):
        # flip parameter 3: players 0..4 guess 1,1,1,0,0
        bound = bind_strategy(StrategySpec("gj", 3), 0, 0)
        assert [bound.guess(j, []) for j in range(5)] == [1, 1, 1, 0, 0]

    def test_mixture_d_index_zero_matches_base(self):
        for seed in range(50):
            bound = bind_strategy(StrategySpec("d"), seed, 0)
            if bound.latent_index == 0:
                assert all(bound.guess(j, []) == 0 for j in range(6))
                break
        else:
            pytest.fail("no seed sampled index 0")

    def test_majority_and_ties(self):
        bound = bind_strategy(StrategySpec("majority"), 0, 0)
        assert bound.guess(0, [1, 1, 0]) == 1
        assert bound.guess(0, [1, 0, 0]) == 0
        assert bound.guess(0, [1, 0]) == 0  # tie goes to 0
        assert bound.guess(0, []) == 0     # empty window is a tie

    def test_constant(self):
        bound = bind_strategy(StrategySpec("const", 1), 0, 0)
        assert bound.guess(9, [0, 0]) == 1

    def test_random_is_per_player_stateless(self):
        key = derive_key(4, 2)
        bound = bind_strategy(StrategySpec("random"), 0, key)
        first = [bound.guess(j, []) for j in range(32)]
        again = [bound.guess(j, []) for j in reversed(range(32))]
        assert first == list(reversed(again))
        assert 0 < sum(first) < 32


class TestSampleInput:
    def test_evzero_m0_all_zeros(self):
        hat = sample_input(InputSampler("evzero", m=0), 64, seed=9)
        assert not hat.bits.any()

    def test_uniform_p0_all_zeros(self):
        hat = sample_input(InputSampler("uniform", p=0.0), 64, seed=9)
        assert not hat.bits.any()

    def test_uniform_p1_all_ones(self):
        hat = sample_input(InputSampler("uniform", p=1.0), 64, seed=9)
        assert hat.bits.all()

    def test_uniform_fair_frequency_large(self):
        # 4 sigma of Binomial(1e6, 1/2) is 0.002 on the fraction
        for seed in (0, 1, 2):
            hat = sample_input(InputSampler("uniform"), 10 ** 6, seed=seed)
            assert abs(hat.bits.mean() - 0.5) < 0.002

    def test_evzero_prefix_random_tail_zero(self):
        hat = sample_input(InputSampler("evzero", m=100), 256, seed=5)
        assert hat.bits[100:].sum() == 0
        assert 20 < hat.bits[:100].sum() < 80

    def test_m_exceeding_horizon(self):
        with pytest.raises(ConfigError):
            sample_input(InputSampler("evzero", m=10), 5, seed=0)

    def test_deterministic_given_seed(self):
        a = sample_input(InputSampler("uniform"), 128, seed=11)
        b = sample_input(InputSampler("uniform"), 128, seed=11)
        assert np.array_equal(a.bits, b.bits)

    def test_visible_window(self):
        hat = sample_input(InputSampler("uniform"), 8, seed=1)
        v = hat.visible(5)
        assert len(v) == 2
        assert [v[0], v[1]] == [int(hat.bits[6]), int(hat.bits[7])]
        with pytest.raises(DomainError):
            hat.visible(8)


class TestMixtureIndex:
    def test_d_law(self):
        hits = sum(sample_mixture_index("d", derive_key(1, t))
                   for t in range(100_000))
        assert abs(hits / 100_000 - 0.5) < 0.01

    def test_e_law(self):
        counts = {}
        for t in range(100_000):
            j = sample_mixture_index("e", derive_key(2, t))
            counts[j] = counts.get(j, 0) + 1
        assert abs(counts[0] / 100_000 - 0.5) < 0.01
        assert abs(counts[3] / 100_000 - 0.0625) < 0.004

    def test_e_always_finite(self):
        assert all(sample_mixture_index("e", derive_key(3, t)) < 64
                   for t in range(1000))


class TestRunGame:
    def test_base_g_on_evzero(self):
        stats = run_game("g", "evzero:100", n=10_000, seed=4)
        assert stats.last_loss is not None and stats.last_loss < 100
        assert stats.win_ratio >= 0.99

    def test_const0_on_all_ones(self):
        stats = run_game("const:0", "uniform:1.0", n=500, seed=0)
        assert stats.wins == 0 and stats.s_sum == -500
        assert stats.win_ratio == 0.0 and stats.last_loss == 499

    def test_base_g_on_all_zeros(self):
        stats = run_game("g", "evzero:0", n=500, seed=0)
        assert stats.win_ratio == 1.0 and stats.last_loss is None

    def test_win_ratio_identity(self):
        stats = run_game("random", "uniform", n=777, seed=3)
        assert stats.win_ratio == win_ratio(stats.s_sum, stats.n)
        assert stats.s_sum == 2 * stats.wins - stats.n

    def test_checkpoints_and_retention(self):
        stats = run_game("random", "uniform", n=100, seed=6,
                         checkpoints=[1, 2, 50, 100], retain=True)
        s = np.cumsum(2 * stats.results.astype(int) - 1)
        assert stats.checkpoints == ((1, int(s[0])), (2, int(s[1])),
                                     (50, int(s[49])), (100, int(s[99])))
        assert stats.guesses.shape == (100,)

    def test_players_beyond_horizon_rejected(self):
        with pytest.raises(ConfigError):
            run_game("g", "uniform", n=10, horizon=5)

    def test_bad_checkpoint(self):
        with pytest.raises(ConfigError):
            run_game("g", "uniform", n=10, checkpoints=[0])


class TestEngineEquivalence:
    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    @pytest.mark.parametrize("sampler", ["uniform", "uniform:0.3", "evzero:13"])
    def test_scalar_vs_blocked(self, strategy, sampler):
        kwargs = dict(n=97, horizon=120, seed=8, trial=2,
                      checkpoints=[1, 13, 97])
        a = run_game(strategy, sampler, engine="scalar", **kwargs)
        b = run_game(strategy, sampler, engine="blocked", **kwargs)
        assert a == b
        assert a.latent_index == b.latent_index

    @pytest.mark.parametrize("strategy", ["g", "gj:7", "d", "e", "const:0",
                                          "const:1"])
    def test_tail_vs_blocked_on_evzero(self, strategy):
        for trial in range(6):
            kwargs = dict(n=300, horizon=400, seed=9, trial=trial,
                          checkpoints=[1, 20, 250, 300])
            a = run_game(strategy, "evzero:21", engine="tail", **kwargs)
            b = run_game(strategy, "evzero:21", engine="blocked", **kwargs)
            assert a == b
            assert a.latent_index == b.latent_index

    def test_blocked_crossing_block_boundary(self):
        n = BLOCK + 17
        a = run_game("random", "uniform", n=n, seed=1, engine="blocked",
                     checkpoints=[BLOCK - 1, BLOCK, BLOCK + 1, n])
        b = run_game("random", "uniform", n=n, seed=1, engine="scalar",
                     checkpoints=[BLOCK - 1, BLOCK, BLOCK + 1, n])
        assert a == b

    def test_tail_engine_guard(self):
        with pytest.raises(ConfigError):
            run_game("majority", "evzero:5", n=10, engine="tail")
        with pytest.raises(ConfigError):
            run_game("g", "uniform", n=10, engine="tail")


class TestRepeatRuns:
    def test_singleton_matches_run_game(self):
        only, = repeat_runs("g", "uniform", n=50, trials=1, seed=12)
        assert only == run_game("g", "uniform", n=50, seed=12, trial=0)

    def test_determinism(self):
        a = repeat_runs("e", "evzero:9", n=64, trials=20, seed=31)
        b = repeat_runs("e", "evzero:9", n=64, trials=20, seed=31)
        assert a == b
        assert [x.latent_index for x in a] == [x.latent_index for x in b]

    def test_trials_differ(self):
        stats = repeat_runs("random", "uniform", n=64, trials=10, seed=31)
        assert len({st.s_sum for st in stats}) > 1

    def test_const0_mean_ratio_clt(self):
        # 1000 trials x 1e4 fair coins: mean W within 0.5 +/- 0.005
        stats = repeat_runs("const:0", "uniform", n=10_000, trials=1000, seed=77)
        mean_w = sum(st.win_ratio for st in stats) / len(stats)
        assert abs(mean_w - 0.5) < 0.005


class TestParadoxes:
    def test_mixture_d_losses_stay_below_m_plus_one(self):
        for trial in range(200):
            stats = run_game("d", "evzero:10", n=4000, seed=41, trial=trial)
            assert stats.last_loss is None or stats.last_loss < 11

    def test_mixture_e_losses_bounded_by_max_m_latent(self):
        for trial in range(200):
            stats = run_game("e", "evzero:10", n=4000, seed=42, trial=trial)
            bound = max(10, stats.latent_index)
            assert stats.last_loss is None or stats.last_loss < bound


class TestSuffixIsolation:
    def test_views_never_leave_the_window(self):
        hat = sample_input(InputSampler("uniform"), 16, seed=2)
        v = hat.visible(7)
        with pytest.raises(IndexError):
            v[8]
        with pytest.raises(IndexError):
            v[-9]
        assert v[-1] == int(hat.bits[15])

    def test_tripwire_records_only_later_indices(self):
        SuffixView.trace = True
        try:
            orig_visible = sample_input(InputSampler("uniform"), 40, seed=3)
            for strategy in ALL_STRATEGIES:
                bound = bind_strategy(parse_strategy(strategy),
                                      derive_key(1, 2), derive_key(1, 3))
                for j in range(40):
                    window = orig_visible.visible(j)
                    bound.guess(j, window)
                    if window.accesses:
                        assert min(window.accesses) >= j + 1
                        assert max(window.accesses) <= 39
        finally:
            SuffixView.trace = False

    def test_scalar_engine_only_reads_suffix(self):
        SuffixView.trace = True
        try:
            run_game("majority", "uniform", n=30, seed=5, engine="scalar")
        finally:
            SuffixView.trace = False


@given(st.integers(1, 400), st.integers(0, 2 ** 32), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_win_ratio_identity_property(n, seed, trial):
    stats = run_game("random", "uniform", n=n, seed=seed, trial=trial)
    assert stats.win_ratio == (stats.s_sum / stats.n + 1) / 2
