import itertools
import math
from fractions import Fraction

import pytest

from bellhat.concentration import (
    AzumaQuery,
    CensusReport,
    azuma_bound,
    exact_expected_wins,
    tail_loss_census,
    verify_concentration,
    win_set,
)
from bellhat.errors import CapacityError, ContractError, ValidationError
from bellhat.hatgame import bind_strategy, parse_strategy

DETERMINISTIC = ["g", "gj:1", "gj:2", "gj:5", "const:0", "const:1", "majority"]


def replay_win_count(strategy_text, j, horizon):
    """Independent oracle: replay the strategy on every explicit prefix."""
    bound = bind_strategy(parse_strategy(strategy_text), 0, 0)
    wins = 0
    for prefix in itertools.product((0, 1), repeat=horizon):
        visible = list(prefix[j + 1:])
        if bound.guess(j, visible) == prefix[j]:
            wins += 1
    return wins


class TestAzumaBound:
    def test_clamped_at_one(self):
        assert azuma_bound(AzumaQuery(n=10, t=0.0)) == 1.0

    def test_direct_formula_small(self):
        # n=100, t=20: 2 exp(-400/200) = 2 e^-2
        want = 2.0 * math.exp(-2.0)
        assert azuma_bound(AzumaQuery(n=100, t=20.0)) == pytest.approx(want, abs=1e-12)
        assert want == pytest.approx(0.27067, abs=5e-6)

    def test_direct_formula_large(self):
        # n=1e4, t=400: 2 exp(-160000/20000) = 2 e^-8
        want = 2.0 * math.exp(-8.0)
        assert azuma_bound(AzumaQuery(n=10 ** 4, t=400.0)) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(6.709e-4, abs=2e-6)

    def test_validation(self):
        with pytest.raises(ValidationError):
            AzumaQuery(n=0, t=1.0)
        with pytest.raises(ValidationError):
            AzumaQuery(n=1, t=-1.0)
        with pytest.raises(ValidationError):
            AzumaQuery(n=1, t=1.0, c=2.0)


class TestWinSet:
    def test_const0_measure_half(self):
        for j in range(3):
            ws = win_set("const:0", j, 3)
            assert ws.measure == Fraction(1, 2)
            assert ws.count == replay_win_count("const:0", j, 3)

    def test_flipped_player0_wins_on_own_one(self):
        ws = win_set("gj:2", 0, 3)
        assert ws.measure == Fraction(1, 2)
        # player 0 guesses 1, so the win set is exactly {x0 = 1}
        for idx in range(8):
            assert ws.mask[idx] == bool(idx & 1)

    def test_every_deterministic_strategy_measure_half(self):
        for strategy in DETERMINISTIC:
            for horizon in (1, 2, 3, 5, 8):
                for j in range(horizon):
                    ws = win_set(strategy, j, horizon)
                    assert ws.measure == Fraction(1, 2), (strategy, j, horizon)

    def test_against_replay_oracle(self):
        for strategy in ("majority", "gj:2"):
            for j in range(4):
                assert win_set(strategy, j, 4).count == \
                    replay_win_count(strategy, j, 4)

    def test_contains(self):
        ws = win_set("majority", 0, 3)
        for prefix in itertools.product((0, 1), repeat=3):
            bound = bind_strategy(parse_strategy("majority"), 0, 0)
            won = bound.guess(0, list(prefix[1:])) == prefix[0]
            assert ws.contains(prefix) == won

    def test_probabilistic_rejected(self):
        with pytest.raises(ContractError):
            win_set("d", 0, 3)

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            win_set("const:0", 0, 25)


class TestExactExpectedWins:
    def test_three_players_const0(self):
        assert exact_expected_wins("const:0", 3) == Fraction(3, 2)
        # independent enumeration: 12 wins over 8 prefixes
        total = sum(replay_win_count("const:0", j, 3) for j in range(3))
        assert Fraction(total, 8) == Fraction(3, 2)

    def test_three_players_majority(self):
        assert exact_expected_wins("majority", 3) == Fraction(3, 2)
        total = sum(replay_win_count("majority", j, 3) for j in range(3))
        assert Fraction(total, 8) == Fraction(3, 2)

    def test_single_player_any_strategy(self):
        for strategy in DETERMINISTIC:
            assert exact_expected_wins(strategy, 1) == Fraction(1, 2)

    def test_half_identity_up_to_twelve(self):
        for strategy in DETERMINISTIC:
            for n in (2, 5, 9, 12):
                assert exact_expected_wins(strategy, n) == Fraction(n, 2)

    def test_guards(self):
        with pytest.raises(CapacityError):
            exact_expected_wins("const:0", 21)
        with pytest.raises(ContractError):
            exact_expected_wins("e", 3)


class TestVerifyConcentration:
    def test_constant_strategy_passes(self):
        report = verify_concentration("const:0", n=2000, trials=300,
                                      delta=0.05, seed=5)
        assert report.passed and not report.low_power
        assert report.threshold == pytest.approx(
            math.sqrt(2 * 2000 * math.log(2 / 0.05)))
        assert report.bound_at_threshold == pytest.approx(0.05)

    def test_majority_strategy_passes(self):
        report = verify_concentration("majority", n=2000, trials=300,
                                      delta=0.05, seed=6)
        assert report.passed

    def test_degenerate_single_trial(self):
        report = verify_concentration("const:0", n=100, trials=1,
                                      delta=0.05, seed=7)
        assert report.empirical_fraction in (0.0, 1.0)
        assert report.low_power

    def test_injected_values(self):
        # threshold for n=100, delta=0.5: sqrt(200 ln 4) ~ 16.65
        report = verify_concentration("const:0", n=100, trials=4, delta=0.5,
                                      s_values=[0, 20, -30, 2])
        assert report.exceedances == 2
        assert report.empirical_fraction == 0.5
        assert report.trials == 4

    def test_delta_validation(self):
        with pytest.raises(ValidationError):
            verify_concentration("const:0", n=10, trials=2, delta=0.0)


class TestTailLossCensus:
    def test_base_g_m0_never_loses(self):
        report = tail_loss_census("g", m=0, n=256, trials=50, seed=1)
        assert report.histogram == ((None, 50),)
        assert report.max_last_loss() is None

    def test_mixture_d_bounded_by_m(self):
        report = tail_loss_census("d", m=10, n=4096, trials=1000, seed=2)
        assert report.max_last_loss() <= 10
        assert report.fraction_at_least(11) == 0.0

    def test_mixture_e_late_mass_below_geometric_tail(self):
        trials = 10_000
        report = tail_loss_census("e", m=10, n=4096, trials=trials, seed=3)
        for k in range(1, 11):
            slack = 3 * math.sqrt(2.0 ** -k / trials)
            assert report.fraction_at_least(10 + k) <= 2.0 ** -k + slack
        # the geometric law itself, two-sided, on the latent index
        for k in range(1, 11):
            p = 2.0 ** -k
            slack = 3 * math.sqrt(p / trials)
            assert abs(report.latent_fraction_at_least(k) - p) <= slack

    def test_census_csv_rows(self):
        report = tail_loss_census("g", m=2, n=64, trials=20, seed=4)
        rows = dict(report.csv_rows())
        assert sum(rows.values()) == 20
        assert all(key >= -1 for key in rows)
        assert isinstance(report, CensusReport)
