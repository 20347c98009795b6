import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percq import rng
from percq.errors import DomainError, ResourceBudgetError
from percq.percolation import PercConfig, mc_border_connectivity, recursion_iterate_levels
from percq.protocol import (MAX_ENUM_LEVEL, distillation_plan, enumerate_level_distribution,
                            pairs_per_distilled_link, post_swap_fidelity, run_chain_protocol,
                            sample_level_state, sample_level_states)
from percq.qstate import PERFECT, concurrence, make_pair, scp, swap, swap_concurrence
from percq.topology import build_hiernet

import oracles

BASE = make_pair(0.25)
C_HALF = make_pair(0.5 - math.sqrt(3) / 4)
# strictly inside (0, 1/2): neither separable nor perfect
interior = st.floats(0.01, 0.49).map(make_pair)


def _bruteforce_mean_scp(base, level):
    return sum(p * 2 * st[1] for p, st in oracles.level_states_bruteforce(tuple(base), level))


class TestEnumeration:
    def test_level_zero(self):
        d = enumerate_level_distribution(BASE, 0)
        assert [(b.probability, b.state) for b in d] == [(1.0, BASE)]

    def test_level_one(self):
        d = {round(b.state.lambda2, 12): b.probability for b in enumerate_level_distribution(BASE, 1)}
        assert d.keys() == {0.5, 0.1}
        assert d[0.1] == pytest.approx(0.625, abs=1e-15)
        assert d[0.5] == pytest.approx(0.375, abs=1e-15)

    @pytest.mark.parametrize("level", [0, 3, 7])
    def test_perfect_base(self, level):
        d = enumerate_level_distribution(PERFECT, level)
        assert len(d) == 1 and d.branches[0].state == PERFECT

    def test_level_two_mean_scp(self):
        d = enumerate_level_distribution(BASE, 2)
        assert d.mean_scp() == pytest.approx(0.3125, abs=1e-12)
        assert _bruteforce_mean_scp(BASE, 2) == pytest.approx(0.3125, abs=1e-12)

    @pytest.mark.parametrize("lam2", [0.05, 0.2, 0.25, 0.4])
    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_matches_bruteforce_tree(self, lam2, level):
        base = make_pair(lam2)
        ref = defaultdict(float)
        for p, st in oracles.level_states_bruteforce(tuple(base), level):
            ref[round(st[1], 9)] += p
        got = defaultdict(float)
        for b in enumerate_level_distribution(base, level):
            got[round(b.state.lambda2, 9)] += b.probability
        assert got.keys() == ref.keys()
        for k in ref:
            assert got[k] == pytest.approx(ref[k], abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.0, 0.5).map(make_pair), st.integers(0, 4))
    def test_probabilities_sum_to_one(self, base, level):
        assert enumerate_level_distribution(base, level).total() == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(interior)
    def test_scp_kept_at_level_one_and_lost_at_level_two(self, base):
        assert enumerate_level_distribution(base, 1).mean_scp() == pytest.approx(scp(base), abs=1e-12)
        assert enumerate_level_distribution(base, 2).mean_scp() < scp(base)

    @settings(max_examples=100, deadline=None)
    @given(interior)
    def test_psi_concurrence_is_alpha_c(self, base):
        d1 = enumerate_level_distribution(base, 1)
        psi_part = sum(b.probability * concurrence(b.state) for b in d1 if not b.state.is_perfect)
        phi_part = sum(b.probability for b in d1 if b.state.is_perfect)
        assert psi_part == pytest.approx(swap_concurrence(base), abs=1e-12)
        assert d1.mean_concurrence() == pytest.approx(psi_part + phi_part, abs=1e-12)

    def test_budget(self):
        enumerate_level_distribution(BASE, MAX_ENUM_LEVEL)
        with pytest.raises(ResourceBudgetError, match="sampl"):
            enumerate_level_distribution(BASE, MAX_ENUM_LEVEL + 1)


class TestSampling:
    def test_perfect_base(self):
        s = rng.TrialStream(1, 0, rng.STREAM_SWAPS)
        assert all(sample_level_state(PERFECT, 3, s) == PERFECT for _ in range(50))
        assert np.all(sample_level_states(PERFECT, 3, 1000, 1) == 0.5)

    @pytest.mark.parametrize("level", [0, 1, 2, 4])
    def test_batch_matches_single_draws(self, level):
        batch = sample_level_states(BASE, level, 300, 77)
        single = [sample_level_state(BASE, level, rng.TrialStream(77, t, rng.STREAM_SWAPS)).lambda2
                  for t in range(300)]
        assert list(batch) == single

    def test_level_one_frequency(self):
        x = sample_level_states(BASE, 1, 10**6, 5)
        freq = np.mean(np.abs(x - 0.1) < 1e-9)
        assert abs(freq - 0.625) < 0.002

    def test_level_two_mean_scp(self):
        x = sample_level_states(BASE, 2, 10**6, 6)
        assert abs(2 * x.mean() - 0.3125) < 0.002

    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_frequencies_match_enumeration(self, level):
        n = 10**6
        x = sample_level_states(BASE, level, n, 100 + level)
        for b in enumerate_level_distribution(BASE, level):
            freq = np.mean(np.abs(x - b.state.lambda2) < 1e-9)
            sigma = math.sqrt(b.probability * (1 - b.probability) / n)
            assert abs(freq - b.probability) <= 4 * sigma + 1e-12


class TestChainProtocol:
    @pytest.mark.parametrize("mode", ["ideal-scp", "state-tracked"])
    def test_perfect_base(self, mode):
        s = run_chain_protocol(9, 4, PERFECT, mode, PercConfig(0.0, 2000, 1))
        assert s.border_connected_fraction == 1.0

    def test_ideal_mode_reproduces_percolation_engine(self):
        cfg = PercConfig(0.0, 50_000, 9)
        s = run_chain_protocol(9, 4, BASE, "ideal-scp", cfg)
        e = mc_border_connectivity(build_hiernet(9, 4), PercConfig(scp(BASE), 50_000, 9))
        assert s.border == e
        assert s.level_mean_scp == (0.5,) * 4

    def test_state_tracked_level_means(self):
        s = run_chain_protocol(5, 3, BASE, "state-tracked", PercConfig(0.0, 10**5, 2))
        assert s.level_mean_scp[0] == 0.5
        # level-2 links: 1 per trial, scp in [0, 1]
        assert abs(s.level_mean_scp[2] - 0.3125) < 4 * 0.5 / math.sqrt(10**5)

    def test_state_tracked_below_ideal_and_matches_level_recursion(self):
        cfg = PercConfig(0.0, 10**5, 3)
        ideal = run_chain_protocol(9, 4, BASE, "ideal-scp", cfg)
        tracked = run_chain_protocol(9, 4, BASE, "state-tracked", cfg)
        q = [enumerate_level_distribution(BASE, lvl).mean_scp() for lvl in range(4)]
        exact = recursion_iterate_levels(q)[-1]
        ref = oracles.border_prob_exhaustive(9, build_hiernet(9, 4).links, lambda lvl: q[lvl])
        assert exact == pytest.approx(ref, abs=1e-12)
        assert abs(tracked.border.estimate - exact) < 4 * tracked.border.std_error
        gap = ideal.border.estimate - tracked.border.estimate
        assert gap > 4 * math.hypot(ideal.border.std_error, tracked.border.std_error)

    def test_thread_cap_is_irrelevant(self):
        cfg = PercConfig(0.0, 20_000, 4)
        a = run_chain_protocol(9, 4, BASE, "state-tracked", cfg, threads=1)
        b = run_chain_protocol(9, 4, BASE, "state-tracked", cfg)
        assert a == b

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            run_chain_protocol(9, 4, BASE, "optimal", PercConfig(0.0, 10, 0))


class TestDistillationPlan:
    def test_post_swap_fidelity_is_four_sevenths(self):
        assert post_swap_fidelity(C_HALF) == pytest.approx(4 / 7, abs=1e-12)

    def test_nine_nodes(self):
        plan = distillation_plan(9, C_HALF)
        assert plan.k_pairs == 4
        assert plan.iterations == 8
        assert plan.pairs_per_distilled_link == 32
        assert plan.total_initial_pairs == 2**2 * 32**3 == 131072
        assert plan.n_pow6 == 531441
        assert plan.fidelity_trace[-1] > 0.75 >= plan.fidelity_trace[-2]

    def test_three_nodes(self):
        plan = distillation_plan(3, C_HALF)
        assert plan.total_initial_pairs == 32

    def test_perfect_base(self):
        plan = distillation_plan(9, PERFECT)
        assert plan.iterations == 0 and plan.pairs_per_distilled_link == 1

    def test_pairs_per_link(self):
        assert pairs_per_distilled_link(8) == 32
        assert pairs_per_distilled_link(3, 0.3) == 10

    def test_domain(self):
        with pytest.raises(DomainError):
            distillation_plan(9, make_pair(0.01))
        with pytest.raises(DomainError):
            distillation_plan(10, C_HALF)
        with pytest.raises(DomainError):
            distillation_plan(2, C_HALF)
