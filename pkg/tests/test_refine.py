import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asyncura import gbcr2
from asyncura.config import PhaseGrid
from asyncura.phy import simulate_data_symbol
from asyncura.refine import (
    TfoCandidate,
    candidate_list,
    compensation_degree,
    reestimate_channel,
    select_tfo,
    slot_coordinates,
)
from helpers import EXACT, make_user, observations, valid_tuple

GRID = PhaseGrid.from_config(EXACT)
H1 = np.array([1.0 + 0.5j, -0.3 + 1j, 0.8, -1j])


def data_observation(tau, eps, sigma2=0.0, seed=0, n=200):
    """Single-antenna, unit-channel data phase of one user; returns the
    de-mixed slot-order symbols, the coded positions and the BPSK signs."""
    cfg = EXACT.replace(M=1, sigma_n2=sigma2)
    rng = np.random.default_rng(seed)
    positions = np.sort(rng.choice(cfg.L_c, n, replace=False))
    signs = rng.choice([-1.0, 1.0], n)
    x = np.zeros(cfg.L_c, complex)
    x[positions] = signs
    u = make_user((1, 1, 1, 1), tau, eps, [1.0], cfg)
    blocks = x.reshape(cfg.T_d, cfg.S)
    Y = np.stack([simulate_data_symbol([u], blocks[j][None], cfg.T_p + 1 + j, cfg, rng, "simplified") for j in range(cfg.T_d)])
    return Y[..., 0].reshape(-1), positions, signs


class TestCandidates:
    tup = valid_tuple(11, 22)
    obs = observations([make_user(tup, 5, GRID.q[3], H1)], EXACT)

    def test_full_grid_sorted(self):
        c = candidate_list(self.tup, self.obs.rows(self.tup), GRID, EXACT, GRID.size)
        assert len(c) == GRID.size
        assert [x.mse for x in c] == sorted(x.mse for x in c)
        assert len({(x.tau, x.eps) for x in c}) == GRID.size

    def test_single_is_search_minimizer(self):
        c = candidate_list(self.tup, self.obs.rows(self.tup), GRID, EXACT, 1)
        _, tau, eps, _ = gbcr2.min_weight_search([self.tup], self.obs, GRID, EXACT)
        assert (c[0].tau, c[0].eps) == (tau, eps) == (5, GRID.q[3])

    def test_first_has_zero_mse(self):
        c = candidate_list(self.tup, self.obs.rows(self.tup), GRID, EXACT, 5)
        assert c[0].mse < 1e-20 and c[1].mse > 0

    def test_bad_length(self):
        with pytest.raises(ValueError):
            candidate_list(self.tup, self.obs.rows(self.tup), GRID, EXACT, 0)


class TestCompensationDegree:
    def test_examples(self):
        assert compensation_degree([1, -1]) == 2
        assert compensation_degree([1j, -1j]) == 0

    @given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=50), st.floats(-1.5, 1.5))
    def test_constant_rotation_keeps_norm(self, pattern, theta):
        # a common phase only turns rho, it does not shrink it
        x = np.array(pattern)
        assert abs(compensation_degree(x * np.exp(1j * theta))) == pytest.approx(len(x))

    @given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=2, max_size=50), st.floats(0.01, 0.7))
    def test_phase_ramp_reduces_norm(self, pattern, slope):
        # a residual TO/FO leaves a phase that varies over the symbols
        x = np.array(pattern)
        ramp = np.exp(1j * slope * np.arange(len(x)))
        assert abs(compensation_degree(x * ramp)) < abs(compensation_degree(x))

    def test_perfect_alignment(self):
        a = np.sqrt(EXACT.P_sym)
        x = a * np.random.default_rng(0).choice([-1.0, 1.0], 300)
        assert abs(compensation_degree(x)) == pytest.approx(300 * a)


class TestSelect:
    def test_single_candidate(self):
        x, pos, _ = data_observation(3, 0.0)
        tau, eps, _ = select_tfo([TfoCandidate(7, 0.01, 1.0)], x, pos, EXACT)
        assert (tau, eps) == (7, 0.01)

    def test_noiseless_truth_wins(self):
        x, pos, _ = data_observation(4, GRID.q[6])
        cands = [TfoCandidate(t, e, 0.0) for t, e in [(4, GRID.q[5]), (3, GRID.q[6]), (4, GRID.q[6]), (5, GRID.q[7])]]
        tau, eps, scores = select_tfo(cands, x, pos, EXACT)
        assert (tau, eps) == (4, GRID.q[6]) and np.argmax(scores) == 2

    def test_scale_invariance(self):
        x, pos, _ = data_observation(4, 0.004, sigma2=0.1, seed=3)
        cands = [TfoCandidate(4, e, 0.0) for e in GRID.q]
        a = select_tfo(cands, x, pos, EXACT)
        b = select_tfo(cands, 7.5 * x, pos, EXACT)
        assert a[:2] == b[:2] and np.allclose(7.5 * a[2], b[2])

    def test_nearer_offgrid_candidate(self):
        step = GRID.q[1] - GRID.q[0]
        wins = 0
        for seed in range(60):
            x, pos, _ = data_observation(2, GRID.q[4] + 0.3 * step, sigma2=1e-4, seed=seed)
            cands = [TfoCandidate(2, GRID.q[5], 0.0), TfoCandidate(2, GRID.q[4], 0.0)]
            wins += select_tfo(cands, x, pos, EXACT)[1] == GRID.q[4]
        assert wins / 60 >= 0.95

    def test_slot_coordinates(self):
        t, s = slot_coordinates([0, 127, 128, 2687], EXACT)
        assert list(t) == [5, 5, 6, 25] and list(s) == [1, 255, 1, 255]


class TestReestimate:
    def test_same_tfo_is_identity(self):
        tup = valid_tuple(11, 22)
        obs = observations([make_user(tup, 5, GRID.q[3], H1)], EXACT.replace(sigma_n2=0.3), seed=2)
        rec, _ = gbcr2.run(obs.copy(), [tup], GRID, EXACT)
        u = rec[0]
        assert np.allclose(reestimate_channel(u, u.tau_hat, u.eps_hat, obs.gain, EXACT), u.h_hat)

    def test_corrected_tfo_exact(self):
        tup = valid_tuple(11, 22)
        obs = observations([make_user(tup, 5, GRID.q[3], H1)], EXACT)
        rec, _ = gbcr2.run(obs.copy(), [tup], GRID, EXACT)
        u = rec[0]
        u.tau_hat, u.eps_hat = 5, GRID.q[4]  # pretend the coarse search was one step off
        h = reestimate_channel(u, 5, GRID.q[3], obs.gain, EXACT)
        assert np.sum(np.abs(h - H1) ** 2) / np.sum(np.abs(H1) ** 2) < 1e-20
