"""Fixture builders shared by the receiver tests."""

import numpy as np

from asyncura.config import PhaseGrid, SystemConfig
from asyncura.frontend import build_observations
from asyncura.phy import ActiveUser, phase_coeff, simulate_pilot_symbol
from asyncura.tx import tree_code

NOISELESS = SystemConfig(K_a=4, M=4, sigma_n2=1e-12, channel_mode="simplified", fo_on_grid=True, collision_free=True)
# truly noiseless: pilot MMSE is the identity and the collision threshold is 0
EXACT = NOISELESS.replace(sigma_n2=0.0)


def valid_tuple(a, b, cfg=NOISELESS):
    tree = tree_code(cfg.B_p, cfg.code_seed)
    return (a, b, *tree.parity_indices(a, b))


def make_user(tup, tau, eps, h, cfg=NOISELESS):
    return ActiveUser(np.zeros(cfg.B, np.uint8), tau, eps, np.asarray(h, complex), tuple(tup))


def pilots(users, cfg=NOISELESS, seed=0):
    rng = np.random.default_rng(seed)
    return np.stack(
        [
            simulate_pilot_symbol(users, t, [u.segment_indices[t - 1] for u in users], cfg, rng, cfg.channel_mode)
            for t in range(1, cfg.T_p + 1)
        ]
    )


def observations(users, cfg=NOISELESS, seed=0):
    return build_observations(pilots(users, cfg, seed), cfg)


def collision_pair(stage, cfg=NOISELESS):
    """Two valid tuples sharing the node of exactly one stage (1-based)."""
    tree = tree_code(cfg.B_p, cfg.code_seed)
    first = valid_tuple(5, 9, cfg)
    for a in range(1, cfg.N + 1):
        for b in range(1, cfg.N + 1):
            c, d = tree.parity_indices(a, b)
            other = (a, b, c, d)
            same = [first[i] == other[i] for i in range(4)]
            if same[stage - 1] and sum(same) == 1:
                return first, other
    raise RuntimeError("no pair found")


def collision_fixture(stage, cfg=EXACT, tfo1=(2, 4), tfo2=(6, 1)):
    """Two users colliding only at ``stage``.

    The second channel is ``0.3 * h1`` (rotated so that it adds in phase
    with user 1 at the shared node) plus a component orthogonal to ``h1``.
    The shared row then carries more energy than user 1's clean rows, so
    user 1's lowest-energy reference row is a clean one, and the coarse MSE
    of user 1's path is still minimized at its true grid point.  TFOs are
    given as (tau, index into the FO grid).
    """
    q = PhaseGrid.from_config(cfg).q
    tfo1, tfo2 = (tfo1[0], float(q[tfo1[1]])), (tfo2[0], float(q[tfo2[1]]))
    t1, t2 = collision_pair(stage, cfg)
    h1 = np.array([1.0 + 0.5j, -0.3 + 1j, 0.8, -1j])
    orth = np.array([0.2 - 0.4j, 0.5j, -0.6 + 0.1j, 0.3])
    orth = orth - (np.vdot(h1, orth) / np.vdot(h1, h1)) * h1
    s = cfg.s[t1[stage - 1] - 1]
    ratio = phase_coeff(*tfo1, stage, s, cfg) / phase_coeff(*tfo2, stage, s, cfg)
    h2 = 0.3 * ratio * h1 + 0.5 * orth
    return [make_user(t1, *tfo1, h1, cfg), make_user(t2, *tfo2, h2, cfg)]
