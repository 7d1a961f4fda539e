"""Constellation-aided TFO correction.

The grid search over the pilots leaves a short list of plausible (tau, eps)
pairs per user.  Each is tried on the user's separated data symbols; the
one whose de-rotated BPSK symbols line up best on a common axis wins, and
the channel is re-averaged with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PhaseGrid, SystemConfig
from .gbcr2 import RecoveredUser, derotate, mse_table
from .phy import phase_coeff


@dataclass(frozen=True)
class TfoCandidate:
    tau: int
    eps: float
    mse: float


def candidate_list(path, rows: np.ndarray, grid: PhaseGrid, cfg: SystemConfig, n_cand: int) -> list[TfoCandidate]:
    """The ``n_cand`` grid points with the smallest path MSE, ascending.

    ``rows`` are the path's ``T_p x M`` observation rows (as seen when the
    path was extracted).
    """
    if not 1 <= n_cand <= grid.size:
        raise ValueError(f"n_cand must lie in [1, {grid.size}]")
    table = mse_table(np.asarray([path]), rows[None], grid, cfg)[0]
    order = np.argsort(table, kind="stable")[:n_cand]
    taus, epss = grid.points()
    return [TfoCandidate(int(taus[g]), float(epss[g]), float(table[g])) for g in order]


def compensation_degree(symbols) -> complex:
    """BPSK alignment score: symbols in the right half-plane are added,
    those in the left half-plane subtracted.  Symbols with a real part of
    exactly zero are ignored."""
    x = np.asarray(symbols, dtype=complex)
    return complex(np.sum(np.sign(x.real) * x))


def slot_coordinates(positions, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """OFDM symbol number (1-based, counted from the first pilot) and
    subcarrier index of data-phase slots."""
    positions = np.asarray(positions, dtype=np.int64)
    t = cfg.T_p + 1 + positions // cfg.S
    return t, cfg.s[positions % cfg.S]


def select_tfo(candidates: list[TfoCandidate], x_hat: np.ndarray, positions, cfg: SystemConfig) -> tuple[int, float, np.ndarray]:
    """Pick the candidate maximizing ``|rho|`` over all coded data symbols.

    ``x_hat`` holds the user's separated data-phase symbols, either flat
    ``(L_c,)`` or ``(T_d, S)``; ``positions`` are the slots carrying the
    user's coded bits.  Ties keep the earlier (lower-MSE) candidate.
    Returns ``(tau, eps, |rho| per candidate)``.
    """
    if not candidates:
        raise ValueError("empty candidate list")
    flat = np.asarray(x_hat).reshape(-1)
    positions = np.asarray(positions, dtype=np.int64)
    t, s = slot_coordinates(positions, cfg)
    obs = flat[positions]
    scores = np.empty(len(candidates))
    for n, c in enumerate(candidates):
        derot = obs / phase_coeff(c.tau, c.eps, t, s, cfg)
        scores[n] = abs(compensation_degree(derot))
    best = int(np.argmax(scores))
    return candidates[best].tau, candidates[best].eps, scores


def reestimate_channel(user: RecoveredUser, tau: int, eps: float, gain: float, cfg: SystemConfig) -> np.ndarray:
    """Re-average the user's non-collided stage rows with a new TFO."""
    derot = derotate(user.rows, user.path, tau, eps, cfg)
    sel = np.asarray(user.noncollided, dtype=np.int64) - 1
    return derot[sel].mean(axis=0) / gain


def reestimate_channels(users: list[RecoveredUser], tfos, gain: float, cfg: SystemConfig) -> np.ndarray:
    """Channel matrix ``(K_hat, M)`` re-estimated with the refined TFOs."""
    if not users:
        return np.zeros((0, cfg.M), dtype=complex)
    return np.stack([reestimate_channel(u, tau, eps, gain, cfg) for u, (tau, eps) in zip(users, tfos)])
