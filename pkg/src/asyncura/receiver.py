"""End-to-end slot receiver built from the front end, the collision graph,
the GB-CR2 core, constellation-aided refinement and the LDPC decoder."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gbcr2
from .config import PhaseGrid, SystemConfig
from .frontend import build_observations, detect_active_rows, mmse_data_estimate_masked
from .graph import CollisionGraph, build_graph
from .ldpc import make_ldpc
from .refine import TfoCandidate, candidate_list, reestimate_channels, select_tfo, slot_coordinates
from .phy import phase_coeff
from .tx import build_interleaver, index_to_segment, tree_code

LLR_CLIP = 30.0


@dataclass
class DecodedUser:
    recovered: gbcr2.RecoveredUser
    tau: int
    eps: float
    h_hat: np.ndarray
    candidates: list[TfoCandidate]
    message: np.ndarray
    converged: bool

    @property
    def path(self):
        return self.recovered.path


@dataclass
class ReceiverOutput:
    users: list[DecodedUser]
    graph: CollisionGraph
    H_coarse: np.ndarray
    H_final: np.ndarray
    trace: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return min(self.graph.node_counts, default=0) == 0

    def messages(self) -> list[np.ndarray]:
        """Recovered message list: accepted paths whose LDPC decoding
        converged, duplicates removed."""
        seen, out = set(), []
        for u in self.users:
            if not u.converged:
                continue
            key = u.message.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(u.message)
        return out


def user_positions(path, cfg: SystemConfig) -> np.ndarray:
    return np.asarray(build_interleaver(*path, cfg.L_c, cfg.code_seed)[: cfg.L_code])


def detect_data(Y_data: np.ndarray, H: np.ndarray, positions: list[np.ndarray], cfg: SystemConfig):
    """Separate every recovered user's data symbols, one MMSE per
    subcarrier over the users whose interleaver occupies it.

    Returns ``(x_hat, mu)``, both ``(K, L_c)`` in slot order, for unit-power
    BPSK.
    """
    K = len(positions)
    active = np.zeros((K, cfg.L_c), dtype=bool)
    for k, pos in enumerate(positions):
        active[k, pos] = True
    active = active.reshape(K, cfg.T_d, cfg.S)
    H_eff = cfg.data_amplitude * np.asarray(H)
    X = np.zeros((K, cfg.T_d, cfg.S), dtype=complex)
    MU = np.zeros((K, cfg.T_d, cfg.S))
    for t in range(cfg.T_d):
        X[:, t], MU[:, t] = mmse_data_estimate_masked(Y_data[t], H_eff, active[:, t], cfg.sigma_n2)
    return X.reshape(K, -1), MU.reshape(K, -1)


def bpsk_llr(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """LLR (positive = bit 0) of ``x = mu s + n`` with ``var(n) = mu (1 - mu)``."""
    llr = 4.0 * x.real / np.maximum(1.0 - mu, 1e-12)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)


def receive(
    Y_pilots: np.ndarray,
    Y_data: np.ndarray,
    cfg: SystemConfig,
    tfo_oracle: gbcr2.TfoOracle | None = None,
    trace: list[str] | None = None,
) -> ReceiverOutput:
    grid = PhaseGrid.from_config(cfg)
    tree = tree_code(cfg.B_p, cfg.code_seed)
    code = make_ldpc(cfg.L_code, cfg.B_c, cfg.code_seed)

    obs = build_observations(Y_pilots, cfg)
    nodes = [detect_active_rows(obs.G_hat[i], cfg, obs.sigma_eff2) for i in range(cfg.T_p)]
    graph = build_graph(nodes, tree)
    trace = [] if trace is None else trace
    recovered, _ = gbcr2.run(obs, graph.paths, grid, cfg, tfo_oracle=tfo_oracle, trace=trace)
    K = len(recovered)
    if K == 0:
        empty = np.zeros((0, cfg.M), dtype=complex)
        return ReceiverOutput([], graph, empty, empty, trace)

    H_coarse = np.stack([u.h_hat for u in recovered])
    positions = [user_positions(u.path, cfg) for u in recovered]
    known = [tfo_oracle(u.path) if tfo_oracle is not None else None for u in recovered]

    tfos, cand_lists = [], []
    x_coarse = None
    if cfg.refine and any(k is None for k in known):
        x_coarse, _ = detect_data(Y_data, H_coarse, positions, cfg)
    for k, u in enumerate(recovered):
        if known[k] is not None:
            tfos.append((int(known[k][0]), float(known[k][1])))
            cand_lists.append([TfoCandidate(*tfos[-1], u.mse)])
            continue
        cands = candidate_list(u.path, u.rows, grid, cfg, cfg.N_cand)
        cand_lists.append(cands)
        if cfg.refine:
            tau, eps, _ = select_tfo(cands, x_coarse[k], positions[k], cfg)
        else:
            tau, eps = u.tau_hat, u.eps_hat
        tfos.append((tau, eps))

    H_final = reestimate_channels(recovered, tfos, obs.gain, cfg)
    x_hat, mu = detect_data(Y_data, H_final, positions, cfg)
    llrs = np.empty((K, cfg.L_code))
    for k, (tau, eps) in enumerate(tfos):
        t, s = slot_coordinates(positions[k], cfg)
        x = x_hat[k, positions[k]] / phase_coeff(tau, eps, t, s, cfg)
        llrs[k] = bpsk_llr(x, mu[k, positions[k]])
    bits, converged, _ = code.decode_bp(llrs, cfg.ldpc_max_iter)

    users = []
    for k, u in enumerate(recovered):
        msg = np.concatenate(
            [index_to_segment(u.path[0], cfg.B_p), index_to_segment(u.path[1], cfg.B_p), bits[k, : cfg.B_c]]
        ).astype(np.uint8)
        users.append(DecodedUser(u, tfos[k][0], tfos[k][1], H_final[k], cand_lists[k], msg, bool(converged[k])))
    return ReceiverOutput(users, graph, H_coarse, H_final, trace)
