"""Graph-based channel reconstruction and collision resolution.

Paths of the collision graph are extracted greedily by their phase-aligned
cross-stage MSE, minimized jointly over path and TFO grid point.  An
extracted path is accepted if its de-rotated stage rows agree pairwise,
its channel is averaged over the stages judged collision-free, and the
reconstructed contribution is cancelled from the collided stages so the
remaining paths see cleaner rows.

Trace format (one line per extracted path)::

    iter=<n> path=<a>,<b>,<c>,<d> mse=<float> tau=<int> eps=<float> status=<accepted|invalid|empty> sic=<stage>:<node>;...|-
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import PhaseGrid, SystemConfig
from .frontend import PilotObservationSet
from .phy import phase_coeff

TfoOracle = Callable[[tuple], Optional[tuple[int, float]]]


@dataclass
class RecoveredUser:
    path: tuple[int, ...]
    h_hat: np.ndarray
    tau_hat: int
    eps_hat: float
    noncollided: tuple[int, ...]
    mse: float
    rows: np.ndarray = field(repr=False)
    stage_energy: np.ndarray = field(repr=False)


def path_phases(path, tau, eps, cfg: SystemConfig) -> np.ndarray:
    """Per-stage de-rotation phase of each node of ``path`` (stage ``i`` is
    OFDM symbol ``i``)."""
    path = np.asarray(path, dtype=np.int64)
    stages = np.arange(1, len(path) + 1)
    return phase_coeff(tau, eps, stages, cfg.s[path - 1], cfg)


def derotate(rows: np.ndarray, path, tau, eps, cfg: SystemConfig) -> np.ndarray:
    return rows / path_phases(path, tau, eps, cfg)[:, None]


def pairwise_mse(derot: np.ndarray) -> float:
    total = 0.0
    T = derot.shape[0]
    for i in range(T):
        for j in range(i + 1, T):
            total += float(np.sum(np.abs(derot[i] - derot[j]) ** 2))
    return total


def path_mse(path, observations: PilotObservationSet, tau, eps, cfg: SystemConfig) -> float:
    """Sum over stage pairs of squared distances between de-rotated rows."""
    return pairwise_mse(derotate(observations.rows(path), path, tau, eps, cfg))


def mse_table(paths: np.ndarray, rows: np.ndarray, grid: PhaseGrid, cfg: SystemConfig) -> np.ndarray:
    """Path MSE for every path and grid point, ``(n_paths, D * Q)``.

    Uses ``sum_{i<j} |u_i - u_j|^2 = T sum_i |u_i|^2 - |sum_i u_i|^2``; the
    first term does not depend on the unit-modulus de-rotation.  Columns
    are tau-major like ``grid.points()``.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
    n, T = paths.shape
    if n == 0:
        return np.zeros((0, grid.size))
    s = cfg.s[paths - 1]  # (n, T)
    stages = np.arange(1, T + 1)
    to_turns = np.mod(grid.d[:, None, None] * (1 - s)[None], cfg.N_c) / cfg.N_c  # (D, n, T)
    fo_expo = (cfg.N_cp + cfg.N_c) * stages - (cfg.N_c + 1) / 2
    fo_turns = grid.q[:, None] * fo_expo[None, :] / cfg.N_c  # (Q, T)
    conj_phase = np.exp(-2j * np.pi * (to_turns[:, None] + fo_turns[None, :, None, :]))  # (D, Q, n, T)
    summed = np.einsum("dqnt,ntm->dqnm", conj_phase, rows)
    coherent = np.sum(np.abs(summed) ** 2, axis=-1)  # (D, Q, n)
    energy = np.sum(np.abs(rows) ** 2, axis=(1, 2))
    table = T * energy[None, None, :] - coherent
    return np.maximum(table, 0.0).reshape(-1, n).T


def _argmin_lex(table: np.ndarray, scale: float) -> tuple[int, int]:
    """First (row-major) entry within rounding of the minimum."""
    flat = table.ravel()
    m = flat.min()
    k = int(np.flatnonzero(flat <= m + 1e-12 * max(scale, 1e-300))[0])
    return divmod(k, table.shape[1])


def min_weight_search(paths, observations: PilotObservationSet, grid: PhaseGrid, cfg: SystemConfig):
    """Minimum-MSE (path, tau, eps) over all paths and grid points.

    Ties go to the lexicographically smallest (path, tau, eps).
    """
    if len(paths) == 0:
        raise ValueError("no candidate paths")
    order = sorted(paths)
    rows = np.stack([observations.rows(p) for p in order])
    table = mse_table(np.array(order), rows, grid, cfg)
    scale = rows.shape[1] * float(np.max(np.sum(np.abs(rows) ** 2, axis=(1, 2))))
    i, g = _argmin_lex(table, scale)
    taus, epss = grid.points()
    return order[i], int(taus[g]), float(epss[g]), float(table[i, g])


def _valid(derot: np.ndarray) -> bool:
    energy = np.sum(np.abs(derot) ** 2, axis=1)
    T = derot.shape[0]
    for i in range(T):
        for j in range(i + 1, T):
            dist = np.sum(np.abs(derot[i] - derot[j]) ** 2)
            if not dist < max(energy[i], energy[j]):
                return False
    return True


def path_valid(path, tau, eps, observations: PilotObservationSet, cfg: SystemConfig) -> bool:
    """Every stage pair of de-rotated rows must be closer than the larger of
    the two row energies."""
    return _valid(derotate(observations.rows(path), path, tau, eps, cfg))


def _collided(derot: np.ndarray, gamma: float) -> np.ndarray:
    energy = np.sum(np.abs(derot) ** 2, axis=1)
    ref = derot[int(np.argmin(energy))]
    dist = np.sum(np.abs(derot - ref[None, :]) ** 2, axis=1)
    # rounding guard so that a noiseless run (gamma = 0) does not flag identical rows
    return dist > max(gamma, 1e-20 * float(energy.max()))


def node_collided(path, stage: int, tau, eps, observations: PilotObservationSet, gamma: float, cfg: SystemConfig) -> bool:
    """Whether the node of ``path`` at ``stage`` (1-based) is collided, i.e.
    its de-rotated row is farther than ``gamma`` from the path's
    lowest-energy row."""
    derot = derotate(observations.rows(path), path, tau, eps, cfg)
    return bool(_collided(derot, gamma)[stage - 1])


def collision_threshold(cfg: SystemConfig, sigma_eff2: float) -> float:
    return cfg.gamma_coeff * cfg.M * sigma_eff2


def reconstruct_channel(path, noncollided, observations: PilotObservationSet, tau, eps, cfg: SystemConfig) -> np.ndarray:
    """Average of the de-rotated rows over the non-collided stages (1-based),
    rescaled to channel units."""
    if len(noncollided) == 0:
        raise ValueError("cannot reconstruct a channel without a non-collided node")
    derot = derotate(observations.rows(path), path, tau, eps, cfg)
    sel = np.asarray(noncollided, dtype=np.int64) - 1
    return derot[sel].mean(axis=0) / observations.gain


def sic_update(observations: PilotObservationSet, stage: int, node: int, h_hat, tau, eps, cfg: SystemConfig) -> None:
    """Subtract a reconstructed user from one observation row, in place.

    Not idempotent: call once per (user, collided node).
    """
    p = phase_coeff(tau, eps, stage, cfg.s[node - 1], cfg)
    observations.G_hat[stage - 1, node - 1] -= p * observations.gain * np.asarray(h_hat)


def run(
    observations: PilotObservationSet,
    paths,
    grid: PhaseGrid,
    cfg: SystemConfig,
    tfo_oracle: TfoOracle | None = None,
    trace: list[str] | None = None,
) -> tuple[list[RecoveredUser], int]:
    """Extract, validate, reconstruct and cancel until no path is left.

    ``observations`` is modified by the cancellations.  ``tfo_oracle`` can
    reveal the true (tau, eps) of a path (genie bound); it returns ``None``
    for paths it does not know, which are then searched over the grid.
    """
    paths = sorted(paths.paths if hasattr(paths, "paths") else paths)
    if not paths:
        return [], 0
    taus, epss = grid.points()
    gamma = collision_threshold(cfg, observations.sigma_eff2)
    arr = np.array(paths, dtype=np.int64)
    T = arr.shape[1]

    override: dict[int, tuple[int, float]] = {}
    if tfo_oracle is not None:
        for k, p in enumerate(paths):
            hit = tfo_oracle(p)
            if hit is not None:
                override[k] = (int(hit[0]), float(hit[1]))

    def compute(idx: np.ndarray) -> np.ndarray:
        rows = observations.G_hat[np.arange(T)[None, :], arr[idx] - 1]
        tab = mse_table(arr[idx], rows, grid, cfg)
        for r, k in enumerate(idx):
            if int(k) in override:
                tau, eps = override[int(k)]
                tab[r] = np.inf
                tab[r, 0] = pairwise_mse(derotate(rows[r], arr[k], tau, eps, cfg))
        return tab

    alive = np.ones(len(paths), dtype=bool)
    table = compute(np.arange(len(paths)))
    users: list[RecoveredUser] = []
    it = 0
    while alive.any():
        it += 1
        live = np.flatnonzero(alive)
        scale = T * float(np.sum(np.abs(observations.G_hat) ** 2, axis=2).max(axis=1).sum())
        i, g = _argmin_lex(table[live], scale)
        k = int(live[i])
        mse = float(table[k, g])
        if k in override:
            tau, eps = override[k]
        else:
            tau, eps = int(taus[g]), float(epss[g])
        alive[k] = False
        path = paths[k]
        rows = observations.rows(path)
        derot = derotate(rows, path, tau, eps, cfg)
        status, touched = "invalid", []
        if _valid(derot):
            collided = _collided(derot, gamma)
            noncollided = tuple(int(x) + 1 for x in np.flatnonzero(~collided))
            if noncollided:
                status = "accepted"
                h = derot[np.asarray(noncollided) - 1].mean(axis=0) / observations.gain
                users.append(
                    RecoveredUser(
                        path=path,
                        h_hat=h,
                        tau_hat=tau,
                        eps_hat=eps,
                        noncollided=noncollided,
                        mse=mse,
                        rows=rows,
                        stage_energy=np.sum(np.abs(rows) ** 2, axis=1),
                    )
                )
                for st in np.flatnonzero(collided) + 1:
                    node = path[st - 1]
                    sic_update(observations, int(st), node, h, tau, eps, cfg)
                    touched.append((int(st), node))
            else:
                status = "empty"
        if touched and alive.any():
            hit = np.zeros(len(paths), dtype=bool)
            for st, node in touched:
                hit |= arr[:, st - 1] == node
            redo = np.flatnonzero(hit & alive)
            if redo.size:
                table[redo] = compute(redo)
        if trace is not None:
            sic = ";".join(f"{st}:{node}" for st, node in touched) or "-"
            trace.append(
                f"iter={it} path={','.join(map(str, path))} mse={mse:.6e} "
                f"tau={tau} eps={eps:.6f} status={status} sic={sic}"
            )
    return users, len(users)
