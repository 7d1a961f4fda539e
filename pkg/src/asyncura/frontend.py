"""Receiver front end: pilot-stage MMSE, row-energy activity detection and
linear MMSE separation of the data symbols."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def pilot_signal_scale(cfg: SystemConfig) -> float:
    """Prior power of one nonzero pilot row entry, ``a^2 sigma_h^2``."""
    return cfg.pilot_amplitude**2 * cfg.sigma_h2


def pilot_shrinkage(cfg: SystemConfig) -> float:
    s = pilot_signal_scale(cfg)
    if cfg.sigma_n2 == 0:
        return 1.0
    return s / (s + cfg.sigma_n2)


def effective_noise(cfg: SystemConfig) -> float:
    """Noise variance per entry of the pilot MMSE output."""
    return pilot_shrinkage(cfg) ** 2 * cfg.sigma_n2


def mmse_pilot_estimate(Y_t: np.ndarray, cfg: SystemConfig, signal_scale: float | None = None) -> np.ndarray:
    """MMSE estimate of the row-sparse pilot matrix for the identity codebook.

    With ``A = I`` the estimator ``A^H (A A^H + sigma_n^2 I)^{-1} Y``
    collapses to a per-entry shrinkage ``s / (s + sigma_n^2)`` where ``s``
    is the prior power of an active entry (``pilot_signal_scale`` unless
    overridden).
    """
    s = pilot_signal_scale(cfg) if signal_scale is None else signal_scale
    if cfg.sigma_n2 == 0:
        return np.array(Y_t, dtype=complex)
    return Y_t * (s / (s + cfg.sigma_n2))


@dataclass
class PilotObservationSet:
    """Per-stage MMSE outputs, ``G_hat[t - 1]`` is ``N x M``.

    ``gain`` is the amplitude a unit channel coefficient has in ``G_hat``
    (pilot amplitude times MMSE shrinkage), ``sigma_eff2`` the noise
    variance per entry.  Only successive interference cancellation writes
    to ``G_hat``.
    """

    G_hat: np.ndarray
    gain: float
    sigma_eff2: float

    @property
    def T_p(self) -> int:
        return self.G_hat.shape[0]

    def rows(self, path) -> np.ndarray:
        """The ``T_p x M`` observation rows a path goes through."""
        idx = np.asarray(path, dtype=np.int64) - 1
        return self.G_hat[np.arange(len(idx)), idx].copy()

    def copy(self) -> "PilotObservationSet":
        return PilotObservationSet(self.G_hat.copy(), self.gain, self.sigma_eff2)


def build_observations(Y_pilots, cfg: SystemConfig) -> PilotObservationSet:
    G = np.stack([mmse_pilot_estimate(Y, cfg) for Y in Y_pilots])
    return PilotObservationSet(G, cfg.pilot_amplitude * pilot_shrinkage(cfg), effective_noise(cfg))


def detect_active_rows(G_hat_t: np.ndarray, cfg: SystemConfig, sigma_eff2: float | None = None) -> np.ndarray:
    """1-based indices of rows whose energy exceeds
    ``act_thresh_coeff * M * sigma_eff2``, ascending."""
    if sigma_eff2 is None:
        sigma_eff2 = effective_noise(cfg)
    energy = np.sum(np.abs(G_hat_t) ** 2, axis=1)
    thresh = cfg.act_thresh_coeff * G_hat_t.shape[1] * sigma_eff2
    return np.flatnonzero(energy > thresh) + 1


def mmse_data_estimate(Y_t: np.ndarray, H_hat: np.ndarray, sigma_n2: float) -> np.ndarray:
    """Linear MMSE separation ``H* (H^T H* + sigma_n^2 I_M)^{-1} Y^T``.

    Evaluated in the equivalent ``K x K`` form ``(H* H^T + sigma_n^2 I)^{-1}
    H* Y^T``, which also covers ``sigma_n^2 = 0`` when ``H_hat`` has full row
    rank.
    """
    H = np.atleast_2d(np.asarray(H_hat, dtype=complex))
    if H.shape[0] == 0:
        return np.zeros((0, Y_t.shape[0]), dtype=complex)
    gram = H.conj() @ H.T + sigma_n2 * np.eye(H.shape[0])
    if sigma_n2 == 0 and np.linalg.matrix_rank(gram) < H.shape[0]:
        raise np.linalg.LinAlgError("noiseless MMSE with rank-deficient channel matrix")
    return np.linalg.solve(gram, H.conj() @ Y_t.T)


def mmse_data_estimate_masked(
    Y_t: np.ndarray, H_hat: np.ndarray, active: np.ndarray, sigma_n2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-subcarrier MMSE over the users actually present there.

    ``active`` is a ``K x S`` boolean mask (known at the receiver from the
    user interleavers).  Returns the ``K x S`` estimates and the ``K x S``
    MMSE bias ``mu`` (so that ``x_hat = mu x + noise``); inactive entries
    are zero.
    """
    K, S = active.shape
    if K == 0:
        z = np.zeros((0, S), dtype=complex)
        return z, z.real
    Hs = H_hat[None, :, :] * active.T[:, :, None]  # (S, K, M)
    gram = Hs.conj() @ np.swapaxes(Hs, 1, 2)
    load = np.where(active.T, sigma_n2, 1.0)
    gram = gram + load[:, :, None] * np.eye(K)[None]
    W = np.linalg.solve(gram, Hs.conj())  # (S, K, M)
    X = np.einsum("skm,sm->ks", W, Y_t)
    mu = np.einsum("skm,skm->ks", W, Hs).real
    return X, mu
