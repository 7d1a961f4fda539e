"""OFDM timing/frequency offset phase model and received-signal synthesis.

Subcarrier indices are 1-based, so that a timing offset ``tau`` rotates
subcarrier ``n`` by ``psi ** (1 - n)`` with ``psi = exp(j 2 pi tau / N_c)``.
A frequency offset ``eps`` (in units of subcarrier spacing) introduces

* a common phase ``phi_t = omega ** (N_cp + (t - 1) (N_cp + N_c))`` that
  accumulates over OFDM symbols, with ``omega = exp(j 2 pi eps / N_c)``,
* inter-carrier leakage through the kernel
  ``P(x) = sin(pi x) / (N_c sin(pi x / N_c)) * exp(j pi x (N_c - 1) / N_c)``.

The "exact" model keeps the full ``S x S`` leakage matrix, the "simplified"
model keeps only its diagonal phases.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import SystemConfig


@dataclass
class ActiveUser:
    """Ground truth for one active user in a slot."""

    payload: np.ndarray
    tau: int
    eps: float
    h: np.ndarray
    segment_indices: tuple[int, int, int, int] = (1, 1, 1, 1)


def leakage_kernel(x, N_c: int) -> np.ndarray:
    """Evaluate ``P(x)``, the normalized geometric sum
    ``(1/N_c) sum_m exp(j 2 pi m x / N_c)``.

    Integer arguments are resolved through the limit: 1 when ``x`` is a
    multiple of ``N_c`` and 0 otherwise.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    r = np.round(x)
    on_int = x == r
    xi = x[~on_int]
    amp = np.sin(np.pi * xi) / (N_c * np.sin(np.pi * xi / N_c))
    out[~on_int] = amp * np.exp(1j * np.pi * xi * (N_c - 1) / N_c)
    out[on_int] = np.where(np.mod(r[on_int], N_c) == 0, 1.0, 0.0)
    return out


def _fo_exponent(t, cfg: SystemConfig):
    """Exponent of ``omega`` in the simplified per-symbol phase."""
    return (cfg.N_cp + cfg.N_c) * np.asarray(t, dtype=float) - (cfg.N_c + 1) / 2


def phase_coeff(tau, eps, t, s_k, cfg: SystemConfig):
    """Diagonal phase of the simplified model on subcarrier ``s_k`` in OFDM
    symbol ``t`` (1-based).  Broadcasts over all arguments."""
    tau = np.asarray(tau, dtype=np.int64)
    s_k = np.asarray(s_k, dtype=np.int64)
    # reduce the TO exponent modulo N_c in integers to keep psi periodic exactly
    to_turns = np.mod(tau * (1 - s_k), cfg.N_c) / cfg.N_c
    fo_turns = np.asarray(eps, dtype=float) * _fo_exponent(t, cfg) / cfg.N_c
    return np.exp(2j * np.pi * (to_turns + fo_turns))


def accumulated_phase(eps, t, cfg: SystemConfig):
    """Common FO phase ``phi_t`` of OFDM symbol ``t``."""
    n = cfg.N_cp + (np.asarray(t) - 1) * (cfg.N_cp + cfg.N_c)
    return np.exp(2j * np.pi * np.asarray(eps, dtype=float) * n / cfg.N_c)


def _diff_index(cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    s = cfg.s
    diff = s[None, :] - s[:, None]
    values, inverse = np.unique(diff, return_inverse=True)
    return values, inverse.reshape(diff.shape)


@lru_cache(maxsize=512)
def _leakage_matrix(eps: float, cfg: SystemConfig) -> np.ndarray:
    values, inverse = _diff_index(cfg)
    kern = leakage_kernel(values + eps, cfg.N_c)
    m = kern[inverse]
    m.setflags(write=False)
    return m


def fo_matrix_exact(eps: float, cfg: SystemConfig, t: int | None = None) -> np.ndarray:
    """Frequency-offset matrix on the used subcarriers.

    Entry ``(a, b)`` is ``P(n_b - n_a + eps)``.  With ``t`` given, the
    accumulated phase ``phi_t`` is included.
    """
    m = np.array(_leakage_matrix(float(eps), cfg))
    if t is not None:
        m *= accumulated_phase(eps, t, cfg)
    return m


def to_matrix_exact(tau: int, cfg: SystemConfig) -> np.ndarray:
    """Diagonal timing-offset matrix ``diag(psi ** (1 - n_s))``."""
    psi = np.exp(2j * np.pi * np.mod(int(tau) * (1 - cfg.s), cfg.N_c) / cfg.N_c)
    return np.diag(psi)


def exact_phase_matrix(tau: int, eps: float, t: int, cfg: SystemConfig) -> np.ndarray:
    """Full per-user rotation ``P_eps^t P_tau`` for OFDM symbol ``t``."""
    psi = np.exp(2j * np.pi * np.mod(int(tau) * (1 - cfg.s), cfg.N_c) / cfg.N_c)
    return fo_matrix_exact(eps, cfg, t) * psi[None, :]


def approx_error(eps: float, tau: int, cfg: SystemConfig, t: int = 1) -> float:
    """Frobenius norm of what the diagonal approximation throws away."""
    exact = exact_phase_matrix(tau, eps, t, cfg)
    diag = phase_coeff(tau, eps, t, cfg.s, cfg)
    return float(np.linalg.norm(exact - np.diag(diag)))


def complex_noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    z = rng.standard_normal((*shape, 2))
    return np.sqrt(var / 2) * (z[..., 0] + 1j * z[..., 1])


def draw_channel(rng: np.random.Generator, M: int, sigma_h2: float) -> np.ndarray:
    return complex_noise(rng, (M,), sigma_h2)


def simulate_pilot_symbol(
    users: list[ActiveUser],
    t: int,
    indices,
    cfg: SystemConfig,
    rng: np.random.Generator,
    mode: str = "exact",
) -> np.ndarray:
    """Received pilot OFDM symbol ``t`` (S x M).

    ``indices[k]`` is the 1-based ESOP codeword chosen by ``users[k]`` in
    this stage; the codeword is sent with ``cfg.pilot_amplitude``.
    """
    Y = np.zeros((cfg.S, cfg.M), dtype=complex)
    amp = cfg.pilot_amplitude
    for user, idx in zip(users, indices):
        col = int(idx) - 1
        if mode == "exact":
            psi = np.exp(2j * np.pi * np.mod(int(user.tau) * (1 - int(cfg.s[col])), cfg.N_c) / cfg.N_c)
            g = leakage_kernel(cfg.s[col] - cfg.s + user.eps, cfg.N_c) * accumulated_phase(user.eps, t, cfg) * psi
            Y += amp * np.outer(g, user.h)
        elif mode == "simplified":
            p = phase_coeff(user.tau, user.eps, t, cfg.s[col], cfg)
            Y[col] += amp * p * user.h
        else:
            raise ValueError(f"unknown channel mode {mode!r}")
    Y += complex_noise(rng, Y.shape, cfg.sigma_n2)
    return Y


def simulate_data_symbol(
    users: list[ActiveUser],
    symbols: np.ndarray,
    t: int,
    cfg: SystemConfig,
    rng: np.random.Generator,
    mode: str = "exact",
) -> np.ndarray:
    """Received data OFDM symbol ``t`` (S x M).

    ``symbols`` is ``(K, S)``: the frequency-domain symbols each user puts
    on the ``S`` subcarriers in this OFDM symbol (amplitude included, zeros
    at padded positions).
    """
    Y = np.zeros((cfg.S, cfg.M), dtype=complex)
    for user, x in zip(users, symbols):
        if not np.any(x):
            continue
        if mode == "exact":
            psi = np.exp(2j * np.pi * np.mod(int(user.tau) * (1 - cfg.s), cfg.N_c) / cfg.N_c)
            v = accumulated_phase(user.eps, t, cfg) * (_leakage_matrix(float(user.eps), cfg) @ (psi * x))
        elif mode == "simplified":
            v = phase_coeff(user.tau, user.eps, t, cfg.s, cfg) * x
        else:
            raise ValueError(f"unknown channel mode {mode!r}")
        Y += np.outer(v, user.h)
    Y += complex_noise(rng, Y.shape, cfg.sigma_n2)
    return Y
