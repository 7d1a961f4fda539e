"""Quick invariant checks runnable without pytest (``asyncura selftest``)."""

from __future__ import annotations

import numpy as np

from .config import SystemConfig
from .harness import run_trial
from .ldpc import make_ldpc
from .phy import fo_matrix_exact, to_matrix_exact
from .tx import tree_code


def _dft_conjugate(D: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    n = np.arange(cfg.N_c)
    F = np.exp(-2j * np.pi * np.outer(n, n) / cfg.N_c) / np.sqrt(cfg.N_c)
    Fs = F[cfg.s - 1]
    return Fs @ D @ Fs.conj().T


def check_phase_model() -> str:
    cfg = SystemConfig(N_c=16, N_cp=4, S=4, B_p=2, B_c=2, B=6, L_code=4, T_d=2, D=3, N_cand=1, Q=1)
    rng = np.random.default_rng(1)
    for _ in range(10):
        eps = rng.uniform(-0.5, 0.5)
        tau = int(rng.integers(0, cfg.N_cp + 1))
        D_eps = np.diag(np.exp(2j * np.pi * eps * np.arange(cfg.N_c) / cfg.N_c))
        shift = np.roll(np.eye(cfg.N_c), tau, axis=0)
        assert np.linalg.norm(fo_matrix_exact(eps, cfg) - _dft_conjugate(D_eps, cfg)) < 1e-10
        assert np.linalg.norm(to_matrix_exact(tau, cfg) - _dft_conjugate(shift, cfg)) < 1e-10
    return "phase model matches DFT conjugation"


def check_tree_code() -> str:
    tree = tree_code(7, 2023)
    a, b = 5, 77
    c, d = tree.parity_indices(a, b)
    assert tree.r1_table[a - 1, b - 1] == c and tree.r2_table[a - 1, b - 1] == d
    assert tree.parity_indices(1, 1) == (1, 1)
    return "tree code tables consistent"


def check_ldpc() -> str:
    code = make_ldpc()
    rng = np.random.default_rng(2)
    info = rng.integers(0, 2, size=(20, code.k), dtype=np.uint8)
    cw = code.encode(info)
    assert not np.any(code.syndrome(cw))
    bits, ok, _ = code.decode_bp(8.0 * (1.0 - 2.0 * cw))
    assert ok.all() and np.array_equal(bits, cw)
    return "LDPC encode/decode round trip"


def check_noiseless_trial() -> str:
    cfg = SystemConfig(K_a=6, M=4, sigma_n2=1e-12, collision_free=True, fo_on_grid=True, channel_mode="simplified")
    r = run_trial(cfg, seed=7)
    assert r.p_md == 0 and r.p_fa == 0 and r.nmse < 1e-10, r
    return "noiseless trial recovers every user"


CHECKS = [check_phase_model, check_tree_code, check_ldpc, check_noiseless_trial]


def selftest(verbose: bool = True) -> bool:
    ok = True
    for check in CHECKS:
        try:
            msg = check()
            line = f"ok    {check.__name__}: {msg}"
        except Exception as exc:  # report and keep going
            ok = False
            line = f"FAIL  {check.__name__}: {exc!r}"
        if verbose:
            print(line)
    return ok
