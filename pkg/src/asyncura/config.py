"""System parameters for the asynchronous MIMO-OFDM random access link."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

CHANNEL_MODES = ("exact", "simplified")
POWER_MODES = ("energy", "peak")


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one simulated transmission slot.

    Defaults follow the OFDM/URA setup with ``B = 100`` bits over
    ``L = 3200`` channel uses, except for ``K_a`` which is kept at desk
    scale.

    ``P_sym`` is the average transmit power per channel use, i.e. the ``P``
    in ``Eb/N0 = L P / (B N0)``.  How it maps onto the amplitude of the
    nonzero pilot/data entries is selected by ``power_mode``:

    * ``"energy"``: every user spends ``L * P_sym`` over the slot. Each pilot
      OFDM symbol puts its ``S * P_sym`` energy on the single ESOP tone and
      the data phase spreads ``T_d * S * P_sym`` over the ``L_code`` coded
      BPSK symbols.
    * ``"peak"``: every nonzero entry is transmitted with amplitude
      ``sqrt(P_sym)``.
    """

    N_c: int = 1024
    N_cp: int = 72
    S: int = 128
    subcarrier_indices: tuple[int, ...] | None = None
    T_p: int = 4
    T_d: int = 21
    M: int = 16
    K_a: int = 20
    B: int = 100
    B_p: int = 7
    B_c: int = 86
    L_code: int = 200
    D: int = 9
    eps_max: float = 0.0133
    Q: int = 9
    sigma_n2: float = 1.0
    P_sym: float = 0.3125
    sigma_h2: float = 1.0
    seed: int = 0
    code_seed: int = 2023
    gamma_coeff: float = 3.0
    act_thresh_coeff: float = 4.0
    N_cand: int = 5
    ldpc_max_iter: int = 50
    channel_mode: str = "exact"
    power_mode: str = "energy"
    fo_on_grid: bool = False
    collision_free: bool = False
    perfect_tfo: bool = False
    refine: bool = True

    def __post_init__(self) -> None:
        if self.subcarrier_indices is None:
            object.__setattr__(self, "subcarrier_indices", tuple(range(1, 2 * self.S, 2)))
        else:
            object.__setattr__(
                self, "subcarrier_indices", tuple(int(s) for s in self.subcarrier_indices)
            )
        self.validate()

    def validate(self) -> None:
        s = np.asarray(self.subcarrier_indices)
        if len(s) != self.S:
            raise ValueError(f"expected {self.S} subcarrier indices, got {len(s)}")
        if np.any(np.diff(s) <= 0) or s[0] < 1 or s[-1] > self.N_c:
            raise ValueError("subcarrier indices must be strictly increasing within [1, N_c]")
        if 2**self.B_p != self.S:
            raise ValueError(f"ESOP codebook needs 2**B_p == S, got B_p={self.B_p}, S={self.S}")
        if 2 * self.B_p + self.B_c != self.B:
            raise ValueError("B must equal 2*B_p + B_c")
        if not 1 <= self.D <= self.N_cp:
            raise ValueError("timing offsets must satisfy 1 <= D <= N_cp")
        if self.T_p != 4:
            raise ValueError("the tree code defines exactly four pilot stages (T_p=4)")
        if self.L_code > self.T_d * self.S:
            raise ValueError("coded block does not fit into the data phase")
        if self.L_code <= self.B_c:
            raise ValueError("LDPC code length must exceed B_c")
        if self.Q < 1 or self.eps_max < 0:
            raise ValueError("invalid frequency-offset grid")
        if self.sigma_n2 < 0 or self.P_sym < 0 or self.sigma_h2 <= 0:
            raise ValueError("powers and variances must be nonnegative")
        if self.K_a < 0 or self.M < 1:
            raise ValueError("K_a must be >= 0 and M >= 1")
        if not 1 <= self.N_cand <= self.D * self.Q:
            raise ValueError("N_cand must lie in [1, D*Q]")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"channel_mode must be one of {CHANNEL_MODES}")
        if self.power_mode not in POWER_MODES:
            raise ValueError(f"power_mode must be one of {POWER_MODES}")

    # derived quantities

    @property
    def N(self) -> int:
        """Codebook size, equal to the pilot length ``L_p``."""
        return 2**self.B_p

    @property
    def L_p(self) -> int:
        return self.S

    @property
    def L_c(self) -> int:
        """Channel uses of the data phase (zero padding included)."""
        return self.T_d * self.S

    @property
    def L(self) -> int:
        return (self.T_p + self.T_d) * self.S

    @property
    def s(self) -> np.ndarray:
        return np.asarray(self.subcarrier_indices, dtype=np.int64)

    @property
    def pilot_amplitude(self) -> float:
        if self.power_mode == "peak":
            return float(np.sqrt(self.P_sym))
        return float(np.sqrt(self.S * self.P_sym))

    @property
    def data_amplitude(self) -> float:
        if self.power_mode == "peak":
            return float(np.sqrt(self.P_sym))
        return float(np.sqrt(self.L_c * self.P_sym / self.L_code))

    @property
    def ebn0_db(self) -> float:
        return float(10 * np.log10(self.L * self.P_sym / (self.B * self.sigma_n2)))

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["subcarrier_indices"] = list(self.subcarrier_indices)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "SystemConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Search grid for the receiver: integer timing offsets ``d`` and
    uniformly spaced frequency offsets ``q``."""

    d: np.ndarray
    q: np.ndarray = field(repr=False)

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "PhaseGrid":
        d = np.arange(1, cfg.D + 1, dtype=np.int64)
        if cfg.Q == 1:
            q = np.zeros(1)
        else:
            q = np.linspace(-cfg.eps_max, cfg.eps_max, cfg.Q)
        return cls(d, q)

    @property
    def size(self) -> int:
        return len(self.d) * len(self.q)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (tau, eps) pairs, tau-major, both ascending."""
        tau, eps = np.meshgrid(self.d, self.q, indexing="ij")
        return tau.ravel(), eps.ravel()
