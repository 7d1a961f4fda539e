"""Transmitter: message split, tree code, ESOP pilots and the IDMA data phase.

Every user shares the same tree code, LDPC code and interleaver rule.  The
four pilot indices a user sends are derived from its two preamble segments
and their two parity segments; the same four indices seed the user's data
interleaver, so the receiver knows the interleaver once the pilot path is
decoded.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import SystemConfig

# Stream tags for the public code seed; keep them stable, the codes depend on them.
TREE_STREAM = 1
LDPC_STREAM = 2
INTERLEAVER_STREAM = 3


def code_rng(code_seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([code_seed, stream])))


@dataclass(frozen=True)
class MessageSplit:
    v1: np.ndarray
    v2: np.ndarray
    vc: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.v1, self.v2, self.vc])


def split_message(payload, cfg: SystemConfig) -> MessageSplit:
    """Cut a ``B``-bit payload into the two preamble halves and the LDPC part."""
    bits = np.asarray(payload, dtype=np.uint8)
    if bits.shape != (cfg.B,):
        raise ValueError(f"payload must have {cfg.B} bits, got shape {bits.shape}")
    return MessageSplit(bits[: cfg.B_p], bits[cfg.B_p : 2 * cfg.B_p], bits[2 * cfg.B_p :])


def segment_to_index(bits) -> int:
    """Big-endian value of ``bits`` plus one, i.e. a 1-based codeword index."""
    value = 0
    for b in np.asarray(bits, dtype=np.int64):
        value = (value << 1) | int(b)
    return value + 1


def index_to_segment(index: int, B_p: int) -> np.ndarray:
    v = int(index) - 1
    return np.array([(v >> (B_p - 1 - i)) & 1 for i in range(B_p)], dtype=np.uint8)


class TreeCode:
    """Two GF(2) parity segments over the two preamble segments.

    ``r1 = G1 v1 + G2 v2`` and ``r2 = G3 v1 + G4 v2 + G5 r1`` (mod 2).  The
    five ``B_p x B_p`` matrices are drawn in that order from the tree stream
    of the public code seed.  Since ``B_p`` is small, both parities are
    tabulated over all ``(v1, v2)`` index pairs.
    """

    def __init__(self, B_p: int, code_seed: int):
        self.B_p = B_p
        self.code_seed = code_seed
        rng = code_rng(code_seed, TREE_STREAM)
        self.G = [rng.integers(0, 2, size=(B_p, B_p), dtype=np.uint8) for _ in range(5)]
        n = 2**B_p
        seg = np.array([index_to_segment(i, B_p) for i in range(1, n + 1)])  # (n, B_p)
        weights = 1 << np.arange(B_p - 1, -1, -1)
        G1, G2, G3, G4, G5 = (g.astype(np.int64) for g in self.G)
        r1 = (seg @ G1.T)[:, None, :] + (seg @ G2.T)[None, :, :]
        r1 %= 2
        r2 = (seg @ G3.T)[:, None, :] + (seg @ G4.T)[None, :, :] + r1 @ G5.T
        r2 %= 2
        # 1-based index tables, indexed [a-1, b-1]
        self.r1_table = r1 @ weights + 1
        self.r2_table = r2 @ weights + 1

    def encode(self, v1, v2) -> tuple[np.ndarray, np.ndarray]:
        v1 = np.asarray(v1, dtype=np.int64)
        v2 = np.asarray(v2, dtype=np.int64)
        if v1.shape != (self.B_p,) or v2.shape != (self.B_p,):
            raise ValueError("tree encoder expects two B_p-bit segments")
        G1, G2, G3, G4, G5 = (g.astype(np.int64) for g in self.G)
        r1 = (G1 @ v1 + G2 @ v2) % 2
        r2 = (G3 @ v1 + G4 @ v2 + G5 @ r1) % 2
        return r1.astype(np.uint8), r2.astype(np.uint8)

    def parity_indices(self, a: int, b: int) -> tuple[int, int]:
        """Stage-3 and stage-4 indices implied by stage-1/2 indices ``a, b``."""
        return int(self.r1_table[a - 1, b - 1]), int(self.r2_table[a - 1, b - 1])


@lru_cache(maxsize=8)
def tree_code(B_p: int, code_seed: int) -> TreeCode:
    return TreeCode(B_p, code_seed)


def tree_encode(v1, v2, params: TreeCode) -> tuple[np.ndarray, np.ndarray]:
    return params.encode(v1, v2)


def pilot_indices(split: MessageSplit, params: TreeCode) -> tuple[int, int, int, int]:
    r1, r2 = params.encode(split.v1, split.v2)
    return tuple(segment_to_index(x) for x in (split.v1, split.v2, r1, r2))  # type: ignore[return-value]


def esop_codeword(index: int, L_p: int) -> np.ndarray:
    """Unit vector ``e_index`` of the identity (ESOP) codebook."""
    if not 1 <= index <= L_p:
        raise ValueError(f"codeword index {index} outside [1, {L_p}]")
    e = np.zeros(L_p)
    e[index - 1] = 1.0
    return e


def esop_codebook(L_p: int) -> np.ndarray:
    return np.column_stack([esop_codeword(i, L_p) for i in range(1, L_p + 1)])


@lru_cache(maxsize=4096)
def _interleaver(key: tuple[int, int, int, int], L_c: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(struct.pack("<4iQ", *key, seed), digest_size=16).digest()
    bitgen = np.random.Philox(key=int.from_bytes(digest, "little"))
    perm = np.random.Generator(bitgen).permutation(L_c)
    perm.setflags(write=False)
    return perm


def build_interleaver(i1: int, i2: int, i3: int, i4: int, L_c: int, seed: int) -> np.ndarray:
    """User interleaver: a uniform permutation of ``range(L_c)`` (0-based slot
    numbers) drawn from a Philox stream keyed by a hash of the four pilot
    indices and the public seed."""
    return _interleaver((int(i1), int(i2), int(i3), int(i4)), int(L_c), int(seed))


@dataclass(frozen=True)
class DataFrame:
    coded: np.ndarray
    symbols: np.ndarray
    positions: np.ndarray

    def blocks(self, T_d: int, S: int) -> np.ndarray:
        """Per-OFDM-symbol view, ``(T_d, S)``."""
        return self.symbols.reshape(T_d, S)


def encode_data(vc, interleaver: np.ndarray, ldpc_codec, cfg: SystemConfig) -> DataFrame:
    """LDPC encode, BPSK map (0 -> +a, 1 -> -a), and place the coded symbols
    on the first ``L_code`` slots of the interleaved order; the remaining
    slots stay zero."""
    vc = np.asarray(vc, dtype=np.uint8)
    if vc.shape != (cfg.B_c,):
        raise ValueError(f"LDPC payload must have {cfg.B_c} bits")
    coded = ldpc_codec.encode(vc)
    if coded.shape != (cfg.L_code,):
        raise ValueError("LDPC code length does not match cfg.L_code")
    positions = np.asarray(interleaver[: cfg.L_code])
    symbols = np.zeros(cfg.L_c, dtype=complex)
    symbols[positions] = cfg.data_amplitude * (1.0 - 2.0 * coded)
    return DataFrame(coded, symbols, positions)
