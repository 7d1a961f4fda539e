"""(200, 86) LDPC code shared by all users.

The parity-check matrix is built by progressive edge growth (PEG) with
column weight 3 from the LDPC stream of the public code seed.  Columns are
then reordered so that the last ``n - k`` columns are information-free
pivots, which makes the encoder systematic with the message in the first
``k`` positions.

LLR convention: positive means bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .tx import LDPC_STREAM, code_rng

_PAD_LLR = 1e4
_MSG_CLIP = 500.0


def gf2_rank(A: np.ndarray) -> int:
    A = (np.asarray(A) % 2).astype(np.uint8).copy()
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        piv = np.nonzero(A[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        A[[r, p]] = A[[p, r]]
        others = np.nonzero(A[:, c])[0]
        others = others[others != r]
        A[others] ^= A[r]
        r += 1
        if r == rows:
            break
    return r


def _pivot_columns(H: np.ndarray) -> list[int]:
    """Columns chosen as pivots by Gauss-Jordan elimination, scanning right
    to left so that parity bits land at the end whenever possible."""
    A = H.copy()
    m, n = A.shape
    r = 0
    pivots = []
    for c in range(n - 1, -1, -1):
        piv = np.nonzero(A[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        A[[r, p]] = A[[p, r]]
        others = np.nonzero(A[:, c])[0]
        others = others[others != r]
        A[others] ^= A[r]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return pivots


def gf2_inv(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    aug = np.concatenate([A % 2, np.eye(n, dtype=np.uint8)], axis=1).astype(np.uint8)
    for c in range(n):
        piv = np.nonzero(aug[c:, c])[0]
        if piv.size == 0:
            raise np.linalg.LinAlgError("matrix is singular over GF(2)")
        p = c + piv[0]
        aug[[c, p]] = aug[[p, c]]
        others = np.nonzero(aug[:, c])[0]
        others = others[others != c]
        aug[others] ^= aug[c]
    return aug[:, n:]


def peg_matrix(n: int, m: int, dv: int, rng: np.random.Generator) -> np.ndarray:
    """Progressive edge growth with uniform variable degree ``dv``.

    For each new edge of variable ``j`` the check is picked among those not
    reachable from ``j`` in the current graph (or, if every check is
    reachable, among those reached last by the breadth-first search), with
    lowest current degree and random tie-breaking.
    """
    check_nbrs: list[set[int]] = [set() for _ in range(m)]
    var_nbrs: list[set[int]] = [set() for _ in range(n)]
    deg = np.zeros(m, dtype=np.int64)

    def pick(cands: np.ndarray) -> int:
        d = deg[cands]
        best = cands[d == d.min()]
        return int(rng.choice(best))

    for j in range(n):
        for k in range(dv):
            if k == 0:
                c = pick(np.arange(m))
            else:
                reached = set(var_nbrs[j])
                frontier = set(var_nbrs[j])
                visited = {j}
                while True:
                    next_vars = set().union(*(check_nbrs[cc] for cc in frontier)) - visited
                    visited |= next_vars
                    next_checks = set().union(*(var_nbrs[vv] for vv in next_vars)) - reached
                    if not next_checks:
                        cands = set(range(m)) - reached or frontier
                        break
                    if len(reached) + len(next_checks) == m:
                        cands = next_checks
                        break
                    reached |= next_checks
                    frontier = next_checks
                cands = np.array(sorted(cands - var_nbrs[j]))
                c = pick(cands)
            var_nbrs[j].add(c)
            check_nbrs[c].add(j)
            deg[c] += 1

    H = np.zeros((m, n), dtype=np.uint8)
    for j, cs in enumerate(var_nbrs):
        H[list(cs), j] = 1
    return H


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Systematic binary LDPC code with a flooding sum-product decoder."""

    H: np.ndarray
    parity_gen: np.ndarray
    max_iter: int = 50
    seed: int = 0

    def __post_init__(self):
        m, n = self.H.shape
        var_idx, chk_idx = [], []
        for c in range(m):
            vs = np.nonzero(self.H[c])[0]
            var_idx.extend(vs)
            chk_idx.extend([c] * len(vs))
        var_idx = np.asarray(var_idx)
        chk_idx = np.asarray(chk_idx)
        E = len(var_idx)
        dc = np.bincount(chk_idx, minlength=m)
        dv = np.bincount(var_idx, minlength=n)
        check_edges = np.full((m, dc.max()), E, dtype=np.int64)
        var_edges = np.full((n, dv.max()), E, dtype=np.int64)
        fill_c = np.zeros(m, dtype=np.int64)
        fill_v = np.zeros(n, dtype=np.int64)
        for e, (v, c) in enumerate(zip(var_idx, chk_idx)):
            check_edges[c, fill_c[c]] = e
            fill_c[c] += 1
            var_edges[v, fill_v[v]] = e
            fill_v[v] += 1
        object.__setattr__(self, "_var_of_edge", var_idx)
        object.__setattr__(self, "_check_edges", check_edges)
        object.__setattr__(self, "_var_edges", var_edges)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k(self) -> int:
        return self.n - self.m

    @property
    def generator(self) -> np.ndarray:
        """Systematic generator ``G`` (k x n) with ``c = u G``."""
        return np.concatenate([np.eye(self.k, dtype=np.uint8), self.parity_gen.T], axis=1)

    def encode(self, info) -> np.ndarray:
        u = np.asarray(info, dtype=np.int64)
        if u.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} information bits")
        parity = (u @ self.parity_gen.T.astype(np.int64)) % 2
        return np.concatenate([u, parity], axis=-1).astype(np.uint8)

    def syndrome(self, bits) -> np.ndarray:
        return (np.asarray(bits, dtype=np.int64) @ self.H.T.astype(np.int64)) % 2

    def decode_bp(self, llr, max_iter: int | None = None):
        """Sum-product decoding in the LLR domain, flooding schedule.

        ``llr`` may be a single frame ``(n,)`` or a batch ``(F, n)``.
        Returns ``(bits, converged, iterations)`` with matching leading
        shape.  A frame stops being updated as soon as its hard decision
        satisfies all checks; ``iterations`` counts the message-passing
        rounds it took (0 if the channel decision was already a codeword).
        Bits whose posterior LLR is exactly zero count as undecided.
        """
        max_iter = self.max_iter if max_iter is None else max_iter
        llr = np.asarray(llr, dtype=float)
        single = llr.ndim == 1
        L = np.atleast_2d(llr)
        F = L.shape[0]
        E = len(self._var_of_edge)

        bits = (L < 0).astype(np.uint8)
        # a zero LLR is an erasure, never a decision
        converged = ~self.syndrome(bits).any(axis=1) & (L != 0).all(axis=1)
        iterations = np.zeros(F, dtype=np.int64)
        active = np.nonzero(~converged)[0]

        r = np.zeros((active.size, E + 1))
        for it in range(1, max_iter + 1):
            if active.size == 0:
                break
            La = L[active]
            total = La + r[:, self._var_edges].sum(axis=2)
            q = total[:, self._var_of_edge] - r[:, :E]
            q = np.clip(q, -_MSG_CLIP, _MSG_CLIP)
            q = np.concatenate([q, np.full((active.size, 1), _PAD_LLR)], axis=1)
            r_new = _check_update(q[:, self._check_edges])
            r = np.zeros((active.size, E + 1))
            r[:, self._check_edges] = r_new
            r[:, E] = 0.0
            post = La + r[:, self._var_edges].sum(axis=2)
            hard = (post < 0).astype(np.uint8)
            ok = ~self.syndrome(hard).any(axis=1) & (post != 0).all(axis=1)
            bits[active] = hard
            iterations[active] = it
            if ok.any():
                converged[active[ok]] = True
            active = active[~ok]
            r = r[~ok]

        if single:
            return bits[0], bool(converged[0]), int(iterations[0])
        return bits, converged, iterations

    def dump(self, path: str | Path) -> None:
        """Sparse text dump: header ``n m``, then one line per check with its
        index followed by the variable indices it touches (0-based)."""
        with open(path, "w") as fh:
            fh.write(f"# ldpc parity-check matrix, seed={self.seed}\n")
            fh.write(f"{self.n} {self.m}\n")
            for c in range(self.m):
                vs = " ".join(str(v) for v in np.nonzero(self.H[c])[0])
                fh.write(f"{c} {vs}\n")

    @classmethod
    def load(cls, path: str | Path, max_iter: int = 50) -> "LdpcCode":
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        n, m = (int(x) for x in lines[0].split())
        H = np.zeros((m, n), dtype=np.uint8)
        for ln in lines[1 : m + 1]:
            c, *vs = (int(x) for x in ln.split())
            H[c, vs] = 1
        return cls.from_parity_check(H, max_iter=max_iter)

    @classmethod
    def from_parity_check(cls, H: np.ndarray, max_iter: int = 50, seed: int = 0) -> "LdpcCode":
        """Requires the last ``m`` columns of ``H`` to be invertible."""
        H = (np.asarray(H) % 2).astype(np.uint8)
        m, n = H.shape
        Hp_inv = gf2_inv(H[:, n - m :])
        parity_gen = (Hp_inv.astype(np.int64) @ H[:, : n - m]) % 2
        return cls(H, parity_gen.astype(np.uint8), max_iter, seed)


def _boxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise check-node combination, ``2 atanh(tanh(a/2) tanh(b/2))``."""
    s = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def _check_update(q: np.ndarray) -> np.ndarray:
    """Extrinsic check-to-variable messages by forward/backward boxplus.

    ``q`` is ``(F, m, dc)``; padded slots carry a large positive LLR, which
    is neutral under boxplus.
    """
    dc = q.shape[2]
    fwd = np.empty_like(q)
    bwd = np.empty_like(q)
    fwd[:, :, 0] = _PAD_LLR
    bwd[:, :, dc - 1] = _PAD_LLR
    for i in range(1, dc):
        fwd[:, :, i] = _boxplus(fwd[:, :, i - 1], q[:, :, i - 1])
        j = dc - 1 - i
        bwd[:, :, j] = _boxplus(bwd[:, :, j + 1], q[:, :, j + 1])
    return _boxplus(fwd, bwd)


@lru_cache(maxsize=4)
def make_ldpc(n: int = 200, k: int = 86, code_seed: int = 2023, dv: int = 3, max_iter: int = 50) -> LdpcCode:
    """Deterministic code for ``(n, k, code_seed)``.

    PEG attempts are drawn from the LDPC stream of the code seed until one
    has full rank ``n - k``.
    """
    m = n - k
    rng = code_rng(code_seed, LDPC_STREAM)
    for _ in range(100):
        H = peg_matrix(n, m, dv, rng)
        if gf2_rank(H) == m:
            break
    else:  # pragma: no cover
        raise RuntimeError("could not build a full-rank parity-check matrix")
    pivots = _pivot_columns(H)
    info_cols = [c for c in range(n) if c not in set(pivots)]
    order = info_cols + sorted(pivots)
    return LdpcCode.from_parity_check(H[:, order], max_iter=max_iter, seed=code_seed)
