"""Multistage collision graph.

Nodes are the detected codeword indices of each pilot stage.  Edges are
never stored: the tree code makes stages 3 and 4 functions of stages 1 and
2, so the candidate paths are simply the tuples ``(a, b, c, d)`` with every
node detected and both parities consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tx import TreeCode

Path4 = tuple[int, int, int, int]


@dataclass
class CollisionGraph:
    nodes: list[np.ndarray]
    paths: list[Path4] = field(default_factory=list)

    @property
    def node_counts(self) -> list[int]:
        return [len(v) for v in self.nodes]

    def dump(self, path: str | Path) -> None:
        """Text dump: one ``stage <i>: <nodes...>`` line per stage, then one
        ``path <a> <b> <c> <d>`` line per candidate path."""
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self) -> str:
        lines = [f"stage {i}: " + " ".join(str(int(n)) for n in v) for i, v in enumerate(self.nodes, 1)]
        lines += ["path " + " ".join(str(n) for n in p) for p in self.paths]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CollisionGraph":
        nodes, paths = [], []
        for line in text.splitlines():
            if line.startswith("stage"):
                _, rest = line.split(":", 1)
                nodes.append(np.array([int(x) for x in rest.split()], dtype=np.int64))
            elif line.startswith("path"):
                paths.append(tuple(int(x) for x in line.split()[1:]))
        return cls(nodes, paths)


def tree_decode(nodes, tree: TreeCode) -> list[Path4]:
    """All tuples whose stage-1/2 nodes imply detected stage-3/4 nodes.

    Returned in lexicographic order; an empty stage yields no paths.
    """
    if len(nodes) != 4:
        raise ValueError("tree decoding needs exactly four stages")
    v1, v2, v3, v4 = (np.asarray(v, dtype=np.int64) for v in nodes)
    if min(len(v1), len(v2), len(v3), len(v4)) == 0:
        return []
    a, b = np.meshgrid(v1, v2, indexing="ij")
    a, b = a.ravel(), b.ravel()
    c = tree.r1_table[a - 1, b - 1]
    d = tree.r2_table[a - 1, b - 1]
    keep = np.isin(c, v3) & np.isin(d, v4)
    found = {(int(w), int(x), int(y), int(z)) for w, x, y, z in zip(a[keep], b[keep], c[keep], d[keep])}
    return sorted(found)


def build_graph(nodes, tree: TreeCode) -> CollisionGraph:
    return CollisionGraph([np.asarray(v, dtype=np.int64) for v in nodes], tree_decode(nodes, tree))


def prune(paths: list[Path4], accepted: Path4) -> list[Path4]:
    """Drop one extracted path; tuples sharing its nodes are kept since a
    collided node may still carry other users."""
    if accepted not in paths:
        raise KeyError(f"path {accepted} is not in the graph")
    return [p for p in paths if p != accepted]


def selection_matrices(user_indices, nodes) -> list[np.ndarray]:
    """Ground-truth user-to-node assignment per stage (``K_a x N_i``).

    ``user_indices[k][i]`` is the codeword user ``k`` sent in stage ``i``.
    Only used for metrics and tests; the receiver never sees these.
    """
    user_indices = np.asarray(user_indices, dtype=np.int64).reshape(-1, len(nodes))
    out = []
    for i, v in enumerate(nodes):
        v = np.asarray(v)
        out.append((user_indices[:, i][:, None] == v[None, :]).astype(np.uint8))
    return out
