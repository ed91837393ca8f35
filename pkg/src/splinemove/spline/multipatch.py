"""Conforming multi-patch domains."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import InterfaceError
from .patch import SIDES, TensorPatch

FROZEN = "frozen"
REGENERATED = "regenerated"


@dataclass(frozen=True)
class Interface:
    """Face ``side_a`` of patch ``a`` is identified with face ``side_b`` of patch ``b``.

    With ``flip`` the face ordering of ``b`` runs opposite to that of ``a``.
    """

    a: int
    side_a: str
    b: int
    side_b: str
    flip: bool = False

    def index_pairs(self, patches) -> np.ndarray:
        ia = patches[self.a].face_indices(self.side_a)
        ib = patches[self.b].face_indices(self.side_b)
        if ia.size != ib.size:
            raise InterfaceError(f"interface {self} joins faces with {ia.size} and {ib.size} control points")
        if self.flip:
            ib = ib[::-1]
        return np.stack([ia, ib], axis=1)


@dataclass(frozen=True, eq=False)
class MultiPatchDomain:
    patches: tuple
    interfaces: tuple = ()
    flags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        flags = tuple(self.flags) or (REGENERATED,) * len(self.patches)
        if len(flags) != len(self.patches):
            raise InterfaceError("one regeneration flag per patch required")
        object.__setattr__(self, "flags", flags)
        for itf in self.interfaces:
            pa, pb = self.patches[itf.a], self.patches[itf.b]
            fa = [kv for k, kv in enumerate(pa.kvs) if k != _axis(itf.side_a)]
            fb = [kv for k, kv in enumerate(pb.kvs) if k != _axis(itf.side_b)]
            if len(fa) == 1 and fa[0].n != fb[0].n:
                raise InterfaceError(f"non-conforming interface {itf}")
            itf.index_pairs(self.patches)

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, k) -> TensorPatch:
        return self.patches[k]

    @property
    def pdim(self) -> int:
        return self.patches[0].pdim

    @property
    def n_elements(self) -> int:
        return sum(p.n_elements for p in self.patches)

    def with_patches(self, patches) -> "MultiPatchDomain":
        return MultiPatchDomain(tuple(patches), self.interfaces, self.flags)

    # -- global numbering ---------------------------------------------------------
    @cached_property
    def global_numbering(self):
        """``(maps, n_global)``; ``maps[k][i]`` is the global index of local control ``i`` of patch ``k``.

        Global indices follow first occurrence (lowest patch, then local index),
        which also makes the lowest patch index the owner of shared points.
        """
        offsets = np.cumsum([0] + [p.ctrl.shape[0] for p in self.patches])
        parent = np.arange(offsets[-1])

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for itf in self.interfaces:
            for ia, ib in itf.index_pairs(self.patches):
                ra, rb = find(offsets[itf.a] + ia), find(offsets[itf.b] + ib)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(offsets[-1])])
        _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        g = rank[inverse]
        maps = [g[offsets[k]:offsets[k + 1]] for k in range(len(self.patches))]
        return maps, int(order.size)

    def interface_mismatch(self) -> float:
        """Largest distance between identified control points (0 for a conforming domain)."""
        worst = 0.0
        for itf in self.interfaces:
            pr = itf.index_pairs(self.patches)
            if pr.size:
                d = self.patches[itf.a].ctrl[pr[:, 0]] - self.patches[itf.b].ctrl[pr[:, 1]]
                worst = max(worst, float(np.abs(d).max()))
        return worst

    def synchronized(self) -> "MultiPatchDomain":
        """Copy every shared control point from its owner (lowest patch index) so identified points are bit-equal."""
        maps, n = self.global_numbering
        dim = self.patches[0].dim
        X = np.full((n, dim), np.nan)
        for k in reversed(range(len(self.patches))):
            X[maps[k]] = self.patches[k].ctrl
        return self.with_patches(p.with_ctrl(X[maps[k]]) for k, p in enumerate(self.patches))

    def global_ctrl(self) -> np.ndarray:
        maps, n = self.global_numbering
        X = np.empty((n, self.patches[0].dim))
        for k in reversed(range(len(self.patches))):
            X[maps[k]] = self.patches[k].ctrl
        return X

    def with_global_ctrl(self, X) -> "MultiPatchDomain":
        maps, _ = self.global_numbering
        return self.with_patches(p.with_ctrl(X[maps[k]]) for k, p in enumerate(self.patches))

    def boundary_global_indices(self) -> np.ndarray:
        """Global indices on the outer boundary of the domain (faces not covered by an interface)."""
        maps, _ = self.global_numbering
        covered = {(i.a, i.side_a) for i in self.interfaces} | {(i.b, i.side_b) for i in self.interfaces}
        out = []
        for k, p in enumerate(self.patches):
            for side in _sides(p.pdim):
                if (k, side) not in covered:
                    out.append(maps[k][p.face_indices(side)])
        return np.unique(np.concatenate(out)) if out else np.array([], dtype=int)

    def patch_hash(self, k: int) -> str:
        p = self.patches[k]
        h = hashlib.sha256()
        for kv in p.kvs:
            h.update(kv.knots.tobytes())
            h.update(bytes([kv.degree]))
        h.update(p.ctrl.tobytes())
        h.update(p.weights.tobytes())
        return h.hexdigest()

    def same_layout(self, other: "MultiPatchDomain") -> bool:
        if len(self) != len(other):
            return False
        return all(a.shape == b.shape and a.degrees == b.degrees for a, b in zip(self.patches, other.patches))


def _axis(side: str) -> int:
    return SIDES[side][0]


def _sides(pdim: int):
    names = ["west", "east", "south", "north", "front", "back"]
    return names[: 2 * pdim]
