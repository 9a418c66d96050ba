"""Directed friendship networks, the two Monte Carlo generators, and h-hop
neighborhood / subgraph extraction.

Player ids are 0-based inside the library. File I/O (see :mod:`netgame.io`)
converts to and from the 1-based ids used in CSV files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetworkError(ValueError):
    """Invalid network input (bad index, self-loop, duplicate edge, ...)."""


@dataclass(frozen=True, eq=False)
class DirectedNetwork:
    """Friendship graph stored as sorted out-neighbor lists in CSR form.

    ``indices[indptr[i]:indptr[i + 1]]`` are the friends of player ``i``
    (the players ``i`` names). Construct through :meth:`from_friend_lists`
    or :meth:`from_edges` so that the invariants are checked.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    _in_degree: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_friend_lists(cls, friend_lists: Sequence[Sequence[int]]) -> "DirectedNetwork":
        n = len(friend_lists)
        if n < 1:
            raise NetworkError("network needs at least one player")
        indptr = np.zeros(n + 1, dtype=np.int64)
        rows = []
        for i, fl in enumerate(friend_lists):
            arr = np.asarray(sorted(int(j) for j in fl), dtype=np.int64)
            if arr.size:
                if arr[0] < 0 or arr[-1] >= n:
                    raise NetworkError(f"player {i}: friend index out of range [0, {n})")
                if np.any(arr == i):
                    raise NetworkError(f"player {i}: self-loop")
                if np.any(np.diff(arr) == 0):
                    raise NetworkError(f"player {i}: duplicate friend entry")
            rows.append(arr)
            indptr[i + 1] = indptr[i] + arr.size
        indices = np.concatenate(rows) if indptr[-1] else np.zeros(0, dtype=np.int64)
        return cls(n, indptr, indices)

    @classmethod
    def from_edges(cls, n: int, src, dst) -> "DirectedNetwork":
        """Build from edge arrays where ``dst[e]`` is a friend of ``src[e]``."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        lists: list[list[int]] = [[] for _ in range(n)]
        for s, d in zip(src.tolist(), dst.tolist()):
            if not (0 <= s < n):
                raise NetworkError(f"source index {s} out of range [0, {n})")
            lists[s].append(d)
        return cls.from_friend_lists(lists)

    def _check(self, i: int) -> int:
        if not (0 <= i < self.n):
            raise NetworkError(f"player index {i} out of range [0, {self.n})")
        return int(i)

    def friends(self, i: int) -> np.ndarray:
        i = self._check(i)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def num_friends(self, i: int) -> int:
        i = self._check(i)
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def in_degree(self) -> np.ndarray:
        if not self._in_degree:
            self._in_degree.append(np.bincount(self.indices, minlength=self.n))
        return self._in_degree[0]

    def centrality(self, i: int) -> int:
        """Number of players who name ``i`` as a friend."""
        i = self._check(i)
        return int(self.in_degree[i])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree)
        return src, self.indices.copy()

    def friend_lists(self) -> list[list[int]]:
        return [self.friends(i).tolist() for i in range(self.n)]

    def num_edges(self) -> int:
        return int(self.indices.size)

    def same_as(self, other: "DirectedNetwork") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def relabel(self, perm) -> "DirectedNetwork":
        """Return the network with player ``i`` renamed ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        lists: list[list[int]] = [[] for _ in range(self.n)]
        for i in range(self.n):
            lists[perm[i]] = perm[self.friends(i)].tolist()
        return DirectedNetwork.from_friend_lists(lists)


@dataclass(frozen=True)
class Neighborhood:
    center: int
    radius: int
    members: np.ndarray  # ascending player ids


@dataclass(frozen=True)
class Subgraph:
    """Subgame graph plus its map back to the parent network.

    ``q_parent`` keeps every member's friend count in the parent network:
    the subgame payoff still averages over the full friend list, with the
    friends outside the neighborhood contributing nothing.
    """

    network: DirectedNetwork
    members: np.ndarray
    center_index: int
    q_parent: np.ndarray


def neighborhood(net: DirectedNetwork, i: int, h: int) -> Neighborhood:
    """Players within ``h`` friend-steps of ``i`` (forward BFS)."""
    i = net._check(i)
    if h < 0:
        raise NetworkError("radius must be nonnegative")
    seen = np.zeros(net.n, dtype=bool)
    seen[i] = True
    frontier = np.array([i], dtype=np.int64)
    for _ in range(h):
        if frontier.size == 0:
            break
        nxt = np.concatenate([net.friends(j) for j in frontier])
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    return Neighborhood(i, h, np.flatnonzero(seen))


def subgraph(net: DirectedNetwork, i: int, h: int) -> Subgraph:
    nb = neighborhood(net, i, h)
    members = nb.members
    local = np.full(net.n, -1, dtype=np.int64)
    local[members] = np.arange(members.size)
    lists = []
    for j in members:
        f = local[net.friends(j)]
        lists.append(f[f >= 0].tolist())
    sub = DirectedNetwork.from_friend_lists(lists)
    return Subgraph(sub, members, int(local[i]), net.out_degree[members].copy())


def circle_order(n: int) -> np.ndarray:
    """Player ids in left-to-right order around the circle.

    Player 0 sits at the middle; 1 and 2 are its left and right neighbors,
    3 and 4 are left of 1 and right of 2, and so on outward.
    """
    left = np.arange(1, n, 2)[::-1]
    right = np.arange(2, n, 2)
    return np.concatenate([left, [0], right])


def generate_circle(n: int) -> DirectedNetwork:
    if n < 3:
        raise NetworkError(f"circle network needs n >= 3, got {n}")
    order = circle_order(n)
    lists: list[list[int]] = [[] for _ in range(n)]
    for pos, p in enumerate(order):
        lists[p] = [int(order[pos - 1]), int(order[(pos + 1) % n])]
    return DirectedNetwork.from_friend_lists(lists)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence``.

    ``seed`` may be an int or a sequence of ints, e.g. ``(base_seed, r)``
    for replication streams, or an existing ``SeedSequence``.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def generate_random(n: int, seed) -> DirectedNetwork:
    """Random friendship graph with pair states drawn from
    ``(1 - 4/n, 1/n, 1/n, 2/n)`` over ``{0, 1, 2, 3}``.

    For a pair ``i < j``: state 1 puts ``i`` in ``F_j``, state 2 puts ``j``
    in ``F_i``, state 3 does both, state 0 neither. Pairs are visited in
    lexicographic order with one uniform draw each.
    """
    if n < 5:
        raise NetworkError(f"random network needs n >= 5, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    cuts = np.cumsum([1 - 4 / n, 1 / n, 1 / n])
    lists: list[list[int]] = [[] for _ in range(n)]
    for i in range(n - 1):
        u = rng.random(n - 1 - i)
        state = np.searchsorted(cuts, u, side="right")
        js = np.arange(i + 1, n)
        for j in js[(state == 2) | (state == 3)].tolist():
            lists[i].append(j)
        for j in js[(state == 1) | (state == 3)].tolist():
            lists[j].append(i)
    return DirectedNetwork.from_friend_lists(lists)


def is_circle(net: DirectedNetwork) -> bool:
    try:
        circle_walk(net)
    except NetworkError:
        return False
    return True


def circle_walk(net: DirectedNetwork) -> np.ndarray:
    """Left-to-right cyclic order of a circle network.

    The walk starts at player 0 and steps first to its smaller-id friend,
    which is taken as its left neighbor; the returned array lists players
    so that ``order[pos - 1]`` is left of ``order[pos]``.
    """
    n = net.n
    if n < 3 or np.any(net.out_degree != 2):
        raise NetworkError("not a circle: every player needs exactly two friends")
    f = net.indices.reshape(n, 2)
    for i in range(n):
        for j in f[i]:
            if i not in f[j]:
                raise NetworkError("not a circle: friendship is not symmetric")
    walk = [0, int(f[0][0])]
    while len(walk) < n:
        prev, cur = walk[-2], walk[-1]
        nxt = int(f[cur][0] if f[cur][1] == prev else f[cur][1])
        if nxt == 0:
            raise NetworkError("not a circle: graph has more than one cycle")
        walk.append(nxt)
    last = walk[-1]
    if 0 not in f[last]:
        raise NetworkError("not a circle: walk does not close")
    # walk goes leftward from 0; reverse so the array runs left to right
    return np.array(walk[::-1], dtype=np.int64)
