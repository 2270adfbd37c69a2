"""Axial hex grid: coordinates, terrain, maps, line of sight, pathfinding.

Hexes use axial coordinates (q, r) with the implied cube coordinate
s = -q - r. Maps are rectangular in (q, r) with 0 <= q < width and
0 <= r < height.
"""

from __future__ import annotations

import heapq
from enum import IntEnum
from typing import NamedTuple

from .rng import MASK64


class HexCoord(NamedTuple):
    q: int
    r: int


# Neighbour offsets in a fixed order (east, northeast, northwest, west,
# southwest, southeast); enumeration order is part of the deterministic
# behaviour of movement and legal-order generation.
HEX_DIRS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


def hex_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) >> 1


def hex_neighbors(h: tuple[int, int]) -> list[HexCoord]:
    q, r = h
    return [HexCoord(q + dq, r + dr) for dq, dr in HEX_DIRS]


def hex_ring(center: tuple[int, int], radius: int) -> list[HexCoord]:
    """Hexes at exactly `radius` from center, in a fixed walk order."""
    if radius <= 0:
        return [HexCoord(*center)]
    q, r = center
    # start at the southwest corner of the ring, then walk each edge
    q += HEX_DIRS[4][0] * radius
    r += HEX_DIRS[4][1] * radius
    out = []
    for side in range(6):
        dq, dr = HEX_DIRS[side]
        for _ in range(radius):
            out.append(HexCoord(q, r))
            q += dq
            r += dr
    return out


def hex_line(a: tuple[int, int], b: tuple[int, int]) -> list[HexCoord]:
    """Hexes on the straight line from a to b inclusive.

    Cube-space linear interpolation with a tiny deterministic nudge so that
    samples landing exactly on an edge always round the same way.
    """
    n = hex_distance(a, b)
    if n == 0:
        return [HexCoord(*a)]
    ax, az = a[0] + 1e-6, a[1] - 2e-6
    ay = -ax - az
    bx, bz = float(b[0]), float(b[1])
    by = -bx - bz
    out = []
    for i in range(n + 1):
        t = i / n
        x = ax + (bx - ax) * t
        y = ay + (by - ay) * t
        z = az + (bz - az) * t
        rx, ry, rz = round(x), round(y), round(z)
        dx, dy, dz = abs(rx - x), abs(ry - y), abs(rz - z)
        if dx > dy and dx > dz:
            rx = -ry - rz
        elif dy > dz:
            ry = -rx - rz
        else:
            rz = -rx - ry
        out.append(HexCoord(int(rx), int(rz)))
    return out


class Terrain(IntEnum):
    CLEAR = 0
    WOODS = 1
    URBAN = 2
    HILL = 3
    WATER = 4


TERRAIN_NAMES = ("clear", "woods", "urban", "hill", "water")
TERRAIN_BY_NAME = {name: Terrain(i) for i, name in enumerate(TERRAIN_NAMES)}

# Indexed by Terrain value. Water's move cost of 0 is a sentinel; use
# `GameMap.passable` rather than testing the cost directly.
MOVE_COST = (1, 2, 2, 2, 0)
COMBAT_MOD = (0, -1, -2, -1, 0)
CONCEALMENT = (1.0, 0.5, 0.4, 0.8, 0.0)
_BLOCKS_SIGHT = (False, True, True, True, False)  # hill handled specially


class NoPathError(ValueError):
    """Raised when no passable route exists between two hexes."""


def _fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


class GameMap:
    """Immutable rectangular hex map with cached sight and routing queries.

    The caches are derived data only: they never affect semantics and are
    shared freely between copied game states.
    """

    __slots__ = ("width", "height", "terrain", "digest", "_los", "_next_step")

    def __init__(self, width: int, height: int, terrain: list[int]):
        if width < 1 or height < 1:
            raise ValueError("map dimensions must be positive")
        if len(terrain) != width * height:
            raise ValueError("terrain grid size mismatch")
        self.width = width
        self.height = height
        self.terrain = tuple(terrain)
        self.digest = _fnv1a(
            width.to_bytes(4, "little")
            + height.to_bytes(4, "little")
            + bytes(self.terrain)
        )
        self._los: dict = {}
        self._next_step: dict = {}

    @classmethod
    def filled(cls, width: int, height: int, terrain: Terrain = Terrain.CLEAR) -> "GameMap":
        return cls(width, height, [int(terrain)] * (width * height))

    def __eq__(self, other):
        return (
            isinstance(other, GameMap)
            and self.width == other.width
            and self.height == other.height
            and self.terrain == other.terrain
        )

    def __hash__(self):
        return hash((self.width, self.height, self.digest))

    def in_bounds(self, h: tuple[int, int]) -> bool:
        return 0 <= h[0] < self.width and 0 <= h[1] < self.height

    def terrain_at(self, h: tuple[int, int]) -> Terrain:
        if not self.in_bounds(h):
            raise ValueError(f"hex {h} out of bounds")
        return Terrain(self.terrain[h[1] * self.width + h[0]])

    def passable(self, h: tuple[int, int]) -> bool:
        return (
            0 <= h[0] < self.width
            and 0 <= h[1] < self.height
            and self.terrain[h[1] * self.width + h[0]] != Terrain.WATER
        )

    def move_cost(self, h: tuple[int, int]) -> int:
        return MOVE_COST[self.terrain[h[1] * self.width + h[0]]]

    def passable_hexes(self) -> list[HexCoord]:
        out = []
        for r in range(self.height):
            base = r * self.width
            for q in range(self.width):
                if self.terrain[base + q] != Terrain.WATER:
                    out.append(HexCoord(q, r))
        return out

    def line_of_sight(self, observer: tuple[int, int], target: tuple[int, int]) -> bool:
        """True when no hex strictly between the endpoints blocks sight.

        Woods and urban always block; hills block unless the observer is
        itself on a hill (looking over the crest). Endpoints never block.
        """
        key = (observer[0], observer[1], target[0], target[1])
        cached = self._los.get(key)
        if cached is not None:
            return cached
        terrain = self.terrain
        width = self.width
        observer_on_hill = terrain[observer[1] * width + observer[0]] == Terrain.HILL
        ok = True
        for h in hex_line(observer, target)[1:-1]:
            t = terrain[h[1] * width + h[0]]
            if _BLOCKS_SIGHT[t] and (t != Terrain.HILL or not observer_on_hill):
                ok = False
                break
        self._los[key] = ok
        return ok

    def next_step(self, start: tuple[int, int], goal: tuple[int, int]):
        """First hex of the cheapest route start -> goal, or None if unreachable.

        Routing ignores units; occupancy conflicts are resolved by the engine's
        wait rule. Results are cached for every hex on each computed route.
        """
        if start == goal:
            return None
        key = (start[0], start[1], goal[0], goal[1])
        hit = self._next_step.get(key, 0)
        if hit != 0:
            return hit
        try:
            path = find_path(self, start, goal)
        except NoPathError:
            self._next_step[key] = None
            return None
        # every suffix of an optimal path is optimal: prime the cache for them
        prev = start
        for i, h in enumerate(path):
            self._next_step[(prev[0], prev[1], goal[0], goal[1])] = h
            prev = h
        return path[0]


def find_path(game_map: GameMap, start: tuple[int, int], goal: tuple[int, int]) -> list[HexCoord]:
    """Minimal-cost route from start to goal, excluding start.

    A* over terrain entry costs with the hex distance as an admissible
    heuristic (every entry costs at least 1). Ties between equal-f frontier
    nodes are broken by lexicographic (q, r) of the expanded node, so the
    returned path is deterministic.
    """
    if not game_map.passable(start) or not game_map.passable(goal):
        raise NoPathError(f"endpoints must be passable: {start} -> {goal}")
    if start == goal:
        return []
    terrain = game_map.terrain
    width, height = game_map.width, game_map.height
    gq, gr = goal
    best_g: dict = {(start[0], start[1]): 0}
    parent: dict = {}
    frontier = [(hex_distance(start, goal), start[0], start[1], 0)]
    while frontier:
        f, q, r, g = heapq.heappop(frontier)
        if (q, r) == (gq, gr):
            path = [HexCoord(q, r)]
            cur = (q, r)
            while cur in parent:
                cur = parent[cur]
                path.append(HexCoord(*cur))
            path.pop()  # drop start
            path.reverse()
            return path
        if g > best_g.get((q, r), g):
            continue
        for dq, dr in HEX_DIRS:
            nq, nr = q + dq, r + dr
            if not (0 <= nq < width and 0 <= nr < height):
                continue
            cost = MOVE_COST[terrain[nr * width + nq]]
            if cost == 0:
                continue
            ng = g + cost
            if ng < best_g.get((nq, nr), 1 << 30):
                best_g[(nq, nr)] = ng
                parent[(nq, nr)] = (q, r)
                dgq = nq - gq
                dgr = nr - gr
                hdist = (abs(dgq) + abs(dgr) + abs(dgq + dgr)) >> 1
                heapq.heappush(frontier, (ng + hdist, nq, nr, ng))
    raise NoPathError(f"no route {start} -> {goal}")
