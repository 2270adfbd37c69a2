"""Action abstraction: the unit script portfolio and doctrine filtering.

The five scripts replace the raw combinatorial order space with a small
closed set that search agents can index. Scripts consume Observations only,
so they act on the side's actual knowledge, and every script degrades to a
legal order (Hold in the worst case).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .board import HEX_DIRS, GameMap, hex_distance
from .board import find_path as _board_find_path
from .observation import Observation, UnitView


class ScriptId(IntEnum):
    ADVANCE_TO_OBJECTIVE = 0
    HOLD_POSITION = 1
    SCOUT_PATROL = 2
    WITHDRAW_IF_OUTNUMBERED = 3
    ATTACK_NEAREST = 4


ALL_SCRIPTS = tuple(ScriptId)
SCRIPT_NAMES = {
    ScriptId.ADVANCE_TO_OBJECTIVE: "AdvanceToObjective",
    ScriptId.HOLD_POSITION: "HoldPosition",
    ScriptId.SCOUT_PATROL: "ScoutPatrol",
    ScriptId.WITHDRAW_IF_OUTNUMBERED: "WithdrawIfOutnumbered",
    ScriptId.ATTACK_NEAREST: "AttackNearest",
}


@dataclass(frozen=True)
class ScriptParams:
    aggression: float = 1.0  # strength-odds ratio required to stand and fight
    scout_radius: int = 2

    def __post_init__(self):
        if not 0.0 <= self.aggression <= 2.0:
            raise ValueError(f"aggression {self.aggression} outside [0, 2]")
        if self.scout_radius < 1:
            raise ValueError("scout_radius must be >= 1")


DEFAULT_PARAMS = ScriptParams()


def find_path(game_map: GameMap, start, goal):
    """Minimal-cost route over terrain entry costs (A*, deterministic ties)."""
    return _board_find_path(game_map, start, goal)


def _nearest_own_objective(obs: Observation, pos):
    best = None
    for s, q, r, _w in obs.objectives:
        if s != obs.side:
            continue
        k = (hex_distance(pos, (q, r)), q, r)
        if best is None or k < best[0]:
            best = (k, (q, r))
    return best[1] if best else None


def _step_toward(obs: Observation, unit: UnitView, goal):
    if goal is None or tuple(unit.pos) == tuple(goal):
        return ("hold",)
    nxt = obs.map.next_step(tuple(unit.pos), tuple(goal))  # cached A* first step
    if nxt is None:
        return ("hold",)
    return ("move", ((nxt[0], nxt[1]),))


def _advance(obs: Observation, unit: UnitView):
    return _step_toward(obs, unit, _nearest_own_objective(obs, unit.pos))


def _attack_nearest(obs: Observation, unit: UnitView):
    best = None
    for c in obs.contacts:
        d = hex_distance(unit.pos, c.pos)
        if d <= unit.weapon_range and (best is None or (d, c.enemy_id) < best[0]):
            best = ((d, c.enemy_id), c)
    if best is not None:
        return ("attack", best[1].enemy_id)
    return _advance(obs, unit)


def _withdraw_if_outnumbered(obs: Observation, unit: UnitView, params: ScriptParams):
    near = [c for c in obs.contacts if hex_distance(unit.pos, c.pos) <= 3]
    enemy_strength = sum(c.strength for c in near)
    own_local = sum(
        u.strength for u in obs.own_units if hex_distance(unit.pos, u.pos) <= 3
    )
    if not near or enemy_strength <= params.aggression * own_local:
        return _attack_nearest(obs, unit)
    # flee: step to the neighbour that most increases distance to the enemy centroid
    n = len(near)
    cq = sum(c.pos[0] for c in near) / n
    cr = sum(c.pos[1] for c in near) / n
    own_positions = {tuple(u.pos) for u in obs.own_units}

    def away(h):
        dq = h[0] - cq
        dr = h[1] - cr
        return (abs(dq) + abs(dr) + abs(dq + dr)) / 2

    here = away(unit.pos)
    best = None
    for dq, dr in HEX_DIRS:
        h = (unit.pos[0] + dq, unit.pos[1] + dr)
        if not obs.map.passable(h) or h in own_positions:
            continue
        k = (-away(h), h[0], h[1])
        if best is None or k < best[0]:
            best = (k, h)
    if best is None or -best[0][0] <= here:
        return ("hold",)
    return ("move", (best[1],))


def evaluate_script(script_id, params: ScriptParams, obs: Observation, unit_id: str):
    """Order chosen by a script for one unit; always legal, Hold as fallback."""
    unit = obs.unit(unit_id)
    if unit is None:
        raise KeyError(f"unit {unit_id!r} not alive in observation")
    sid = ScriptId(script_id)
    if sid == ScriptId.HOLD_POSITION:
        return ("hold",)
    if sid == ScriptId.SCOUT_PATROL:
        return ("scout", (unit.pos[0], unit.pos[1]), params.scout_radius)
    if sid == ScriptId.ADVANCE_TO_OBJECTIVE:
        return _advance(obs, unit)
    if sid == ScriptId.ATTACK_NEAREST:
        return _attack_nearest(obs, unit)
    if sid == ScriptId.WITHDRAW_IF_OUTNUMBERED:
        return _withdraw_if_outnumbered(obs, unit, params)
    raise ValueError(f"unknown script {script_id!r}")


def script_global_action(
    assignment: dict, obs: Observation, params: ScriptParams = DEFAULT_PARAMS
) -> dict:
    """Evaluate a unit_id -> ScriptId assignment into a global action."""
    return {
        uid: evaluate_script(sid, params, obs, uid)
        for uid, sid in assignment.items()
        if obs.unit(uid) is not None
    }


# ---------------------------------------------------------------------------
# Doctrine filtering


@dataclass(frozen=True)
class ForbidAttackBelowOdds:
    ratio: float


@dataclass(frozen=True)
class ForbidEnterTerrain:
    terrain: int  # board.Terrain value


@dataclass(frozen=True)
class ForbidBeyondHex:
    distance: int
    start_positions: tuple  # ((unit_id, (q, r)), ...) fixed at rule creation


def _violates(rule, unit: UnitView, order, obs: Observation) -> bool:
    kind = order[0]
    if isinstance(rule, ForbidAttackBelowOdds):
        if kind != "attack":
            return False
        target = next((c for c in obs.contacts if c.enemy_id == order[1]), None)
        if target is None or target.strength <= 0:
            return False
        return unit.strength / target.strength < rule.ratio
    if isinstance(rule, ForbidEnterTerrain):
        if kind == "move":
            return any(
                obs.map.in_bounds(w) and obs.map.terrain_at(w) == rule.terrain
                for w in order[1]
            )
        return False
    if isinstance(rule, ForbidBeyondHex):
        if kind not in ("move", "scout"):
            return False
        starts = dict(rule.start_positions)
        start = starts.get(unit.unit_id)
        if start is None:
            return False
        if kind == "move":
            return any(hex_distance(start, w) > rule.distance for w in order[1])
        anchor, radius = order[1], order[2]
        return hex_distance(start, anchor) + radius > rule.distance
    raise TypeError(f"unknown doctrine rule {rule!r}")


def filter_doctrine(orders: dict, rules, obs: Observation) -> dict:
    """Replace rule-violating orders with Hold; idempotent."""
    if not rules:
        return dict(orders)
    out = {}
    for uid, order in orders.items():
        unit = obs.unit(uid)
        if unit is not None and any(_violates(rule, unit, order, obs) for rule in rules):
            out[uid] = ("hold",)
        else:
            out[uid] = order
    return out
