"""Deterministic, headless, copyable forward model for a hex-grid wargame.

Time advances in discrete ticks. Orders may be issued only at command
phases (tick % ticks_per_command == 0); between phases units execute their
standing orders autonomously. All randomness flows through the in-state
SplitMix64 generator and every stochastic outcome is recorded as a
ChanceEvent, so a finished game can be replayed bit-exactly from its log.

Within one step the phases are, in order: movement and order execution,
spotting, simultaneous combat (resolved from pre-tick strengths), damage
application, objective scoring, tick advance and termination check. All
iteration orders are deterministic (units are kept in id-sorted insertion
order).

State hashing is normative and bit-exact: FNV-1a 64 over a canonical
little-endian serialization laid out as units (sorted by id, fields in
declared order), score components, tick, rng state, contacts, termination
code, map digest, scenario name. The chance log is excluded.
"""

from __future__ import annotations

import math
import struct

from .board import (
    COMBAT_MOD,
    CONCEALMENT,
    HEX_DIRS,
    MOVE_COST,
    GameMap,
    HexCoord,
    Terrain,
    _fnv1a,
    hex_distance,
    hex_ring,
)
from .rng import advance, mix_seed
from .scenario import BLUE, RED, SIDE_NAMES, ScenarioDoc

ENGAGE = 0
HOLD_FIRE = 1

# Movement points bank across ticks only up to the most expensive passable
# terrain, so an mp-1 unit can enter woods after two ticks but can never
# burst several hexes after idling.
MP_CAP = 2

P_HIT_FLOOR = 0.05
P_HIT_CEIL = 0.95
SPOT_BASE = 0.9

_TERMINAL_CODES = {None: 0, "tickLimit": 1, "eliminationBlue": 2, "eliminationRed": 3}


class EngineError(Exception):
    pass


class PlacementError(EngineError):
    pass


class PhaseError(EngineError):
    pass


class OrderError(EngineError):
    pass


class TerminalStateError(EngineError):
    pass


class UnknownUnitError(EngineError):
    pass


class ReplayMismatch(EngineError):
    """Recorded chance log diverges from the re-simulated game."""

    def __init__(self, tick: int, message: str):
        super().__init__(f"tick {tick}: {message}")
        self.tick = tick


# ---------------------------------------------------------------------------
# Orders. Represented as plain tuples so they are hashable, cheap, and
# trivially serializable:
#   ("move", ((q, r), ...))   1..3 waypoints
#   ("attack", target_id)
#   ("hold",)
#   ("scout", (q, r), radius)

HOLD = ("hold",)


def move_order(*waypoints) -> tuple:
    return ("move", tuple((int(q), int(r)) for q, r in waypoints))


def attack_order(target_id: str) -> tuple:
    return ("attack", target_id)


def scout_order(anchor, radius: int = 2) -> tuple:
    return ("scout", (int(anchor[0]), int(anchor[1])), int(radius))


def order_summary(orders: dict) -> str:
    """Compact human-readable form of a global action, stable across runs."""
    parts = []
    for uid in sorted(orders):
        o = orders[uid]
        kind = o[0]
        if kind == "move":
            arg = ">".join(f"{q},{r}" for q, r in o[1])
        elif kind == "attack":
            arg = o[1]
        elif kind == "scout":
            arg = f"{o[1][0]},{o[1][1]}r{o[2]}"
        else:
            arg = ""
        parts.append(f"{uid}:{kind}({arg})")
    return ";".join(parts)


class ChanceEvent(tuple):
    """One recorded stochastic outcome: (tick, purpose, subjects, draw, outcome)."""

    __slots__ = ()

    def __new__(cls, tick, purpose, subjects, draw, outcome):
        return tuple.__new__(cls, (tick, purpose, subjects, draw, outcome))

    tick = property(lambda self: self[0])
    purpose = property(lambda self: self[1])
    subjects = property(lambda self: self[2])
    draw = property(lambda self: self[3])
    outcome = property(lambda self: self[4])


class ChanceCursor:
    """Feeds a recorded chance log back into the engine during replay."""

    __slots__ = ("events", "index")

    def __init__(self, events):
        self.events = list(events)
        self.index = 0

    def take(self, tick, purpose, subjects, draw) -> ChanceEvent:
        if self.index >= len(self.events):
            raise ReplayMismatch(tick, "recorded chance log exhausted")
        ev = self.events[self.index]
        self.index += 1
        if ev[0] != tick or ev[1] != purpose or tuple(ev[2]) != subjects:
            raise ReplayMismatch(
                tick, f"expected {purpose} event for {subjects}, log has {ev[1]} for {ev[2]} at tick {ev[0]}"
            )
        if ev[3] != draw:
            raise ReplayMismatch(tick, f"recorded draw {ev[3]} differs from re-simulated draw {draw}")
        return ev

    def exhausted(self) -> bool:
        return self.index >= len(self.events)


class Unit:
    """A live unit. Type constants are denormalized onto the unit for speed."""

    __slots__ = (
        "unit_id", "side", "type_name", "q", "r", "strength", "mp", "order",
        "stance", "attack", "defense", "weapon_range", "sight", "mp_rate",
        "max_strength",
    )

    def __init__(self, unit_id, side, spec, q, r, strength, mp=0, order=None, stance=ENGAGE):
        self.unit_id = unit_id
        self.side = side
        self.type_name = spec.name
        self.q = q
        self.r = r
        self.strength = strength
        self.mp = mp
        self.order = order
        self.stance = stance
        self.attack = spec.attack
        self.defense = spec.defense
        self.weapon_range = spec.weapon_range
        self.sight = spec.sight_range
        self.mp_rate = spec.mp_per_tick
        self.max_strength = spec.max_strength

    def copy(self) -> "Unit":
        new = Unit.__new__(Unit)
        new.unit_id = self.unit_id
        new.side = self.side
        new.type_name = self.type_name
        new.q = self.q
        new.r = self.r
        new.strength = self.strength
        new.mp = self.mp
        new.order = self.order
        new.stance = self.stance
        new.attack = self.attack
        new.defense = self.defense
        new.weapon_range = self.weapon_range
        new.sight = self.sight
        new.mp_rate = self.mp_rate
        new.max_strength = self.max_strength
        return new

    @property
    def pos(self) -> HexCoord:
        return HexCoord(self.q, self.r)

    def __repr__(self):
        return f"Unit({self.unit_id} {SIDE_NAMES[self.side]} {self.type_name} @({self.q},{self.r}) s{self.strength})"


class ScoreVector:
    """Per-side accumulators. strengthSuffered is inflicted by the other side."""

    __slots__ = ("held", "inflicted", "mp_spent")

    def __init__(self):
        self.held = [0.0, 0.0]
        self.inflicted = [0, 0]
        self.mp_spent = [0, 0]

    def suffered(self, side: int) -> int:
        return self.inflicted[1 - side]

    def copy(self) -> "ScoreVector":
        new = ScoreVector.__new__(ScoreVector)
        new.held = list(self.held)
        new.inflicted = list(self.inflicted)
        new.mp_spent = list(self.mp_spent)
        return new

    def components(self, side: int) -> tuple:
        return (self.held[side], self.inflicted[side], self.inflicted[1 - side], self.mp_spent[side])

    def __repr__(self):
        return f"ScoreVector(held={self.held}, inflicted={self.inflicted}, mp={self.mp_spent})"


class GameState:
    """Self-contained simulation value; parallelism happens on copies."""

    __slots__ = (
        "tick", "map", "scenario", "units", "score", "rng", "chance_log",
        "contacts", "terminal", "chance_cursor",
        "_occ", "_side_strength", "_pos_epoch", "_spot_cache", "_spot_epoch",
    )

    def copy(self, with_chance_log: bool = True) -> "GameState":
        new = GameState.__new__(GameState)
        new.tick = self.tick
        new.map = self.map
        new.scenario = self.scenario
        new.units = {uid: u.copy() for uid, u in self.units.items()}
        new.score = self.score.copy()
        new.rng = self.rng
        new.chance_log = list(self.chance_log) if with_chance_log else []
        new.contacts = (dict(self.contacts[0]), dict(self.contacts[1]))
        new.terminal = self.terminal
        new.chance_cursor = None
        new._occ = dict(self._occ)
        new._side_strength = list(self._side_strength)
        new._pos_epoch = self._pos_epoch
        new._spot_cache = self._spot_cache  # rebuilt fresh on change, never mutated
        new._spot_epoch = self._spot_epoch
        return new

    def command_phase(self) -> bool:
        return self.tick % self.scenario.ticks_per_command == 0

    def side_strength(self, side: int) -> int:
        return self._side_strength[side]

    def __repr__(self):
        return f"GameState(tick={self.tick}, units={len(self.units)}, terminal={self.terminal})"


def instantiate(scenario: ScenarioDoc, seed: int) -> GameState:
    """Fresh game at tick 0 with the generator seeded through one mixing round."""
    state = GameState.__new__(GameState)
    state.tick = 0
    state.map = scenario.game_map
    state.scenario = scenario
    state.units = {}
    occ = {}
    strength = [0, 0]
    for f in sorted(scenario.forces, key=lambda f: f.unit_id):
        spec = scenario.unit_types[f.type_name]
        if not scenario.game_map.passable((f.q, f.r)):
            raise PlacementError(f"unit {f.unit_id} on impassable terrain at ({f.q}, {f.r})")
        if (f.q, f.r) in occ:
            raise PlacementError(f"units {occ[(f.q, f.r)]} and {f.unit_id} overlap at ({f.q}, {f.r})")
        unit = Unit(f.unit_id, f.side, spec, f.q, f.r, f.strength)
        state.units[f.unit_id] = unit
        occ[(f.q, f.r)] = f.unit_id
        strength[f.side] += f.strength
    state.score = ScoreVector()
    state.rng = mix_seed(seed)
    state.chance_log = []
    state.contacts = ({}, {})
    state.chance_cursor = None
    state._occ = occ
    state._side_strength = strength
    state._pos_epoch = 0
    state._spot_cache = None
    state._spot_epoch = -1
    state.terminal = _termination_reason(state)
    return state


def copy_state(state: GameState, with_chance_log: bool = True) -> GameState:
    return state.copy(with_chance_log)


def _termination_reason(state: GameState):
    if state._side_strength[BLUE] == 0:
        return "eliminationBlue"
    if state._side_strength[RED] == 0:
        return "eliminationRed"
    if state.tick >= state.scenario.max_ticks:
        return "tickLimit"
    return None


def is_terminal(state: GameState):
    """Termination reason, or None while the game is live."""
    return state.terminal


# ---------------------------------------------------------------------------
# Combat and spotting primitives


def p_hit(attacker: Unit, defender: Unit, defender_terrain: int) -> float:
    raw = 0.5 + 0.1 * (attacker.attack - defender.defense + COMBAT_MOD[defender_terrain])
    if raw < P_HIT_FLOOR:
        return P_HIT_FLOOR
    if raw > P_HIT_CEIL:
        return P_HIT_CEIL
    return raw


_BINOM_CDF_CACHE: dict = {}


def _binom_cdf(n: int, p: float) -> tuple:
    key = (n, round(p * 10000))
    table = _BINOM_CDF_CACHE.get(key)
    if table is None:
        q = 1.0 - p
        acc = 0.0
        out = []
        for k in range(n + 1):
            acc += math.comb(n, k) * (p ** k) * (q ** (n - k))
            out.append(acc)
        out[-1] = 1.0 + 1e-9  # absorb float dust so u < cdf always resolves
        table = tuple(out)
        _BINOM_CDF_CACHE[key] = table
    return table


def binomial_icdf(n: int, p: float, u: float) -> int:
    """Smallest k with u < P(X <= k) for X ~ Binomial(n, p)."""
    for k, acc in enumerate(_binom_cdf(n, p)):
        if u < acc:
            return k
    return n


def _combat_outcome(attacker: Unit, defender: Unit, defender_terrain: int, u: float) -> int:
    return min(defender.strength, binomial_icdf(attacker.strength, p_hit(attacker, defender, defender_terrain), u))


def _combat_outcome_det(attacker: Unit, defender: Unit, defender_terrain: int) -> int:
    expected = attacker.strength * p_hit(attacker, defender, defender_terrain)
    return min(defender.strength, int(expected + 0.5))


def p_spot(distance: int, sight: int, target_terrain: int) -> float:
    return SPOT_BASE * (1.0 - distance / (sight + 1)) * CONCEALMENT[target_terrain]


def _record_event(state: GameState, purpose: str, subjects: tuple, draw: int, outcome: int) -> None:
    cursor = state.chance_cursor
    if cursor is not None:
        ev = cursor.take(state.tick, purpose, subjects, draw)
        if ev[4] != outcome:
            raise ReplayMismatch(state.tick, f"recorded {purpose} outcome {ev[4]} but re-simulation produced {outcome}")
    state.chance_log.append(ChanceEvent(state.tick, purpose, subjects, draw, outcome))


def _apply_casualties(state: GameState, defender: Unit, amount: int) -> int:
    applied = min(defender.strength, amount)
    if applied == 0:
        return 0
    defender.strength -= applied
    state.score.inflicted[1 - defender.side] += applied
    state._side_strength[defender.side] -= applied
    if defender.strength == 0:
        del state.units[defender.unit_id]
        del state._occ[(defender.q, defender.r)]
        state._pos_epoch += 1
    return applied


def resolve_combat(state: GameState, attacker_id: str, defender_id: str, uniform: float) -> int:
    """Resolve one attack from an explicit uniform draw; applies casualties.

    Casualties follow the inverse CDF of Binomial(attacker strength, p_hit)
    evaluated at the draw, capped by the defender's current strength.
    """
    attacker = state.units.get(attacker_id)
    defender = state.units.get(defender_id)
    if attacker is None:
        raise UnknownUnitError(f"unknown or dead attacker {attacker_id!r}")
    if defender is None:
        raise UnknownUnitError(f"unknown or dead defender {defender_id!r}")
    if attacker.strength <= 0:
        raise OrderError("attacker has zero strength")
    if defender_id not in state.contacts[attacker.side]:
        raise OrderError(f"defender {defender_id} not spotted by {SIDE_NAMES[attacker.side]}")
    d = hex_distance((attacker.q, attacker.r), (defender.q, defender.r))
    if d > attacker.weapon_range:
        raise OrderError(f"defender at distance {d} beyond weapon range {attacker.weapon_range}")
    terrain = state.map.terrain[defender.r * state.map.width + defender.q]
    if state.scenario.deterministic_combat:
        casualties = _combat_outcome_det(attacker, defender, terrain)
        draw = 0
    else:
        casualties = _combat_outcome(attacker, defender, terrain, uniform)
        draw = int(uniform * (1 << 53)) << 11
    _record_event(state, "combat", (attacker_id, defender_id), draw, casualties)
    _apply_casualties(state, defender, casualties)
    state.terminal = _termination_reason(state)
    return casualties


def spot_attempt(state: GameState, observer_id: str, target_id: str, uniform: float) -> bool:
    """Resolve one spotting attempt from an explicit uniform draw."""
    observer = state.units.get(observer_id)
    target = state.units.get(target_id)
    if observer is None:
        raise UnknownUnitError(f"unknown or dead observer {observer_id!r}")
    if target is None:
        raise UnknownUnitError(f"unknown or dead target {target_id!r}")
    d = hex_distance((observer.q, observer.r), (target.q, target.r))
    if d > observer.sight:
        raise OrderError(f"target at distance {d} beyond sight range {observer.sight}")
    if not state.map.line_of_sight((observer.q, observer.r), (target.q, target.r)):
        raise OrderError("line of sight blocked")
    terrain = state.map.terrain[target.r * state.map.width + target.q]
    if state.scenario.deterministic_combat:
        spotted = True
        draw = 0
    else:
        spotted = uniform < p_spot(d, observer.sight, terrain)
        draw = int(uniform * (1 << 53)) << 11
    _record_event(state, "spotting", (observer_id, target_id), draw, 1 if spotted else 0)
    if spotted:
        state.contacts[observer.side][target_id] = (target.q, target.r, state.tick, target.strength, target.type_name)
    return spotted


# ---------------------------------------------------------------------------
# Order application


def _validate_order(state: GameState, side: int, uid: str, order) -> tuple:
    unit = state.units.get(uid)
    if unit is None:
        raise OrderError(f"order for unknown or dead unit {uid!r}")
    if unit.side != side:
        raise OrderError(f"unit {uid} does not belong to {SIDE_NAMES[side]}")
    if not isinstance(order, tuple) or not order:
        raise OrderError(f"malformed order for {uid}: {order!r}")
    kind = order[0]
    if kind == "hold":
        return HOLD
    if kind == "move":
        if len(order) != 2:
            raise OrderError(f"malformed move order for {uid}")
        waypoints = tuple(tuple(w) for w in order[1])
        if not 1 <= len(waypoints) <= 3:
            raise OrderError(f"move order for {uid} needs 1..3 waypoints, got {len(waypoints)}")
        for w in waypoints:
            if not state.map.passable(w):
                raise OrderError(f"move waypoint {w} for {uid} is not passable")
        return ("move", waypoints)
    if kind == "attack":
        if len(order) != 2:
            raise OrderError(f"malformed attack order for {uid}")
        target = order[1]
        if target not in state.contacts[side]:
            raise OrderError(f"attack target {target!r} was never spotted by {SIDE_NAMES[side]}")
        return ("attack", target)
    if kind == "scout":
        if len(order) != 3:
            raise OrderError(f"malformed scout order for {uid}")
        anchor = (int(order[1][0]), int(order[1][1]))
        radius = int(order[2])
        if radius < 1:
            raise OrderError(f"scout radius must be >= 1, got {radius}")
        if not state.map.in_bounds(anchor):
            raise OrderError(f"scout anchor {anchor} out of bounds")
        return ("scout", anchor, radius)
    raise OrderError(f"unknown order kind {kind!r} for {uid}")


def apply_orders(state: GameState, side: int, orders: dict) -> GameState:
    """Replace the standing orders of the referenced units.

    Only legal during a command phase. Validates every order before
    committing any, so a rejected action leaves the state untouched.
    """
    if state.terminal is not None:
        raise PhaseError("cannot issue orders in a terminal state")
    if state.tick % state.scenario.ticks_per_command != 0:
        raise PhaseError(
            f"orders only at command phases (tick {state.tick}, cycle {state.scenario.ticks_per_command})"
        )
    validated = [(uid, _validate_order(state, side, uid, order)) for uid, order in orders.items()]
    for uid, order in validated:
        state.units[uid].order = order
    return state


def legal_orders(state: GameState, unit_id: str) -> list:
    """Discretized per-unit order menu; Hold is always present.

    Attack options cover live spotted enemies whose last-seen position is
    within weapon range (a fog-honest gate: the shot simply does not resolve
    if the target has actually slipped out of range).
    """
    unit = state.units.get(unit_id)
    if unit is None:
        raise UnknownUnitError(f"unknown or dead unit {unit_id!r}")
    out = [HOLD]
    pos = (unit.q, unit.r)
    contacts = state.contacts[unit.side]
    if contacts:
        units = state.units
        for tid in sorted(contacts):
            if tid not in units:
                continue
            rec = contacts[tid]
            if hex_distance(pos, (rec[0], rec[1])) <= unit.weapon_range:
                out.append(("attack", tid))
    seen = set()
    gm = state.map
    for dq, dr in HEX_DIRS:
        n = (unit.q + dq, unit.r + dr)
        if gm.passable(n):
            seen.add(n)
            out.append(("move", (n,)))
    for _, oq, orr, _w in state.scenario.objective_rows:
        h = (oq, orr)
        if h != pos and h not in seen and gm.passable(h):
            seen.add(h)
            out.append(("move", (h,)))
    out.append(("scout", pos, 2))
    return out


# ---------------------------------------------------------------------------
# The tick


def _scout_step_target(state: GameState, unit: Unit, anchor, radius: int):
    gm = state.map
    ring = [h for h in hex_ring(anchor, radius) if gm.passable(h)]
    if not ring:
        return None
    pos = (unit.q, unit.r)
    for i, h in enumerate(ring):
        if h == pos:
            return ring[(i + 1) % len(ring)]
    best = None
    for h in ring:
        k = (hex_distance(pos, h), h[0], h[1])
        if best is None or k < best[0]:
            best = (k, h)
    return best[1]


def _walk_toward(state: GameState, unit: Unit, target, mp: int) -> int:
    """Advance unit toward target while movement points allow; returns mp left."""
    gm = state.map
    occ = state._occ
    terrain = gm.terrain
    width = gm.width
    score_mp = state.score.mp_spent
    while True:
        pos = (unit.q, unit.r)
        if pos == target:
            return mp
        nxt = gm.next_step(pos, target)
        if nxt is None:
            return mp
        cost = MOVE_COST[terrain[nxt[1] * width + nxt[0]]]
        if cost > mp:
            return mp
        if nxt in occ:
            return mp  # wait rule: the later mover stands this tick
        del occ[pos]
        occ[nxt] = unit.unit_id
        unit.q, unit.r = nxt
        mp -= cost
        score_mp[unit.side] += cost
        state._pos_epoch += 1


def _build_spot_pairs(state: GameState) -> list:
    """(observer_id, target_id, observer_side, p_spot) for every pair in
    sight range with line of sight, in deterministic (observer, target) order."""
    infos = [(u.unit_id, u.side, u.q, u.r, u.sight) for u in state.units.values()]
    gm = state.map
    terrain = gm.terrain
    width = gm.width
    los = gm.line_of_sight
    pairs = []
    for oid, oside, oq, orr, sight in infos:
        for tid, tside, tq, tr, _ in infos:
            if tside == oside:
                continue
            dq = oq - tq
            dr = orr - tr
            d = (abs(dq) + abs(dr) + abs(dq + dr)) >> 1
            if d > sight or not los((oq, orr), (tq, tr)):
                continue
            pairs.append((oid, tid, oside, p_spot(d, sight, terrain[tr * width + tq])))
    return pairs


def step(state: GameState) -> GameState:
    """Advance the simulation one tick."""
    if state.terminal is not None:
        raise TerminalStateError(f"cannot step a terminal state ({state.terminal})")
    units = state.units
    tick = state.tick
    deterministic = state.scenario.deterministic_combat

    # movement and order execution
    for u in list(units.values()):
        mp = u.mp + u.mp_rate
        order = u.order
        if order is not None:
            kind = order[0]
            if kind == "move":
                waypoints = order[1]
                while waypoints:
                    target = waypoints[0]
                    if (u.q, u.r) == target:
                        waypoints = waypoints[1:]
                        continue
                    left = _walk_toward(state, u, target, mp)
                    if left == mp and (u.q, u.r) != target:
                        break  # blocked or out of movement; retry next tick
                    mp = left
                    if (u.q, u.r) != target:
                        break
                    waypoints = waypoints[1:]
                u.order = ("move", waypoints) if waypoints else None
            elif kind == "scout":
                target = _scout_step_target(state, u, order[1], order[2])
                if target is not None:
                    mp = _walk_toward(state, u, target, mp)
        u.mp = mp if mp < MP_CAP else MP_CAP

    # spotting
    if state._spot_epoch != state._pos_epoch:
        state._spot_cache = _build_spot_pairs(state)
        state._spot_epoch = state._pos_epoch
    pairs = state._spot_cache
    if pairs:
        contacts = state.contacts
        rng = state.rng
        log = state.chance_log
        cursor = state.chance_cursor
        for oid, tid, oside, p in pairs:
            if deterministic:
                draw = 0
                spotted = 1
            else:
                rng = (rng + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
                z = rng
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
                draw = z ^ (z >> 31)
                spotted = 1 if (draw >> 11) * (1.0 / (1 << 53)) < p else 0
            if cursor is not None:
                ev = cursor.take(tick, "spotting", (oid, tid), draw)
                if ev[4] != spotted:
                    raise ReplayMismatch(tick, f"recorded spotting outcome {ev[4]} but re-simulation produced {spotted}")
            log.append(ChanceEvent(tick, "spotting", (oid, tid), draw, spotted))
            if spotted:
                t = units[tid]
                contacts[oside][tid] = (t.q, t.r, tick, t.strength, t.type_name)
        state.rng = rng

    # combat: collect engagements, resolve from pre-tick strengths, then apply
    engagements = []
    contacts = state.contacts
    for u in units.values():
        side_contacts = contacts[u.side]
        if not side_contacts:
            continue
        target = None
        order = u.order
        if order is not None and order[0] == "attack":
            t = units.get(order[1])
            if (
                t is not None
                and order[1] in side_contacts
                and hex_distance((u.q, u.r), (t.q, t.r)) <= u.weapon_range
            ):
                target = t
        if target is None and u.stance == ENGAGE:
            best = None
            for tid in side_contacts:
                t = units.get(tid)
                if t is None:
                    continue
                d = hex_distance((u.q, u.r), (t.q, t.r))
                if d <= u.weapon_range and (best is None or (d, tid) < best[:2]):
                    best = (d, tid, t)
            if best is not None:
                target = best[2]
        if target is not None:
            engagements.append((u, target))
    if engagements:
        gm = state.map
        terrain = gm.terrain
        width = gm.width
        damage: dict = {}
        for attacker, defender in engagements:
            t = terrain[defender.r * width + defender.q]
            if deterministic:
                draw = 0
                casualties = _combat_outcome_det(attacker, defender, t)
            else:
                u_draw, draw, state.rng = _advance_unit(state.rng)
                casualties = _combat_outcome(attacker, defender, t, u_draw)
            if state.chance_cursor is not None:
                ev = state.chance_cursor.take(tick, "combat", (attacker.unit_id, defender.unit_id), draw)
                if ev[4] != casualties:
                    raise ReplayMismatch(tick, f"recorded combat outcome {ev[4]} but re-simulation produced {casualties}")
            state.chance_log.append(ChanceEvent(tick, "combat", (attacker.unit_id, defender.unit_id), draw, casualties))
            if casualties:
                damage[defender.unit_id] = damage.get(defender.unit_id, 0) + casualties
        for did in sorted(damage):
            defender = units.get(did)
            if defender is not None:
                _apply_casualties(state, defender, damage[did])

    # objective holding accrues each tick, weighted per objective
    occ = state._occ
    held = state.score.held
    for oside, oq, orr, weight in state.scenario.objective_rows:
        holder = occ.get((oq, orr))
        if holder is not None and units[holder].side == oside:
            held[oside] += weight

    state.tick = tick + 1
    state.terminal = _termination_reason(state)
    return state


def _advance_unit(rng: int):
    z, rng = advance(rng)
    return (z >> 11) * (1.0 / (1 << 53)), z, rng


# ---------------------------------------------------------------------------
# Scoring and hashing


def score_state(state: GameState) -> tuple:
    """(copy of the score vector, {side: scalar victory points}); pure."""
    sv = state.score.copy()
    scalars = {}
    for side in (BLUE, RED):
        w = state.scenario.victory[side]
        scalars[side] = (
            w.hold * sv.held[side]
            + w.inflicted * sv.inflicted[side]
            + w.suffered * sv.inflicted[1 - side]
            + w.moved * sv.mp_spent[side]
        )
    return sv, scalars


def scalar_vp(state: GameState, side: int) -> float:
    w = state.scenario.victory[side]
    sc = state.score
    return (
        w.hold * sc.held[side]
        + w.inflicted * sc.inflicted[side]
        + w.suffered * sc.inflicted[1 - side]
        + w.moved * sc.mp_spent[side]
    )


_ORDER_KIND_CODE = {"move": 1, "attack": 2, "hold": 3, "scout": 4}


def canonical_bytes(state: GameState) -> bytes:
    """Normative canonical serialization; the chance log is excluded."""
    pack = struct.pack
    parts = []
    add = parts.append
    for uid in sorted(state.units):
        u = state.units[uid]
        ub = uid.encode()
        add(pack("<H", len(ub)))
        add(ub)
        add(pack("<B", u.side))
        tb = u.type_name.encode()
        add(pack("<H", len(tb)))
        add(tb)
        add(pack("<iiBH", u.q, u.r, u.strength, u.mp))
        o = u.order
        if o is None:
            add(b"\x00")
        else:
            kind = o[0]
            add(pack("<B", _ORDER_KIND_CODE[kind]))
            if kind == "move":
                add(pack("<B", len(o[1])))
                for wq, wr in o[1]:
                    add(pack("<ii", wq, wr))
            elif kind == "attack":
                ab = o[1].encode()
                add(pack("<H", len(ab)))
                add(ab)
            elif kind == "scout":
                add(pack("<iiH", o[1][0], o[1][1], o[2]))
        add(pack("<B", u.stance))
    sc = state.score
    add(pack("<dd", sc.held[0], sc.held[1]))
    add(pack(
        "<IIIIII",
        sc.inflicted[0], sc.inflicted[1],
        sc.inflicted[1], sc.inflicted[0],  # suffered(blue), suffered(red)
        sc.mp_spent[0], sc.mp_spent[1],
    ))
    add(pack("<QQ", state.tick, state.rng))
    for side in (BLUE, RED):
        table = state.contacts[side]
        add(pack("<H", len(table)))
        for tid in sorted(table):
            q, r, seen_tick, strength, type_name = table[tid]
            ib = tid.encode()
            add(pack("<H", len(ib)))
            add(ib)
            add(pack("<iiIB", q, r, seen_tick, strength))
            tb = type_name.encode()
            add(pack("<H", len(tb)))
            add(tb)
    add(pack("<B", _TERMINAL_CODES[state.terminal]))
    add(pack("<Q", state.map.digest))
    nb = state.scenario.name.encode()
    add(pack("<H", len(nb)))
    add(nb)
    return b"".join(parts)


def state_hash(state: GameState) -> int:
    """FNV-1a 64 over the canonical serialization."""
    return _fnv1a(canonical_bytes(state))
