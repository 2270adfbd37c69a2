"""Agent-facing views of the simulation: observation filtering, belief
injection, policy registration, and space descriptions.

Policies never receive raw game states; they see immutable Observation
snapshots, so scripted in-engine behaviours obey the same information
boundary as external agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .board import GameMap, HexCoord, hex_distance
from .engine import ENGAGE, GameState, PlacementError, Unit, legal_orders
from .scenario import BLUE, RED, SIDE_NAMES

FULL = "full"
FOG = "fog"

# A contact is treated as currently visible while its staleness is at most
# one tick: spotting happens inside a step, so at the following command
# phase a just-seen enemy carries staleness 1.
VISIBLE_STALENESS = 1


@dataclass(frozen=True)
class ContactView:
    enemy_id: str
    pos: HexCoord
    last_seen_tick: int
    staleness: int
    type_name: str
    strength: int


@dataclass(frozen=True)
class UnitView:
    unit_id: str
    side: int
    type_name: str
    pos: HexCoord
    strength: int
    mp: int
    order: tuple | None
    stance: int
    weapon_range: int
    sight: int
    mp_rate: int
    max_strength: int


@dataclass(frozen=True)
class Observation:
    """Side-filtered snapshot. Terrain and rosters are common knowledge;
    enemy positions appear only through contacts."""

    side: int
    tick: int
    map: GameMap
    own_units: tuple
    contacts: tuple
    score: tuple  # (held, inflicted, suffered, mp_spent) for this side
    objectives: tuple  # (side, q, r, weight) rows
    max_ticks: int
    ticks_per_command: int
    enemy_roster: tuple  # (unit_id, type_name) pairs from the scenario

    def contact_map(self) -> dict:
        return {c.enemy_id: c for c in self.contacts}

    def unit(self, unit_id: str) -> UnitView | None:
        for u in self.own_units:
            if u.unit_id == unit_id:
                return u
        return None


def _unit_view(u: Unit) -> UnitView:
    return UnitView(
        unit_id=u.unit_id,
        side=u.side,
        type_name=u.type_name,
        pos=HexCoord(u.q, u.r),
        strength=u.strength,
        mp=u.mp,
        order=u.order,
        stance=u.stance,
        weapon_range=u.weapon_range,
        sight=u.sight,
        mp_rate=u.mp_rate,
        max_strength=u.max_strength,
    )


def observe(state: GameState, side: int, level: str = FOG) -> Observation:
    """Pure side-filtered view of a state.

    full: every live enemy appears as a staleness-0 contact.
    fog: contacts are exactly the side's accumulated contact table.
    """
    tick = state.tick
    own = tuple(_unit_view(u) for u in state.units.values() if u.side == side)
    if level == FULL:
        contacts = tuple(
            ContactView(u.unit_id, HexCoord(u.q, u.r), tick, 0, u.type_name, u.strength)
            for u in state.units.values()
            if u.side != side
        )
    elif level == FOG:
        table = state.contacts[side]
        contacts = tuple(
            ContactView(tid, HexCoord(rec[0], rec[1]), rec[2], tick - rec[2], rec[4], rec[3])
            for tid, rec in ((t, table[t]) for t in sorted(table))
        )
    else:
        raise ValueError(f"unknown observation level {level!r}")
    scenario = state.scenario
    enemy = 1 - side
    return Observation(
        side=side,
        tick=tick,
        map=state.map,
        own_units=own,
        contacts=contacts,
        score=state.score.components(side),
        objectives=scenario.objective_rows,
        max_ticks=scenario.max_ticks,
        ticks_per_command=scenario.ticks_per_command,
        enemy_roster=tuple((f.unit_id, f.type_name) for f in scenario.forces if f.side == enemy),
    )


@dataclass(frozen=True)
class BeliefAssumption:
    """Hypothesized placements for never-contacted enemy units:
    (type_name, (q, r), strength) triples."""

    placements: tuple

    @classmethod
    def of(cls, *placements) -> "BeliefAssumption":
        return cls(tuple((t, (int(p[0]), int(p[1])), int(s)) for t, p, s in placements))


def inject_belief(state: GameState, side: int, assumption) -> GameState:
    """Copy of the state with unseen enemies replaced by the assumption.

    Enemy units absent from `side`'s contact table are removed and the
    assumption's placements are instantiated in their place, matched to
    unused enemy roster ids of the same type in sorted position order. Own
    units, terrain, and contact-known enemies are untouched. The result is a
    legal state usable as a planning root.
    """
    placements = assumption.placements if isinstance(assumption, BeliefAssumption) else tuple(assumption)
    new = state.copy(with_chance_log=False)
    contacts = new.contacts[side]
    enemy_side = 1 - side
    hidden = [uid for uid, u in new.units.items() if u.side == enemy_side and uid not in contacts]
    for uid in hidden:
        u = new.units.pop(uid)
        del new._occ[(u.q, u.r)]
        new._side_strength[enemy_side] -= u.strength
    # unused roster ids per type, in sorted id order
    free_ids: dict = {}
    for f in state.scenario.forces:
        if f.side == enemy_side and f.unit_id not in contacts and f.unit_id not in new.units:
            free_ids.setdefault(f.type_name, []).append(f.unit_id)
    for ids in free_ids.values():
        ids.sort()
    specs = state.scenario.unit_types
    for type_name, pos, strength in sorted(placements, key=lambda p: (p[0], p[1][0], p[1][1])):
        spec = specs.get(type_name)
        if spec is None:
            raise PlacementError(f"assumption names unknown unit type {type_name!r}")
        pos = (int(pos[0]), int(pos[1]))
        if not new.map.passable(pos):
            raise PlacementError(f"assumption places a {type_name} on impassable terrain at {pos}")
        if pos in new._occ:
            raise PlacementError(f"assumption placement at {pos} collides with unit {new._occ[pos]}")
        if not 1 <= strength <= spec.max_strength:
            raise PlacementError(f"assumption strength {strength} outside 1..{spec.max_strength}")
        ids = free_ids.get(type_name)
        if not ids:
            raise PlacementError(f"assumption has more {type_name} units than the hidden enemy roster")
        uid = ids.pop(0)
        unit = Unit(uid, enemy_side, spec, pos[0], pos[1], strength)
        new.units[uid] = unit
        new._occ[pos] = uid
        new._side_strength[enemy_side] += strength
    new.units = {uid: new.units[uid] for uid in sorted(new.units)}
    new._pos_epoch += 1
    new._spot_cache = None
    new._spot_epoch = -1
    from .engine import _termination_reason

    new.terminal = _termination_reason(new)
    return new


@dataclass
class Policy:
    """Named decision function Observation -> GlobalAction (dict of orders)."""

    name: str
    decide: object  # callable(Observation) -> dict
    params: dict = field(default_factory=dict)

    def __call__(self, observation: Observation) -> dict:
        return self.decide(observation)


@dataclass
class RunConfig:
    """Mutable match wiring owned by a single driver."""

    registrations: tuple = (tuple(), tuple())  # per side: ((unit_id frozenset, Policy), ...)

    def units_registered(self, side: int) -> set:
        out: set = set()
        for ids, _ in self.registrations[side]:
            out |= ids
        return out


def register_policy(run_config: RunConfig, side: int, unit_ids, policy: Policy) -> RunConfig:
    """Attach a policy that will order the given units at every command phase."""
    ids = frozenset(unit_ids)
    taken = run_config.units_registered(side)
    overlap = ids & taken
    if overlap:
        raise ValueError(f"units already registered for {SIDE_NAMES[side]}: {sorted(overlap)}")
    regs = list(run_config.registrations)
    regs[side] = regs[side] + ((ids, policy),)
    run_config.registrations = tuple(regs)
    return run_config


def policy_orders(run_config: RunConfig, side: int, observation: Observation) -> dict:
    """Orders produced by the side's registered policies for their units."""
    out: dict = {}
    for ids, policy in run_config.registrations[side]:
        action = policy(observation)
        for uid, order in action.items():
            if uid in ids:
                out[uid] = order
    return out


OBSERVATION_LAYOUT = (
    ("side", "acting side (0 blue, 1 red)"),
    ("tick", "current tick"),
    ("map", "terrain grid, common knowledge"),
    ("own_units", "full records for every live own unit"),
    ("contacts", "last-seen enemy records with staleness"),
    ("score", "own (held, inflicted, suffered, mp_spent) accumulators"),
    ("objectives", "objective hexes and weights, common knowledge"),
    ("max_ticks", "scenario tick limit"),
    ("ticks_per_command", "command cycle length"),
    ("enemy_roster", "enemy unit ids and types, common knowledge"),
)


def describe_spaces(state: GameState, side: int) -> tuple:
    """(hierarchical action space descriptor, observation layout); pure."""
    per_unit = {}
    total = 1
    for uid, u in state.units.items():
        if u.side != side:
            continue
        orders = legal_orders(state, uid)
        kinds: dict = {}
        for o in orders:
            kinds[o[0]] = kinds.get(o[0], 0) + 1
        per_unit[uid] = {"count": len(orders), "kinds": kinds}
        total *= len(orders)
    action_descriptor = {
        "units": per_unit,
        "total_global_actions": total if per_unit else 0,
    }
    return action_descriptor, OBSERVATION_LAYOUT
