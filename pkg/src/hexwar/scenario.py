"""Scenario description language: parsing, validation, serialization, variants.

Scenarios are line-oriented UTF-8 text. `#` starts a comment, tokens are
whitespace-separated, and the first non-blank line must be the header:

    scenario "<name>" version <int>

Directives:

    map <width> <height>
    terrain default <type>
    terrain hex <q> <r> <type>
    unittype <name> atk <i> def <i> range <i> sight <i> mp <i> maxstr <i>
    side <blue|red>
    unit <id> type <name> at <q> <r> strength <i>
    objective <side> at <q> <r> weight <real>
    victory <side> hold <real> inflicted <real> suffered <real> moved <real>
    ticks_per_command <i>
    max_ticks <i>
    flag deterministic_combat

`unit` lines attach to the most recent `side` line. The deterministic_combat
flag replaces both dice rolls with their deterministic counterparts (combat
casualties round the expected value, spotting always succeeds in range with
line of sight), which makes full game trees enumerable for search oracles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .board import (
    TERRAIN_BY_NAME,
    TERRAIN_NAMES,
    GameMap,
    HexCoord,
    Terrain,
    hex_distance,
)
from .rng import Stream

BLUE = 0
RED = 1
SIDE_NAMES = ("blue", "red")
SIDE_BY_NAME = {"blue": BLUE, "red": RED}


class ScenarioError(ValueError):
    """Parse or validation failure, carrying the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
        self.message = message


@dataclass(frozen=True)
class UnitTypeSpec:
    name: str
    attack: int
    defense: int
    weapon_range: int
    sight_range: int
    mp_per_tick: int
    max_strength: int

    def __post_init__(self):
        checks = (
            ("atk", self.attack, 0, 10),
            ("def", self.defense, 0, 10),
            ("range", self.weapon_range, 0, 1 << 16),
            ("sight", self.sight_range, 1, 1 << 16),
            ("mp", self.mp_per_tick, 1, 1 << 16),
            ("maxstr", self.max_strength, 1, 10),
        )
        for label, value, lo, hi in checks:
            if not lo <= value <= hi:
                raise ValueError(f"unittype {self.name}: {label}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class ForceUnit:
    unit_id: str
    side: int
    type_name: str
    q: int
    r: int
    strength: int


@dataclass(frozen=True)
class Objective:
    side: int
    q: int
    r: int
    weight: float


@dataclass(frozen=True)
class VictoryWeights:
    hold: float = 1.0
    inflicted: float = 1.0
    suffered: float = -1.0
    moved: float = 0.0


@dataclass(frozen=True)
class ScenarioDoc:
    name: str
    version: int
    game_map: GameMap
    default_terrain: Terrain
    terrain_overrides: tuple  # ((q, r, Terrain), ...) sorted by (r, q)
    unit_types: dict  # name -> UnitTypeSpec
    forces: tuple  # ForceUnit, sorted by (side, unit_id)
    objectives: tuple  # Objective, sorted by (side, q, r)
    victory: tuple  # (VictoryWeights blue, VictoryWeights red)
    ticks_per_command: int = 10
    max_ticks: int = 100
    deterministic_combat: bool = False
    objective_rows: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        rows = tuple((o.side, o.q, o.r, o.weight) for o in self.objectives)
        object.__setattr__(self, "objective_rows", rows)

    def side_units(self, side: int) -> list[ForceUnit]:
        return [f for f in self.forces if f.side == side]

    def roster_ids(self, side: int) -> list[str]:
        return [f.unit_id for f in self.forces if f.side == side]


_HEADER_RE = re.compile(r'^scenario\s+"([^"]*)"\s+version\s+(\d+)\s*$')


def _int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ScenarioError(line, f"expected integer {what}, got {tok!r}") from None


def _float(tok: str, line: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ScenarioError(line, f"expected number {what}, got {tok!r}") from None


def _terrain(tok: str, line: int) -> Terrain:
    t = TERRAIN_BY_NAME.get(tok)
    if t is None:
        raise ScenarioError(line, f"unknown terrain {tok!r}")
    return t


def parse_scenario(text: str) -> ScenarioDoc:
    """Parse and validate scenario text; raises ScenarioError with a line number."""
    lines = text.splitlines()
    header = None
    header_line = 0
    for i, raw in enumerate(lines, start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            header = stripped
            header_line = i
            break
    if header is None:
        raise ScenarioError(0, "missing scenario header")
    m = _HEADER_RE.match(header)
    if m is None:
        raise ScenarioError(header_line, 'missing scenario header (expected: scenario "<name>" version <int>)')
    name, version = m.group(1), int(m.group(2))

    width = height = None
    default_terrain = Terrain.CLEAR
    overrides: dict = {}
    unit_types: dict = {}
    forces: list[ForceUnit] = []
    unit_ids: dict = {}
    objectives: list[Objective] = []
    victory: dict = {}
    ticks_per_command = 10
    max_ticks = None
    deterministic = False
    current_side = None

    for i, raw in enumerate(lines, start=1):
        if i <= header_line:
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        word = toks[0]
        if word == "map":
            if len(toks) != 3:
                raise ScenarioError(i, "map takes <width> <height>")
            width = _int(toks[1], i, "width")
            height = _int(toks[2], i, "height")
            if width < 1 or height < 1:
                raise ScenarioError(i, "map dimensions must be positive")
        elif word == "terrain":
            if len(toks) == 3 and toks[1] == "default":
                default_terrain = _terrain(toks[2], i)
            elif len(toks) == 5 and toks[1] == "hex":
                q, r = _int(toks[2], i, "q"), _int(toks[3], i, "r")
                overrides[(q, r)] = (_terrain(toks[4], i), i)
            else:
                raise ScenarioError(i, "terrain takes `default <type>` or `hex <q> <r> <type>`")
        elif word == "unittype":
            if len(toks) != 14 or toks[2:13:2] != ["atk", "def", "range", "sight", "mp", "maxstr"]:
                raise ScenarioError(i, "unittype takes <name> atk <i> def <i> range <i> sight <i> mp <i> maxstr <i>")
            tname = toks[1]
            if tname in unit_types:
                raise ScenarioError(i, f"duplicate unittype {tname!r}")
            try:
                unit_types[tname] = UnitTypeSpec(
                    name=tname,
                    attack=_int(toks[3], i, "atk"),
                    defense=_int(toks[5], i, "def"),
                    weapon_range=_int(toks[7], i, "range"),
                    sight_range=_int(toks[9], i, "sight"),
                    mp_per_tick=_int(toks[11], i, "mp"),
                    max_strength=_int(toks[13], i, "maxstr"),
                )
            except ValueError as exc:
                raise ScenarioError(i, str(exc)) from None
        elif word == "side":
            if len(toks) != 2 or toks[1] not in SIDE_BY_NAME:
                raise ScenarioError(i, "side takes blue or red")
            current_side = SIDE_BY_NAME[toks[1]]
        elif word == "unit":
            if current_side is None:
                raise ScenarioError(i, "unit line before any side line")
            if (
                len(toks) != 9
                or toks[2] != "type"
                or toks[4] != "at"
                or toks[7] != "strength"
            ):
                raise ScenarioError(i, "unit takes <id> type <name> at <q> <r> strength <i>")
            uid = toks[1]
            if uid in unit_ids:
                raise ScenarioError(i, f"duplicate unit id {uid!r}")
            unit_ids[uid] = i
            forces.append(
                ForceUnit(
                    unit_id=uid,
                    side=current_side,
                    type_name=toks[3],
                    q=_int(toks[5], i, "q"),
                    r=_int(toks[6], i, "r"),
                    strength=_int(toks[8], i, "strength"),
                )
            )
        elif word == "objective":
            if len(toks) != 7 or toks[2] != "at" or toks[5] != "weight":
                raise ScenarioError(i, "objective takes <side> at <q> <r> weight <real>")
            if toks[1] not in SIDE_BY_NAME:
                raise ScenarioError(i, f"unknown side {toks[1]!r}")
            w = _float(toks[6], i, "weight")
            if w < 0:
                raise ScenarioError(i, "objective weight must be non-negative")
            objectives.append(
                Objective(SIDE_BY_NAME[toks[1]], _int(toks[3], i, "q"), _int(toks[4], i, "r"), w)
            )
        elif word == "victory":
            if (
                len(toks) != 10
                or toks[2] != "hold"
                or toks[4] != "inflicted"
                or toks[6] != "suffered"
                or toks[8] != "moved"
            ):
                raise ScenarioError(i, "victory takes <side> hold <real> inflicted <real> suffered <real> moved <real>")
            if toks[1] not in SIDE_BY_NAME:
                raise ScenarioError(i, f"unknown side {toks[1]!r}")
            victory[SIDE_BY_NAME[toks[1]]] = VictoryWeights(
                hold=_float(toks[3], i, "hold"),
                inflicted=_float(toks[5], i, "inflicted"),
                suffered=_float(toks[7], i, "suffered"),
                moved=_float(toks[9], i, "moved"),
            )
        elif word == "ticks_per_command":
            if len(toks) != 2:
                raise ScenarioError(i, "ticks_per_command takes one integer")
            ticks_per_command = _int(toks[1], i, "ticks_per_command")
            if ticks_per_command < 1:
                raise ScenarioError(i, "ticks_per_command must be >= 1")
        elif word == "max_ticks":
            if len(toks) != 2:
                raise ScenarioError(i, "max_ticks takes one integer")
            max_ticks = _int(toks[1], i, "max_ticks")
        elif word == "flag":
            if len(toks) != 2 or toks[1] != "deterministic_combat":
                raise ScenarioError(i, f"unknown flag {' '.join(toks[1:])!r}")
            deterministic = True
        elif word == "scenario":
            raise ScenarioError(i, "duplicate scenario header")
        else:
            raise ScenarioError(i, f"unknown directive {word!r}")

    if width is None:
        raise ScenarioError(0, "missing map declaration")
    if max_ticks is None:
        raise ScenarioError(0, "missing max_ticks")
    if max_ticks < ticks_per_command:
        raise ScenarioError(0, f"max_ticks {max_ticks} < ticks_per_command {ticks_per_command}")

    terrain = [int(default_terrain)] * (width * height)
    for (q, r), (t, line_no) in overrides.items():
        if not (0 <= q < width and 0 <= r < height):
            raise ScenarioError(line_no, f"terrain hex ({q}, {r}) out of bounds")
        terrain[r * width + q] = int(t)
    game_map = GameMap(width, height, terrain)

    occupied: dict = {}
    for f in forces:
        line_no = unit_ids[f.unit_id]
        spec = unit_types.get(f.type_name)
        if spec is None:
            raise ScenarioError(line_no, f"unknown unittype {f.type_name!r}")
        if not game_map.in_bounds((f.q, f.r)):
            raise ScenarioError(line_no, f"unit {f.unit_id} at ({f.q}, {f.r}) out of bounds")
        if not game_map.passable((f.q, f.r)):
            raise ScenarioError(line_no, f"unit {f.unit_id} placed on impassable terrain")
        if (f.q, f.r) in occupied:
            raise ScenarioError(line_no, f"unit {f.unit_id} overlaps {occupied[(f.q, f.r)]} at ({f.q}, {f.r})")
        occupied[(f.q, f.r)] = f.unit_id
        if not 1 <= f.strength <= spec.max_strength:
            raise ScenarioError(line_no, f"unit {f.unit_id} strength {f.strength} outside 1..{spec.max_strength}")
    for o in objectives:
        if not game_map.passable((o.q, o.r)):
            raise ScenarioError(0, f"objective at ({o.q}, {o.r}) not on passable terrain")

    return ScenarioDoc(
        name=name,
        version=version,
        game_map=game_map,
        default_terrain=default_terrain,
        terrain_overrides=tuple(
            sorted((q, r, t) for (q, r), (t, _) in overrides.items())
        ),
        unit_types=dict(sorted(unit_types.items())),
        forces=tuple(sorted(forces, key=lambda f: (f.side, f.unit_id))),
        objectives=tuple(sorted(objectives, key=lambda o: (o.side, o.q, o.r))),
        victory=(victory.get(BLUE, VictoryWeights()), victory.get(RED, VictoryWeights())),
        ticks_per_command=ticks_per_command,
        max_ticks=max_ticks,
        deterministic_combat=deterministic,
    )


def serialize_scenario(doc: ScenarioDoc) -> str:
    """Canonical text form; parse(serialize(doc)) == doc."""
    out = [f'scenario "{doc.name}" version {doc.version}']
    out.append(f"map {doc.game_map.width} {doc.game_map.height}")
    out.append(f"terrain default {TERRAIN_NAMES[doc.default_terrain]}")
    for q, r, t in doc.terrain_overrides:
        out.append(f"terrain hex {q} {r} {TERRAIN_NAMES[t]}")
    for spec in doc.unit_types.values():
        out.append(
            f"unittype {spec.name} atk {spec.attack} def {spec.defense} "
            f"range {spec.weapon_range} sight {spec.sight_range} "
            f"mp {spec.mp_per_tick} maxstr {spec.max_strength}"
        )
    for side in (BLUE, RED):
        units = doc.side_units(side)
        if units:
            out.append(f"side {SIDE_NAMES[side]}")
            for f in units:
                out.append(
                    f"unit {f.unit_id} type {f.type_name} at {f.q} {f.r} strength {f.strength}"
                )
    for o in doc.objectives:
        out.append(f"objective {SIDE_NAMES[o.side]} at {o.q} {o.r} weight {o.weight:g}")
    for side in (BLUE, RED):
        w = doc.victory[side]
        out.append(
            f"victory {SIDE_NAMES[side]} hold {w.hold:g} inflicted {w.inflicted:g} "
            f"suffered {w.suffered:g} moved {w.moved:g}"
        )
    out.append(f"ticks_per_command {doc.ticks_per_command}")
    out.append(f"max_ticks {doc.max_ticks}")
    if doc.deterministic_combat:
        out.append("flag deterministic_combat")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class JitterPositions:
    radius: int


@dataclass(frozen=True)
class ScaleStrength:
    factor: float


@dataclass(frozen=True)
class SwapObjective:
    index: int
    hex: tuple


class VariantError(ValueError):
    """Perturbation could not produce a valid scenario."""


def generate_variant(doc: ScenarioDoc, perturbation, seed: int) -> ScenarioDoc:
    """Deterministically perturbed copy of a scenario, re-validated."""
    stream = Stream(seed)
    if isinstance(perturbation, JitterPositions):
        radius = perturbation.radius
        if radius < 0:
            raise VariantError("jitter radius must be >= 0")
        if radius == 0:
            return doc
        gm = doc.game_map
        taken = {(f.q, f.r) for f in doc.forces}
        new_forces = []
        for f in doc.forces:
            taken.discard((f.q, f.r))
            placed = None
            for _ in range(100):
                dq = stream.randrange(2 * radius + 1) - radius
                dr = stream.randrange(2 * radius + 1) - radius
                cand = (f.q + dq, f.r + dr)
                if (
                    hex_distance((f.q, f.r), cand) <= radius
                    and gm.passable(cand)
                    and cand not in taken
                ):
                    placed = cand
                    break
            if placed is None:
                raise VariantError(f"could not jitter unit {f.unit_id} within {radius} hexes")
            taken.add(placed)
            new_forces.append(replace(f, q=placed[0], r=placed[1]))
        out = replace(doc, forces=tuple(sorted(new_forces, key=lambda f: (f.side, f.unit_id))))
    elif isinstance(perturbation, ScaleStrength):
        factor = perturbation.factor
        if factor <= 0:
            raise VariantError("scale factor must be positive")
        new_forces = []
        for f in doc.forces:
            cap = doc.unit_types[f.type_name].max_strength
            s = min(cap, max(1, int(round(f.strength * factor))))
            new_forces.append(replace(f, strength=s))
        out = replace(doc, forces=tuple(new_forces))
    elif isinstance(perturbation, SwapObjective):
        idx = perturbation.index
        if not 0 <= idx < len(doc.objectives):
            raise VariantError(f"objective index {idx} out of range")
        q, r = perturbation.hex
        if not doc.game_map.passable((q, r)):
            raise VariantError(f"objective hex ({q}, {r}) not passable")
        objs = list(doc.objectives)
        objs[idx] = replace(objs[idx], q=q, r=r)
        out = replace(doc, objectives=tuple(sorted(objs, key=lambda o: (o.side, o.q, o.r))))
    else:
        raise VariantError(f"unknown perturbation {perturbation!r}")
    # round-trip through the parser to re-run full validation
    return parse_scenario(serialize_scenario(out))


def load_builtin(name: str) -> ScenarioDoc:
    """Load a scenario shipped with the package (tiny-duel, river-crossing, objective-hold)."""
    from importlib import resources

    fname = name.replace("-", "_") + ".wg"
    ref = resources.files("hexwar.scenarios").joinpath(fname)
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"no builtin scenario named {name!r}") from None
    return parse_scenario(text)
