"""Plain-text rendering of states and observations.

One character per hex, rows staggered to suggest the hex layout. Terrain:
`.` clear, `w` woods, `u` urban, `^` hill, `~` water. Units overlay as `B`
and `R`; on a fog observation enemy contacts render lowercase (stale
knowledge), and unspotted enemies do not appear at all.
"""

from __future__ import annotations

from .engine import GameState
from .observation import Observation

TERRAIN_CHARS = ".wu^~"


def _grid(game_map) -> list:
    return [
        [TERRAIN_CHARS[game_map.terrain[r * game_map.width + q]] for q in range(game_map.width)]
        for r in range(game_map.height)
    ]


def _assemble(rows) -> str:
    return "\n".join(" " * r + " ".join(cells) for r, cells in enumerate(rows))


def render_state(state: GameState) -> str:
    rows = _grid(state.map)
    for _s, q, r, _w in state.scenario.objective_rows:
        rows[r][q] = "*"
    for u in state.units.values():
        rows[u.r][u.q] = "B" if u.side == 0 else "R"
    return _assemble(rows)


def render_observation(obs: Observation) -> str:
    rows = _grid(obs.map)
    for _s, q, r, _w in obs.objectives:
        rows[r][q] = "*"
    for c in obs.contacts:
        rows[c.pos[1]][c.pos[0]] = "b" if obs.side == 1 else "r"
    for u in obs.own_units:
        rows[u.pos[1]][u.pos[0]] = "B" if obs.side == 0 else "R"
    return _assemble(rows)


def render_text(subject, side: int | None = None) -> str:
    """Render a GameState or an Observation; pure."""
    if isinstance(subject, Observation):
        return render_observation(subject)
    if isinstance(subject, GameState):
        if side is not None:
            from .observation import FOG, observe

            return render_observation(observe(subject, side, FOG))
        return render_state(subject)
    raise TypeError(f"cannot render {type(subject).__name__}")
