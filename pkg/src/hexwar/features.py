"""Fixed six-component feature vector extracted from observations.

Feature set id 1: (own_strength, known_enemy_strength, objectives_held,
mean_distance_to_objective, visible_enemy_count, tick_fraction). Extend by
adding a new versioned feature set, not by reordering this one.
"""

from __future__ import annotations

from .board import hex_distance
from .observation import VISIBLE_STALENESS, Observation

FEATURE_SET_ID = 1
FEATURE_NAMES = (
    "own_strength",
    "known_enemy_strength",
    "objectives_held",
    "mean_distance_to_objective",
    "visible_enemy_count",
    "tick_fraction",
)


def extract_features(obs: Observation) -> tuple:
    """Deterministic pure mapping Observation -> 6 floats."""
    own_strength = float(sum(u.strength for u in obs.own_units))
    known_enemy = float(sum(c.strength for c in obs.contacts))
    visible = float(sum(1 for c in obs.contacts if c.staleness <= VISIBLE_STALENESS))

    own_objs = [(q, r) for s, q, r, _w in obs.objectives if s == obs.side]
    own_positions = {u.pos for u in obs.own_units}
    held = float(sum(1 for h in own_objs if h in own_positions))
    if own_objs and obs.own_units:
        mean_dist = sum(
            min(hex_distance(u.pos, h) for h in own_objs) for u in obs.own_units
        ) / len(obs.own_units)
    else:
        mean_dist = 0.0

    return (
        own_strength,
        known_enemy,
        held,
        float(mean_dist),
        visible,
        obs.tick / obs.max_ticks,
    )
