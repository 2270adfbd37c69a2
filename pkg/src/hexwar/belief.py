"""Particle-filter belief tracking over hidden enemy units.

Particles hypothesize positions for the enemy roster units that have never
been contacted; once an enemy is spotted it stays in the contact table
forever and leaves the hidden set. Between observations hidden units follow
a weakest-assumption random walk (stay or move to a random adjacent
passable hex, 50/50, once per elapsed command cycle); the walk model is a
deliberate placeholder and is isolated in `_motion_step` so it can be
replaced.

A hex counts as observed-empty when some own unit holds it in sight range
with line of sight and no currently-visible contact occupies it; particles
placing a hidden unit there are inconsistent and get weight zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .board import HEX_DIRS
from .observation import VISIBLE_STALENESS, BeliefAssumption, Observation, inject_belief
from .rng import Stream

RESAMPLE_ESS_FRACTION = 0.5


@dataclass(frozen=True)
class Particle:
    """One hypothesis: (roster_id, type_name, (q, r), strength) per hidden unit."""

    force: tuple
    weight: float

    def placements(self) -> tuple:
        return tuple((t, pos, s) for _uid, t, pos, s in self.force)


@dataclass(frozen=True)
class ParticleSet:
    particles: tuple
    side: int
    tick: int  # tick of the observation the set was last conditioned on
    roster_strengths: tuple  # ((enemy_id, initial_strength), ...)
    degenerate: bool = False

    def __len__(self):
        return len(self.particles)

    def effective_sample_size(self) -> float:
        return 1.0 / sum(p.weight * p.weight for p in self.particles)

    def position_marginal(self, roster_id: str) -> dict:
        """Posterior over one hidden unit's position (diagnostics and tests)."""
        out: dict = {}
        for p in self.particles:
            for uid, _t, pos, _s in p.force:
                if uid == roster_id:
                    out[pos] = out.get(pos, 0.0) + p.weight
        return out


def visible_hexes(obs: Observation) -> set:
    """Hexes currently under direct observation by the side's own units."""
    gm = obs.map
    seen: set = set()
    for u in obs.own_units:
        uq, ur = u.pos
        sight = u.sight
        for dq in range(-sight, sight + 1):
            for dr in range(-sight, sight + 1):
                if abs(dq) + abs(dr) + abs(dq + dr) > 2 * sight:
                    continue
                h = (uq + dq, ur + dr)
                if h in seen or not gm.in_bounds(h):
                    continue
                if gm.line_of_sight((uq, ur), h):
                    seen.add(h)
    return seen


def _observed_empty(obs: Observation) -> set:
    seen = visible_hexes(obs)
    for u in obs.own_units:
        seen.discard(tuple(u.pos))
    for c in obs.contacts:
        if c.staleness <= VISIBLE_STALENESS:
            seen.discard(tuple(c.pos))
    return seen


def _hidden_roster(obs: Observation) -> list:
    contacted = {c.enemy_id for c in obs.contacts}
    return [(uid, tname) for uid, tname in obs.enemy_roster if uid not in contacted]


def _blocked_hexes(obs: Observation) -> set:
    blocked = {tuple(u.pos) for u in obs.own_units}
    for c in obs.contacts:
        if c.staleness <= VISIBLE_STALENESS:
            blocked.add(tuple(c.pos))
    return blocked


def _draw_prior(obs, hidden, strengths, n, stream) -> tuple:
    empty_hexes = _observed_empty(obs)
    blocked = _blocked_hexes(obs)
    candidates = [
        h for h in obs.map.passable_hexes() if h not in empty_hexes and h not in blocked
    ]
    if not candidates:
        raise ValueError("no unobserved passable hexes available for the prior")
    particles = []
    w = 1.0 / n
    for _ in range(n):
        taken: set = set()
        force = []
        for uid, tname in hidden:
            free = [h for h in candidates if h not in taken]
            if not free:
                break
            pos = free[stream.randrange(len(free))]
            taken.add(pos)
            force.append((uid, tname, (pos[0], pos[1]), strengths[uid]))
        particles.append(Particle(force=tuple(force), weight=w))
    return tuple(particles)


def init_particles(obs: Observation, scenario_prior, n: int, seed: int) -> ParticleSet:
    """Prior: hidden roster units placed uniformly over unobserved passable hexes."""
    if n < 1:
        raise ValueError("particle count must be >= 1")
    enemy = 1 - obs.side
    strengths = {
        f.unit_id: f.strength for f in scenario_prior.forces if f.side == enemy
    }
    roster = tuple(sorted(strengths.items()))
    hidden = _hidden_roster(obs)
    if not hidden:
        empty = Particle(force=(), weight=1.0 / n)
        return ParticleSet((empty,) * n, obs.side, obs.tick, roster)
    particles = _draw_prior(obs, hidden, strengths, n, Stream(seed))
    return ParticleSet(particles, obs.side, obs.tick, roster)


def _motion_step(force: tuple, obs: Observation, blocked: set, stream: Stream) -> tuple:
    """Stay-or-step random walk for each hidden unit, one command cycle."""
    gm = obs.map
    taken = {pos for _u, _t, pos, _s in force}
    out = []
    for uid, tname, pos, s in force:
        if stream.uniform() < 0.5:
            out.append((uid, tname, pos, s))
            continue
        options = []
        for dq, dr in HEX_DIRS:
            h = (pos[0] + dq, pos[1] + dr)
            if gm.passable(h) and h not in blocked and h not in taken:
                options.append(h)
        if options:
            new_pos = options[stream.randrange(len(options))]
            taken.discard(pos)
            taken.add(new_pos)
            out.append((uid, tname, new_pos, s))
        else:
            out.append((uid, tname, pos, s))
    return tuple(out)


def _consistent(force: tuple, empty_hexes: set) -> bool:
    return all(pos not in empty_hexes for _u, _t, pos, _s in force)


def update_particles(particles: ParticleSet, obs: Observation, seed: int) -> ParticleSet:
    """Predict (random-walk motion per elapsed command cycle) then condition.

    Inconsistent particles get weight zero; survivors are renormalized.
    Systematic resampling restores equal weights when the effective sample
    size drops below half the particle count. If every particle dies the set
    is rebuilt from the prior and flagged degenerate.
    """
    if obs.side != particles.side:
        raise ValueError("observation side does not match particle set side")
    n = len(particles.particles)
    stream = Stream(seed)
    cycles = max(0, (obs.tick - particles.tick) // obs.ticks_per_command)
    blocked = _blocked_hexes(obs)
    hidden_ids = {uid for uid, _t in _hidden_roster(obs)}

    moved = []
    for p in particles.particles:
        force = tuple(entry for entry in p.force if entry[0] in hidden_ids)
        for _ in range(cycles):
            force = _motion_step(force, obs, blocked, stream)
        moved.append(Particle(force=force, weight=p.weight))

    empty_hexes = _observed_empty(obs)
    weights = [p.weight if _consistent(p.force, empty_hexes) else 0.0 for p in moved]
    total = sum(weights)
    if total <= 0.0:
        strengths = dict(particles.roster_strengths)
        hidden = _hidden_roster(obs)
        try:
            fresh = _draw_prior(obs, hidden, strengths, n, stream)
        except ValueError:
            fresh = tuple(Particle((), 1.0 / n) for _ in range(n))
        return ParticleSet(fresh, obs.side, obs.tick, particles.roster_strengths, degenerate=True)

    normalized = [
        Particle(force=p.force, weight=w / total) for p, w in zip(moved, weights)
    ]
    ess = 1.0 / sum(p.weight * p.weight for p in normalized)
    if ess < RESAMPLE_ESS_FRACTION * n:
        normalized = _systematic_resample(normalized, n, stream)
    return ParticleSet(
        tuple(normalized), obs.side, obs.tick, particles.roster_strengths
    )


def _systematic_resample(particles: list, n: int, stream: Stream) -> list:
    """Low-variance resampling: one uniform offset, n evenly spaced pointers."""
    offset = stream.uniform()
    positions = [(offset + k) / n for k in range(n)]
    out = []
    acc = 0.0
    i = 0
    w = 1.0 / n
    for p in particles:
        acc += p.weight
        while i < n and positions[i] < acc:
            out.append(Particle(force=p.force, weight=w))
            i += 1
    while len(out) < n:
        out.append(Particle(force=particles[-1].force, weight=w))
    return out


def sample_determinization(particles: ParticleSet, state, seed: int):
    """Draw one particle by weight and inject it as the full hidden world."""
    if not particles.particles:
        raise ValueError("empty particle set")
    stream = Stream(seed)
    u = stream.uniform()
    acc = 0.0
    chosen = particles.particles[-1]
    for p in particles.particles:
        acc += p.weight
        if u < acc:
            chosen = p
            break
    assumption = BeliefAssumption(chosen.placements())
    return inject_belief(state, particles.side, assumption)
