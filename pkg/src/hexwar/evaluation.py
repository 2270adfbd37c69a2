"""Match running, tournaments, Nash averaging, Pareto fronts, MAP-Elites.

A match outcome is the victory-point comparison at termination mapped to
{0, 0.5, 1}; tournament matrices stay on that win-rate scale so Nash
averaging operates on a symmetric zero-sum payoff. VP margins remain
available on each GameResult for anomaly screening.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .agents import (
    AgentConfig,
    Agent,
    BudgetExhausted,
    SearchBudget,
    make_agent,
)
from .belief import init_particles, sample_determinization, update_particles
from .engine import BLUE, RED, GameState, apply_orders, instantiate, scalar_vp, state_hash, step
from .features import extract_features
from .observation import FOG, FULL, RunConfig, observe, policy_orders
from .replay import ReplayWriter
from .rng import Stream, derive
from .scenario import SIDE_NAMES, ScenarioDoc
from .scripts import ScriptId, filter_doctrine


@dataclass
class GameResult:
    scenario_name: str
    seed: int
    blue_name: str
    red_name: str
    score: object
    vp: dict
    outcome_blue: float  # 1 blue win, 0.5 draw, 0 red win
    tick_count: int
    replay_path: str | None = None
    margin: float = 0.0  # vp blue - vp red
    earliest_death_tick: dict = field(default_factory=dict)
    forfeited_by: int | None = None
    decisions: list = field(default_factory=list)  # (DecisionRecord, features) pairs

    def outcome(self, side: int) -> float:
        return self.outcome_blue if side == BLUE else 1.0 - self.outcome_blue


DEFAULT_BUDGET = SearchBudget(1000)


def _decision_root(state, side, fog, particles, seed):
    """Planning root for state-based agents: the truth when fog is off, a
    belief determinization when it is on."""
    if not fog:
        return state
    return sample_determinization(particles, state, seed)


def run_match(
    scenario: ScenarioDoc,
    blue,
    red,
    seed: int,
    *,
    fog: bool = True,
    budget: SearchBudget = DEFAULT_BUDGET,
    doctrine_rules=None,
    run_config: RunConfig | None = None,
    particle_count: int = 24,
    replay_path=None,
    collect_decisions: bool = False,
) -> GameResult:
    """Drive one full game; deterministic under (configs, seed).

    `blue` and `red` are AgentConfigs or Agent instances. Registered policies
    in `run_config` override agent orders for their units. An agent that
    overruns a wall-clock budget forfeits the match.
    """
    agents = {
        BLUE: blue if isinstance(blue, Agent) else make_agent(blue),
        RED: red if isinstance(red, Agent) else make_agent(red),
    }
    for a in agents.values():
        a.reset()
    state = instantiate(scenario, seed)
    writer = (
        ReplayWriter(replay_path, scenario, seed, agents[BLUE].name, agents[RED].name)
        if replay_path
        else None
    )
    level = FOG if fog else FULL
    beliefs = {BLUE: None, RED: None}
    decisions = []
    deaths: dict = {}
    unit_counts = {
        BLUE: sum(1 for u in state.units.values() if u.side == BLUE),
        RED: sum(1 for u in state.units.values() if u.side == RED),
    }
    forfeited_by = None
    chance_written = 0

    while state.terminal is None and forfeited_by is None:
        if state.tick % scenario.ticks_per_command == 0:
            for side in (BLUE, RED):
                agent = agents[side]
                obs = observe(state, side, level)
                decision_seed = derive(seed, state.tick, side, 0xDEC1)
                if fog:
                    if beliefs[side] is None:
                        beliefs[side] = init_particles(
                            obs, scenario, particle_count, derive(seed, side, 0xBE11)
                        )
                    else:
                        beliefs[side] = update_particles(
                            beliefs[side], obs, derive(seed, state.tick, side, 0xBE1F)
                        )
                started = time.monotonic()
                try:
                    if agent.needs_belief and fog:
                        orders, record = agent.decide_belief(
                            obs, beliefs[side], state, budget, decision_seed
                        )
                    else:
                        root = _decision_root(
                            state, side, fog and beliefs[side] is not None,
                            beliefs[side], derive(seed, state.tick, side, 0xDE7),
                        )
                        orders, record = agent.decide(root, side, budget, decision_seed)
                except BudgetExhausted:
                    forfeited_by = side
                    break
                if (
                    budget.max_millis is not None
                    and (time.monotonic() - started) * 1000.0 > budget.max_millis * 4
                ):
                    # hard driver-side wall clock: four budgets of grace
                    forfeited_by = side
                    break
                if doctrine_rules:
                    orders = filter_doctrine(orders, doctrine_rules, obs)
                if run_config is not None:
                    orders.update(policy_orders(run_config, side, obs))
                apply_orders(state, side, orders)
                if writer:
                    writer.orders(state.tick, side, orders)
                if collect_decisions:
                    decisions.append((record, extract_features(obs)))
        if forfeited_by is not None:
            break
        step(state)
        if writer:
            log = state.chance_log
            while chance_written < len(log):
                writer.chance(log[chance_written])
                chance_written += 1
        for side in (BLUE, RED):
            count = sum(1 for u in state.units.values() if u.side == side)
            if count < unit_counts[side] and side not in deaths:
                deaths[side] = state.tick - 1
            unit_counts[side] = count

    vp = {s: scalar_vp(state, s) for s in (BLUE, RED)}
    if forfeited_by is not None:
        outcome_blue = 0.0 if forfeited_by == BLUE else 1.0
        reason = f"forfeit{SIDE_NAMES[forfeited_by].capitalize()}"
    else:
        if vp[BLUE] > vp[RED]:
            outcome_blue = 1.0
        elif vp[BLUE] < vp[RED]:
            outcome_blue = 0.0
        else:
            outcome_blue = 0.5
        reason = state.terminal
    if writer:
        writer.terminal(reason, state_hash(state), state.score)
        writer.close()
    return GameResult(
        scenario_name=scenario.name,
        seed=seed,
        blue_name=agents[BLUE].name,
        red_name=agents[RED].name,
        score=state.score,
        vp=vp,
        outcome_blue=outcome_blue,
        tick_count=state.tick,
        replay_path=str(replay_path) if replay_path else None,
        margin=vp[BLUE] - vp[RED],
        earliest_death_tick=deaths,
        forfeited_by=forfeited_by,
        decisions=decisions,
    )


# ---------------------------------------------------------------------------
# Tournaments


@dataclass
class ResultMatrix:
    agents: list  # labels, ranked agents only
    win: np.ndarray  # win[i][j]: mean outcome of i against j, 0.5 diagonal
    games: list
    hof_games: list = field(default_factory=list)

    def __post_init__(self):
        self.win = np.asarray(self.win, dtype=float)


def round_robin(
    agent_configs,
    scenarios,
    n_seeds: int,
    hall_of_fame=None,
    *,
    budget: SearchBudget = DEFAULT_BUDGET,
    fog: bool = True,
    base_seed: int = 0,
) -> ResultMatrix:
    """All ordered pairs play n_seeds games per scenario per side assignment.

    Hall-of-fame members participate as opponents only; they are excluded
    from the returned ranking rows and columns.
    """
    if len(agent_configs) < 2:
        raise ValueError("round robin needs at least two agents")
    if isinstance(scenarios, ScenarioDoc):
        scenarios = [scenarios]
    n = len(agent_configs)
    totals = np.zeros((n, n))
    counts = np.zeros((n, n))
    games = []
    for i, blue_cfg in enumerate(agent_configs):
        for j, red_cfg in enumerate(agent_configs):
            if i == j:
                continue
            for s_idx, scenario in enumerate(scenarios):
                for k in range(n_seeds):
                    seed = derive(base_seed, i, j, s_idx, k)
                    result = run_match(scenario, blue_cfg, red_cfg, seed, fog=fog, budget=budget)
                    games.append(result)
                    totals[i][j] += result.outcome_blue
                    counts[i][j] += 1
                    totals[j][i] += 1.0 - result.outcome_blue
                    counts[j][i] += 1
    win = np.full((n, n), 0.5)
    mask = counts > 0
    win[mask] = totals[mask] / counts[mask]
    hof_games = []
    if hall_of_fame:
        for i, cfg in enumerate(agent_configs):
            for h_idx, hof_cfg in enumerate(hall_of_fame):
                for s_idx, scenario in enumerate(scenarios):
                    for k in range(n_seeds):
                        seed = derive(base_seed, 0xF0F, i, h_idx, s_idx, k)
                        hof_games.append(
                            run_match(scenario, cfg, hof_cfg, seed, fog=fog, budget=budget)
                        )
    return ResultMatrix(
        agents=[c.label() if isinstance(c, AgentConfig) else c.name for c in agent_configs],
        win=win,
        games=games,
        hof_games=hof_games,
    )


# ---------------------------------------------------------------------------
# Nash averaging


class NashConvergenceError(RuntimeError):
    def __init__(self, exploitability: float, iterations: int):
        super().__init__(
            f"no equilibrium within {iterations} iterations "
            f"(achieved exploitability {exploitability:.3g})"
        )
        self.exploitability = exploitability
        self.iterations = iterations


@dataclass
class NashRating:
    probabilities: np.ndarray  # maxent Nash of the win matrix game
    skill: np.ndarray  # payoff of each agent against the Nash mixture
    exploitability: float
    iterations: int


def _maxent_nash(payoff: np.ndarray, tol: float, max_iterations: int):
    """Maximum-entropy optimal mixture of a symmetric zero-sum game.

    Solves max entropy(p) s.t. A p <= 0 over the simplex through its smooth
    dual (accelerated projected gradient on the multipliers): p is always
    softmax(A @ lam), a form of entropy-regularized fictitious play where
    lam accumulates weighted best-response directions.
    """
    a = np.asarray(payoff, dtype=float)
    n = a.shape[0]
    if n == 1:
        return np.ones(1), 0.0, 0

    def primal(lam):
        z = a @ lam
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    norm = np.linalg.norm(a, 2)
    lr = 1.0 / (norm * norm) if norm > 0 else 1.0
    lam = np.zeros(n)
    momentum = np.zeros(n)
    t_prev = 1.0
    best_expl = math.inf
    for it in range(1, max_iterations + 1):
        p = primal(momentum)
        grad = a @ p  # positive entries are profitable deviations
        expl = float(grad.max())
        best_expl = min(best_expl, max(expl, 0.0))
        if expl <= tol:
            return p, max(expl, 0.0), it
        new_lam = np.maximum(0.0, momentum + lr * grad)
        t = (1.0 + math.sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0
        momentum = new_lam + ((t_prev - 1.0) / t) * (new_lam - lam)
        momentum = np.maximum(0.0, momentum)
        lam, t_prev = new_lam, t
    raise NashConvergenceError(best_expl, max_iterations)


def nash_average(matrix, tol: float = 1e-6, max_iterations: int = 100000) -> NashRating:
    """Rate agents by the maxent Nash of their win matrix.

    The win matrix is shifted to the antisymmetric payoff A = W - 1/2; skill
    is each agent's payoff against the equilibrium mixture, so duplicated
    agents split weight without distorting anyone else's rating.
    """
    win = matrix.win if isinstance(matrix, ResultMatrix) else np.asarray(matrix, dtype=float)
    if win.ndim != 2 or win.shape[0] != win.shape[1]:
        raise ValueError("win matrix must be square")
    a = win - 0.5
    if not np.allclose(a + a.T, 0.0, atol=1e-9):
        raise ValueError("win matrix violates W[i][j] + W[j][i] = 1")
    p, exploitability, iterations = _maxent_nash(a, tol, max_iterations)
    return NashRating(
        probabilities=p,
        skill=a @ p,
        exploitability=exploitability,
        iterations=iterations,
    )


def write_tournament_report(matrix: ResultMatrix, rating: NashRating, path) -> None:
    """Tab-separated report: one row per agent."""
    games_per_agent = [0] * len(matrix.agents)
    mean_outcome = [0.0] * len(matrix.agents)
    name_to_idx = {name: i for i, name in enumerate(matrix.agents)}
    for g in matrix.games:
        for name, outcome in ((g.blue_name, g.outcome_blue), (g.red_name, 1 - g.outcome_blue)):
            i = name_to_idx.get(name)
            if i is not None:
                games_per_agent[i] += 1
                mean_outcome[i] += outcome
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name\tgames\tmeanOutcome\tnashWeight\tskill\n")
        for i, name in enumerate(matrix.agents):
            mean = mean_outcome[i] / games_per_agent[i] if games_per_agent[i] else 0.5
            fh.write(
                f"{name}\t{games_per_agent[i]}\t{mean:.4f}"
                f"\t{rating.probabilities[i]:.6f}\t{rating.skill[i]:.6f}\n"
            )


# ---------------------------------------------------------------------------
# Pareto front


def pareto_front(points, *, return_indices: bool = False):
    """Exactly the non-dominated subset under maximize-all orientation.

    x dominates y when x >= y on every coordinate and x > y on at least one.
    Exact duplicates are retained once.
    """
    pts = [tuple(p) for p in points]
    if not pts:
        return []
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise ValueError("all points must share one dimensionality")
    seen: dict = {}
    for idx, p in enumerate(pts):
        if p not in seen:
            seen[p] = idx
    unique = list(seen.items())
    arr = np.array([p for p, _ in unique], dtype=float)
    keep = []
    for i in range(len(unique)):
        ge = (arr >= arr[i]).all(axis=1)
        gt = (arr > arr[i]).any(axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    if return_indices:
        return [unique[i][1] for i in keep]
    return [unique[i][0] for i in keep]


# ---------------------------------------------------------------------------
# MAP-Elites over agent parameters


@dataclass(frozen=True)
class ParamRange:
    name: str
    lo: float
    hi: float
    integer: bool = False

    def clamp(self, x: float):
        x = min(self.hi, max(self.lo, x))
        return int(round(x)) if self.integer else x


@dataclass(frozen=True)
class Elite:
    params: tuple
    fitness: float
    descriptor: tuple


@dataclass
class MapElitesArchive:
    bins: int
    cells: dict = field(default_factory=dict)  # (i, j) -> Elite
    insertions: list = field(default_factory=list)  # (cell, fitness) log

    def cell_of(self, descriptor) -> tuple:
        return tuple(
            min(self.bins - 1, max(0, int(d * self.bins))) for d in descriptor
        )

    def admit(self, params, fitness: float, descriptor) -> bool:
        cell = self.cell_of(descriptor)
        incumbent = self.cells.get(cell)
        if incumbent is None or fitness > incumbent.fitness:
            self.cells[cell] = Elite(tuple(params), fitness, tuple(descriptor))
            self.insertions.append((cell, fitness))
            return True
        return False

    def coverage(self) -> float:
        return len(self.cells) / (self.bins * self.bins)


def _initial_strength(scenario: ScenarioDoc, side: int) -> int:
    return sum(f.strength for f in scenario.forces if f.side == side)


def behavior_descriptor(result: GameResult, scenario: ScenarioDoc, side: int = BLUE) -> tuple:
    """(casualties suffered fraction, movement expended normalized), both in [0, 1]."""
    initial = _initial_strength(scenario, side)
    suffered = result.score.suffered(side)
    casualties = min(1.0, suffered / initial) if initial else 0.0
    mp_rate_total = sum(
        scenario.unit_types[f.type_name].mp_per_tick
        for f in scenario.forces
        if f.side == side
    )
    ceiling = scenario.max_ticks * mp_rate_total
    movement = min(1.0, result.score.mp_spent[side] / ceiling) if ceiling else 0.0
    return (casualties, movement)


def _config_with_params(base: AgentConfig, space, values) -> AgentConfig:
    updates: dict = {}
    weights = list(base.weights)
    for dim, value in zip(space, values):
        value = dim.clamp(value)
        if dim.name in ("w1", "w2", "w3", "w4"):
            weights[int(dim.name[1]) - 1] = value
        else:
            updates[dim.name] = value
    updates["weights"] = tuple(weights)
    return replace(base, **updates)


def map_elites_run(
    base_agent_kind: str,
    param_space,
    scenario: ScenarioDoc,
    iterations: int,
    seed: int,
    *,
    opponent: AgentConfig | None = None,
    bins: int = 5,
    eval_seeds: int = 5,
    budget: SearchBudget = DEFAULT_BUDGET,
    fog: bool = True,
    sigma_fraction: float = 0.1,
) -> MapElitesArchive:
    """Quality-diversity search over agent parameters.

    Each iteration mutates a random occupied elite (Gaussian, sigma = 10% of
    each range) or draws fresh random parameters while the archive is empty,
    evaluates mean outcome over `eval_seeds` fixed-seed games against a fixed
    scripted opponent, computes the behaviour descriptor from those games,
    and admits the candidate if it beats the cell incumbent.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    space = list(param_space)
    base = AgentConfig(kind=base_agent_kind)
    fixed_opponent = opponent or AgentConfig(
        kind="scripted", script=int(ScriptId.ATTACK_NEAREST), name="fixed-opponent"
    )
    archive = MapElitesArchive(bins=bins)
    stream = Stream(derive(seed, 0xE117E5))

    def random_params():
        return tuple(
            dim.clamp(dim.lo + stream.uniform() * (dim.hi - dim.lo)) for dim in space
        )

    def mutate(params):
        out = []
        for dim, value in zip(space, params):
            sigma = sigma_fraction * (dim.hi - dim.lo)
            out.append(dim.clamp(value + stream.normal(0.0, sigma)))
        return tuple(out)

    def evaluate(params):
        config = _config_with_params(base, space, params)
        total = 0.0
        desc = np.zeros(2)
        for k in range(eval_seeds):
            result = run_match(
                scenario, config, fixed_opponent, derive(seed, 0x9A3E, k),
                fog=fog, budget=budget,
            )
            total += result.outcome_blue
            desc += np.array(behavior_descriptor(result, scenario, BLUE))
        return total / eval_seeds, tuple(desc / eval_seeds)

    for _ in range(iterations):
        if archive.cells:
            occupied = sorted(archive.cells)
            elite = archive.cells[occupied[stream.randrange(len(occupied))]]
            params = mutate(elite.params)
        else:
            params = random_params()
        fitness, descriptor = evaluate(params)
        archive.admit(params, fitness, descriptor)
    return archive
