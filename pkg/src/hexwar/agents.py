"""Statistical forward planning agents.

Every agent runs against a budget-instrumented forward model: each engine
step or state copy consumes one forward call and the model hard-stops the
search when the budget runs out, so compliance holds by construction. All
agents are deterministic given (state, budget, config, seed) and never
mutate the root state they are handed.

Global actions in search are script-abstracted: a candidate is the concrete
order set produced by assigning one portfolio script per unit, which keeps
branching factors small regardless of the raw order space.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

from .board import hex_distance
from .engine import (
    BLUE,
    RED,
    GameState,
    OrderError,
    _validate_order,
    legal_orders,
    scalar_vp,
    step as engine_step,
)
from .observation import FOG, Observation, observe
from .rng import Stream, derive, mix_seed
from .scripts import (
    ALL_SCRIPTS,
    DEFAULT_PARAMS,
    ScriptId,
    ScriptParams,
    evaluate_script,
)
from .engine import order_summary

DEFAULT_WEIGHTS = (1.0, 0.5, 0.1, 0.2)


class BudgetExhausted(RuntimeError):
    """The forward-call or wall-clock budget ran out."""


@dataclass(frozen=True)
class SearchBudget:
    max_forward_calls: int
    max_millis: float | None = None

    def __post_init__(self):
        if self.max_forward_calls < 1:
            raise ValueError("budget must allow at least one forward call")


class ForwardModel:
    """Budget gate for engine access; one step or copy equals one call."""

    __slots__ = ("calls", "max_calls", "deadline")

    def __init__(self, budget: SearchBudget):
        self.calls = 0
        self.max_calls = budget.max_forward_calls
        self.deadline = (
            time.monotonic() + budget.max_millis / 1000.0
            if budget.max_millis is not None
            else None
        )

    def charge(self, n: int = 1) -> None:
        if self.calls + n > self.max_calls:
            raise BudgetExhausted("forward-call budget exhausted")
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise BudgetExhausted("wall-clock budget exhausted")
        self.calls += n

    def copy(self, state: GameState) -> GameState:
        self.charge()
        return state.copy(with_chance_log=False)

    def step(self, state: GameState) -> GameState:
        self.charge()
        return engine_step(state)

    def remaining(self) -> int:
        return self.max_calls - self.calls


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    visits: int


@dataclass
class DecisionRecord:
    """Instrumentation for one decision: what was considered, what was chosen."""

    tick: int
    side: int
    agent_name: str
    candidates: tuple  # (action summary, visits, mean value)
    chosen_index: int
    forward_calls: int


@dataclass(frozen=True)
class AgentConfig:
    """Configuration for any agent kind; unrelated fields are ignored."""

    kind: str = "random"
    # value function
    weights: tuple = DEFAULT_WEIGHTS
    # search shape
    exploration_c: float = math.sqrt(2.0)
    pw_c: float = 2.0
    pw_alpha: float = 0.5
    tree_plies: int = 4
    rollout_cycles: int = 2
    # evolution
    horizon: int = 5
    population: int = 10
    elitism: int = 1
    crossover_p: float = 0.5
    mutation_p: float = 0.3
    # bandits
    epsilon: float = 0.4
    # scripts
    scripts: tuple = ALL_SCRIPTS
    script: int = int(ScriptId.ATTACK_NEAREST)
    aggression: float = 1.0
    scout_radius: int = 2
    # mpc
    inner: str = "rhea"
    name: str = ""

    def label(self) -> str:
        return self.name or self.kind

    def script_params(self) -> ScriptParams:
        return ScriptParams(aggression=self.aggression, scout_radius=self.scout_radius)


AGENT_KINDS = (
    "random",
    "scripted",
    "mcts",
    "ismcts",
    "rhea",
    "cmab",
    "sss",
    "twoStage",
    "mpc",
)
_KIND_ALIASES = {k.lower(): k for k in AGENT_KINDS}


def normalize_kind(kind: str) -> str:
    k = _KIND_ALIASES.get(kind.lower().replace("-", "").replace("_", ""))
    if k is None:
        raise ValueError(f"unknown agent kind {kind!r} (choose from {', '.join(AGENT_KINDS)})")
    return k


# ---------------------------------------------------------------------------
# Value estimation


def _map_diameter(state: GameState) -> int:
    w, h = state.map.width, state.map.height
    corners = ((0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1))
    return max(
        hex_distance(a, b) for i, a in enumerate(corners) for b in corners[i + 1:]
    )


def heuristic_value(state: GameState, side: int, weights=DEFAULT_WEIGHTS) -> float:
    """Shaped state value: VP margin, strength edge, spotting, objective pull."""
    w1, w2, w3, w4 = weights
    opp = 1 - side
    value = w1 * (scalar_vp(state, side) - scalar_vp(state, opp))
    if w2:
        known_enemy = sum(rec[3] for rec in state.contacts[side].values())
        value += w2 * (state.side_strength(side) - known_enemy)
    if w3:
        roster = sum(1 for f in state.scenario.forces if f.side == opp)
        if roster:
            value += w3 * (len(state.contacts[side]) / roster)
    if w4:
        own_objs = [(q, r) for s, q, r, _w in state.scenario.objective_rows if s == side]
        own_units = [u for u in state.units.values() if u.side == side]
        if own_objs and own_units:
            mean_dist = sum(
                min(hex_distance((u.q, u.r), h) for h in own_objs) for u in own_units
            ) / len(own_units)
            value += w4 * (-mean_dist / _map_diameter(state))
    return value


def leaf_value(state: GameState, side: int, weights=DEFAULT_WEIGHTS) -> float:
    """Terminal states score +-w1 (draw 0); live states fall back to the heuristic."""
    if state.terminal is not None:
        own, opp = scalar_vp(state, side), scalar_vp(state, 1 - side)
        if own > opp:
            return weights[0]
        if own < opp:
            return -weights[0]
        return 0.0
    return heuristic_value(state, side, weights)


def apply_orders_lenient(state: GameState, side: int, orders: dict) -> None:
    """Search-side order application: anything invalid degrades to Hold."""
    units = state.units
    for uid, order in orders.items():
        unit = units.get(uid)
        if unit is None or unit.side != side:
            continue
        try:
            unit.order = _validate_order(state, side, uid, order)
        except OrderError:
            unit.order = ("hold",)


def random_script_policy(scripts=ALL_SCRIPTS, params: ScriptParams = DEFAULT_PARAMS):
    """Rollout default: an independent uniform script per unit per call."""

    def policy(obs: Observation, stream: Stream) -> dict:
        return {
            u.unit_id: evaluate_script(scripts[stream.randrange(len(scripts))], params, obs, u.unit_id)
            for u in obs.own_units
        }

    return policy


def _advance_cycle(model: ForwardModel, state: GameState) -> None:
    cadence = state.scenario.ticks_per_command
    while state.terminal is None:
        model.step(state)
        if state.tick % cadence == 0:
            break


def rollout_value(
    state: GameState,
    side: int,
    rollout_policy=None,
    depth_cycles: int = 2,
    seed: int = 0,
    model: ForwardModel | None = None,
    weights=DEFAULT_WEIGHTS,
    copy_root: bool = True,
) -> float:
    """Advance a copy `depth_cycles` command cycles under the rollout policy
    (both sides) with fresh chance seeded from `seed`, then value the leaf."""
    if depth_cycles < 0:
        raise ValueError("rollout depth must be >= 0")
    if model is None:
        model = ForwardModel(SearchBudget(1 << 62))
    policy = rollout_policy or random_script_policy()
    work = model.copy(state) if copy_root else state
    work.rng = mix_seed(seed)
    stream = Stream(derive(seed, 0x9E11))
    for _ in range(depth_cycles):
        if work.terminal is not None:
            break
        for s in (BLUE, RED):
            obs = observe(work, s, FOG)
            apply_orders_lenient(work, s, policy(obs, stream))
        _advance_cycle(model, work)
    return leaf_value(work, side, weights)


# ---------------------------------------------------------------------------
# Candidate global actions (script-abstracted arms)


def _own_unit_ids(state: GameState, side: int) -> list:
    return [uid for uid, u in state.units.items() if u.side == side]


def arm_orders(state: GameState, side: int, assignment, params: ScriptParams) -> dict:
    """Evaluate a script-per-unit assignment at a state into concrete orders."""
    obs = observe(state, side, FOG)
    out = {}
    for uid, sid in assignment:
        if obs.unit(uid) is not None:
            out[uid] = evaluate_script(sid, params, obs, uid)
    return out


def _arm_key(orders: dict) -> tuple:
    return tuple(sorted(orders.items()))


def portfolio_assignments(unit_ids) -> list:
    """The two all-units portfolio points every search seeds with."""
    return [
        tuple((uid, ScriptId.ATTACK_NEAREST) for uid in unit_ids),
        tuple((uid, ScriptId.ADVANCE_TO_OBJECTIVE) for uid in unit_ids),
    ]


# ---------------------------------------------------------------------------
# UCT tree search over a pluggable game adapter


class _Edge:
    __slots__ = ("key", "action", "visits", "total", "child")

    def __init__(self, key, action):
        self.key = key
        self.action = action
        self.visits = 0
        self.total = 0.0
        self.child = None

    def mean(self) -> float:
        return self.total / self.visits if self.visits else 0.0


class _Node:
    __slots__ = ("visits", "edges", "keys")

    def __init__(self):
        self.visits = 0
        self.edges = []
        self.keys = set()


def _select_ucb(node: _Node, c: float, maximize: bool) -> _Edge:
    log_n = math.log(node.visits) if node.visits > 0 else 0.0
    best = None
    best_u = -math.inf
    for e in node.edges:
        if e.visits == 0:
            return e
        mean = e.total / e.visits
        q = mean if maximize else -mean
        u = q + c * math.sqrt(log_n / e.visits)
        if u > best_u:
            best_u = u
            best = e
    return best


def _uct_iteration(game, root_node: _Node, iteration: int, config: AgentConfig, stream: Stream):
    """One selection/expansion/evaluation/backup pass; returns the value."""
    sim = game.sample_root(iteration)
    node = root_node
    depth = 0
    path = []
    value = None
    while True:
        if game.is_terminal(sim) or depth >= game.depth_limit():
            value = game.leaf_value(sim, depth)
            break
        cap = max(1, math.ceil(config.pw_c * (node.visits ** config.pw_alpha)))
        edge = None
        fresh = False
        if len(node.edges) < cap:
            arm = game.new_arm(sim, depth, node.keys, stream)
            if arm is not None:
                key, action = arm
                edge = _Edge(key, action)
                node.edges.append(edge)
                node.keys.add(key)
                fresh = True
        if edge is None:
            if not node.edges:
                value = game.leaf_value(sim, depth)
                break
            edge = _select_ucb(node, config.exploration_c, game.node_maximizes(depth))
            fresh = edge.visits == 0
        sim = game.apply(sim, depth, edge.action)
        path.append((node, edge))
        if edge.child is None:
            edge.child = _Node()
        node = edge.child
        depth += 1
        if fresh:
            if game.is_terminal(sim) or depth >= game.depth_limit():
                value = game.leaf_value(sim, depth)
            else:
                value = game.playout(sim, depth, iteration)
            break
    for n, e in path:
        n.visits += 1
        e.visits += 1
        e.total += value
    if not path:
        root_node.visits += 1
    return value


class _WargameTree:
    """Adapter: alternating command-phase decisions, script-abstracted arms,
    fresh chance per iteration (open-loop averaging over stochasticity)."""

    _ARM_ATTEMPTS = 10

    def __init__(self, root, side, model, config, seed, determinize=None):
        self.root = root
        self.side = side
        self.model = model
        self.config = config
        self.seed = seed
        self.determinize = determinize
        self.params = config.script_params()
        self.rollout_policy = random_script_policy(config.scripts, self.params)

    def sample_root(self, iteration):
        if self.determinize is not None:
            sim = self.determinize(iteration)
        else:
            sim = self.model.copy(self.root)
        sim.rng = mix_seed(derive(self.seed, 0xC4A7, iteration))
        return sim

    def is_terminal(self, sim):
        return sim.terminal is not None

    def depth_limit(self):
        return self.config.tree_plies

    def node_maximizes(self, depth):
        return depth % 2 == 0

    def _ply_side(self, depth):
        return self.side if depth % 2 == 0 else 1 - self.side

    def new_arm(self, sim, depth, existing, stream):
        side = self._ply_side(depth)
        unit_ids = _own_unit_ids(sim, side)
        if not unit_ids:
            return None if () in existing else ((), {})
        candidates = portfolio_assignments(unit_ids)
        scripts = self.config.scripts
        for _ in range(self._ARM_ATTEMPTS):
            for assignment in candidates:
                orders = arm_orders(sim, side, assignment, self.params)
                key = _arm_key(orders)
                if key not in existing:
                    return key, orders
            candidates = [
                tuple((uid, scripts[stream.randrange(len(scripts))]) for uid in unit_ids)
            ]
        return None

    def apply(self, sim, depth, action):
        apply_orders_lenient(sim, self._ply_side(depth), action)
        if depth % 2 == 1:
            _advance_cycle(self.model, sim)
        return sim

    def leaf_value(self, sim, _depth):
        return leaf_value(sim, self.side, self.config.weights)

    def playout(self, sim, depth, iteration):
        cycles = self.config.rollout_cycles
        stream = Stream(derive(self.seed, 0x9077, iteration))
        if sim.terminal is None and depth % 2 == 1:
            # mid-phase: the opponent still owes orders for this cycle
            side = self._ply_side(depth)
            apply_orders_lenient(sim, side, self.rollout_policy(observe(sim, side, FOG), stream))
            _advance_cycle(self.model, sim)
        for _ in range(cycles):
            if sim.terminal is not None:
                break
            for s in (BLUE, RED):
                apply_orders_lenient(sim, s, self.rollout_policy(observe(sim, s, FOG), stream))
            _advance_cycle(self.model, sim)
        return leaf_value(sim, self.side, self.config.weights)


def _require_command_phase(state: GameState):
    if state.terminal is not None:
        raise OrderError("cannot decide in a terminal state")
    if state.tick % state.scenario.ticks_per_command != 0:
        raise OrderError(f"decisions happen at command phases only (tick {state.tick})")


def _uct_decide(game, root_for_record, side, budget, config, seed, agent_name):
    model = game.model
    root_node = _Node()
    stream = Stream(derive(seed, 0x07EE))
    iterations = 0
    try:
        while True:
            _uct_iteration(game, root_node, iterations, config, stream)
            iterations += 1
    except BudgetExhausted:
        pass
    if iterations == 0 or not root_node.edges:
        raise BudgetExhausted("budget exhausted before one search iteration")
    edges = sorted(root_node.edges, key=lambda e: (-e.visits, -e.mean()))
    best = edges[0]
    candidates = tuple(
        (order_summary(e.action), e.visits, e.mean()) for e in edges[:32]
    )
    record = DecisionRecord(
        tick=root_for_record.tick,
        side=side,
        agent_name=agent_name,
        candidates=candidates,
        chosen_index=0,
        forward_calls=model.calls,
    )
    return dict(best.action), record


def mcts_decide(root: GameState, side: int, budget: SearchBudget, config: AgentConfig, seed: int = 0):
    """UCT over alternating command-phase decisions; returns the most-visited
    root action and the full root statistics."""
    _require_command_phase(root)
    model = ForwardModel(budget)
    game = _WargameTree(root, side, model, config, seed)
    return _uct_decide(game, root, side, budget, config, seed, config.label() or "mcts")


def ismcts_decide(
    observation: Observation,
    particles,
    state: GameState,
    budget: SearchBudget,
    config: AgentConfig,
    seed: int = 0,
):
    """Information-set MCTS: one shared tree, a fresh determinization of the
    hidden enemy force drawn from the particle set on every iteration."""
    from .belief import sample_determinization

    _require_command_phase(state)
    if particles is None or len(particles) == 0:
        raise ValueError("ismcts needs a non-empty particle set")
    side = observation.side
    model = ForwardModel(budget)

    def determinize(iteration):
        model.charge()  # the injection copies the state
        sim = sample_determinization(particles, state, derive(seed, 0xD37, iteration))
        return sim

    game = _WargameTree(state, side, model, config, seed, determinize=determinize)
    return _uct_decide(game, state, side, budget, config, seed, config.label() or "ismcts")


# ---------------------------------------------------------------------------
# Shared one-phase evaluation: apply a concrete first order set, give the
# opponent rollout orders, then play both sides randomly to the horizon.


def evaluate_first_orders(model, root, side, orders, cycles, seed, config):
    sim = model.copy(root)
    sim.rng = mix_seed(seed)
    stream = Stream(derive(seed, 0x1EAF))
    policy = random_script_policy(config.scripts, config.script_params())
    apply_orders_lenient(sim, side, orders)
    opp = 1 - side
    apply_orders_lenient(sim, opp, policy(observe(sim, opp, FOG), stream))
    _advance_cycle(model, sim)
    for _ in range(max(0, cycles - 1)):
        if sim.terminal is not None:
            break
        for s in (BLUE, RED):
            apply_orders_lenient(sim, s, policy(observe(sim, s, FOG), stream))
        _advance_cycle(model, sim)
    return leaf_value(sim, side, config.weights)


# ---------------------------------------------------------------------------
# Rolling horizon evolution


def _rhea_evaluate(model, root, side, unit_ids, genome, config, eval_seed):
    n_units = len(unit_ids)
    sim = model.copy(root)
    sim.rng = mix_seed(eval_seed)
    stream = Stream(derive(eval_seed, 0x0FF))
    policy = random_script_policy(config.scripts, config.script_params())
    params = config.script_params()
    opp = 1 - side
    for cycle in range(config.horizon):
        if sim.terminal is not None:
            break
        gene = genome[cycle * n_units:(cycle + 1) * n_units]
        obs = observe(sim, side, FOG)
        own_orders = {}
        for uid, script in zip(unit_ids, gene):
            if obs.unit(uid) is not None:
                own_orders[uid] = evaluate_script(script, params, obs, uid)
        apply_orders_lenient(sim, side, own_orders)
        apply_orders_lenient(sim, opp, policy(observe(sim, opp, FOG), stream))
        _advance_cycle(model, sim)
    return leaf_value(sim, side, config.weights)


def _genome_first_orders(root, side, unit_ids, genome, config):
    obs = observe(root, side, FOG)
    params = config.script_params()
    out = {}
    for uid, script in zip(unit_ids, genome[: len(unit_ids)]):
        if obs.unit(uid) is not None:
            out[uid] = evaluate_script(script, params, obs, uid)
    return out


def rhea_decide(
    root: GameState,
    side: int,
    budget: SearchBudget,
    config: AgentConfig,
    seed: int = 0,
    carry=None,
):
    """Rolling-horizon evolution over per-unit script sequences.

    Genomes are horizon x units script assignments. Elitism carries the best
    genome (and its fitness) between generations; the previous decision's
    best genome, shifted one cycle, seeds the next call when `carry` is the
    value returned from it.

    Returns (orders, record, carry).
    """
    _require_command_phase(root)
    unit_ids = _own_unit_ids(root, side)
    model = ForwardModel(budget)
    n_units = len(unit_ids)
    length = config.horizon * n_units
    scripts = config.scripts
    stream = Stream(derive(seed, 0x4EA))

    def random_genome():
        return tuple(scripts[stream.randrange(len(scripts))] for _ in range(length))

    population = []
    if carry is not None and carry[0] == tuple(unit_ids) and len(carry[1]) == length and n_units:
        shifted = carry[1][n_units:] + tuple(
            scripts[stream.randrange(len(scripts))] for _ in range(n_units)
        )
        population.append(shifted)
    while len(population) < config.population:
        population.append(random_genome())

    fitness: list = []
    evaluated = 0
    try:
        for i, genome in enumerate(population):
            fitness.append(
                _rhea_evaluate(model, root, side, unit_ids, genome, config, derive(seed, 0, i))
            )
            evaluated += 1
    except BudgetExhausted:
        if evaluated < len(population):
            raise BudgetExhausted("budget below one full generation") from None
    generation = 0
    try:
        while True:
            generation += 1
            ranked = sorted(range(len(population)), key=lambda i: -fitness[i])
            elite_idx = ranked[: config.elitism]
            new_pop = [population[i] for i in elite_idx]
            new_fit = [fitness[i] for i in elite_idx]
            while len(new_pop) < config.population:
                # binary tournaments for both parents
                a, b = stream.randrange(len(population)), stream.randrange(len(population))
                p1 = population[a] if fitness[a] >= fitness[b] else population[b]
                a, b = stream.randrange(len(population)), stream.randrange(len(population))
                p2 = population[a] if fitness[a] >= fitness[b] else population[b]
                child = tuple(
                    (g1 if stream.uniform() < config.crossover_p else g2)
                    for g1, g2 in zip(p1, p2)
                )
                child = tuple(
                    (scripts[stream.randrange(len(scripts))] if stream.uniform() < config.mutation_p else g)
                    for g in child
                )
                value = _rhea_evaluate(
                    model, root, side, unit_ids, child, config,
                    derive(seed, generation, len(new_pop)),
                )
                new_pop.append(child)
                new_fit.append(value)
            population, fitness = new_pop, new_fit
    except BudgetExhausted:
        pass

    order = sorted(range(len(fitness)), key=lambda i: -fitness[i])
    best = population[order[0]]
    orders = _genome_first_orders(root, side, unit_ids, best, config)
    candidates = tuple(
        (order_summary(_genome_first_orders(root, side, unit_ids, population[i], config)), 1, fitness[i])
        for i in order[:16]
    )
    record = DecisionRecord(
        tick=root.tick,
        side=side,
        agent_name=config.label() or "rhea",
        candidates=candidates,
        chosen_index=0,
        forward_calls=model.calls,
    )
    return orders, record, (tuple(unit_ids), best)


def mpc_decide(root, side, budget, config, seed=0, carry=None):
    """Model-predictive wrapper: plan `horizon` cycles with the inner
    optimizer (default rhea with L = H), commit only the first order set."""
    inner = normalize_kind(config.inner)
    if inner == "rhea":
        return rhea_decide(root, side, budget, config, seed, carry)
    raise ValueError(f"unsupported mpc inner optimizer {config.inner!r}")


# ---------------------------------------------------------------------------
# Combinatorial multi-armed bandit (naive sampling)


def naive_sampling_search(slot_sizes, evaluate, budget_evals, epsilon, stream):
    """Generic naive-sampling CMAB over a factored discrete arm space.

    Each slot keeps its own epsilon-greedy statistics under the naive
    independence assumption; joint arms are either re-sampled slot-by-slot
    (explore) or the incumbent best global arm (exploit). `evaluate` may
    raise BudgetExhausted to stop early.

    Returns (best joint arm, joint stats dict, per-slot stats, evaluations).
    """
    if budget_evals < 1:
        raise BudgetExhausted("budget below one evaluation")
    slot_stats = [[[0, 0.0] for _ in range(k)] for k in slot_sizes]
    joint_stats: dict = {}

    def slot_pick(stats):
        if stream.uniform() < epsilon:
            return stream.randrange(len(stats))
        best_i = 0
        best_key = (-math.inf,)
        for i, (n, mean) in enumerate(stats):
            key = (math.inf,) if n == 0 else (mean,)
            if key > best_key:
                best_key = key
                best_i = i
        return best_i

    def best_joint():
        return max(joint_stats, key=lambda j: (joint_stats[j][1], joint_stats[j][0], j))

    evals = 0
    while evals < budget_evals:
        if not joint_stats or stream.uniform() < epsilon:
            joint = tuple(slot_pick(stats) for stats in slot_stats)
        else:
            joint = best_joint()
        try:
            reward = evaluate(joint)
        except BudgetExhausted:
            break
        evals += 1
        for slot, arm in enumerate(joint):
            n, mean = slot_stats[slot][arm]
            slot_stats[slot][arm] = [n + 1, mean + (reward - mean) / (n + 1)]
        n, mean = joint_stats.get(joint, (0, 0.0))
        joint_stats[joint] = (n + 1, mean + (reward - mean) / (n + 1))
    if not joint_stats:
        raise BudgetExhausted("budget below one evaluation")
    return best_joint(), joint_stats, slot_stats, evals


def cmab_decide(root: GameState, side: int, budget: SearchBudget, config: AgentConfig, seed: int = 0):
    """Naive-sampling bandit at the root: one slot per unit, arms are scripts."""
    _require_command_phase(root)
    unit_ids = _own_unit_ids(root, side)
    model = ForwardModel(budget)
    scripts = config.scripts
    stream = Stream(derive(seed, 0xCAB))
    eval_index = [0]
    order_cache: dict = {}

    def joint_orders(joint):
        cached = order_cache.get(joint)
        if cached is None:
            assignment = tuple((uid, scripts[a]) for uid, a in zip(unit_ids, joint))
            cached = arm_orders(root, side, assignment, config.script_params())
            order_cache[joint] = cached
        return cached

    def evaluate(joint):
        i = eval_index[0]
        eval_index[0] += 1
        return evaluate_first_orders(
            model, root, side, joint_orders(joint), config.rollout_cycles,
            derive(seed, 0xE7A1, i), config,
        )

    best, joint_stats, _slots, _evals = naive_sampling_search(
        [len(scripts)] * len(unit_ids), evaluate, 1 << 62, config.epsilon, stream
    )
    ranked = sorted(joint_stats.items(), key=lambda kv: (-kv[1][1], -kv[1][0], kv[0]))
    candidates = tuple(
        (order_summary(joint_orders(j)), stats[0], stats[1]) for j, stats in ranked[:32]
    )
    record = DecisionRecord(
        tick=root.tick,
        side=side,
        agent_name=config.label() or "cmab",
        candidates=candidates,
        chosen_index=0,
        forward_calls=model.calls,
    )
    return dict(joint_orders(best)), record


# ---------------------------------------------------------------------------
# Stratified strategy selection


def unit_strata(state: GameState, side: int) -> dict:
    """unit_id -> (type, near/far objective band, strong/weak band)."""
    own_objs = [(q, r) for s, q, r, _w in state.scenario.objective_rows if s == side]
    out = {}
    for uid, u in state.units.items():
        if u.side != side:
            continue
        if own_objs:
            dist = min(hex_distance((u.q, u.r), h) for h in own_objs)
            dist_band = 0 if dist <= 3 else 1
        else:
            dist_band = 0
        strength_band = 0 if 2 * u.strength >= u.max_strength else 1
        out[uid] = (u.type_name, dist_band, strength_band)
    return out


def sss_decide(root: GameState, side: int, budget: SearchBudget, config: AgentConfig, seed: int = 0):
    """First-improvement hill climbing over script-per-stratum assignments
    with random restarts; all units in a stratum share one script."""
    _require_command_phase(root)
    model = ForwardModel(budget)
    strata = unit_strata(root, side)
    keys = sorted(set(strata.values()))
    scripts = config.scripts
    stream = Stream(derive(seed, 0x555))
    eval_seed = derive(seed, 0x5EED)
    params = config.script_params()

    def assignment_orders(assignment):
        obs = observe(root, side, FOG)
        out = {}
        for uid, stratum in strata.items():
            if obs.unit(uid) is not None:
                out[uid] = evaluate_script(assignment[stratum], params, obs, uid)
        return out

    cache: dict = {}

    def evaluate(assignment):
        key = tuple(assignment[k] for k in keys)
        if key in cache:
            return cache[key]
        value = evaluate_first_orders(
            model, root, side, assignment_orders(assignment),
            config.rollout_cycles, eval_seed, config,
        )
        cache[key] = value
        return value

    def random_assignment():
        return {k: scripts[stream.randrange(len(scripts))] for k in keys}

    best_assignment = None
    best_value = -math.inf
    space_size = len(scripts) ** len(keys)
    try:
        while True:
            current = random_assignment()
            value = evaluate(current)
            improved = True
            while improved:
                improved = False
                for k in keys:
                    for s in scripts:
                        if s == current[k]:
                            continue
                        cand = dict(current)
                        cand[k] = s
                        v = evaluate(cand)
                        if v > value:
                            current, value = cand, v
                            improved = True
                            break
                    if improved:
                        break
            if value > best_value:
                best_assignment, best_value = current, value
            if len(cache) >= space_size:
                break  # whole assignment space evaluated; restarts are pointless
    except BudgetExhausted:
        pass
    if best_assignment is None:
        raise BudgetExhausted("budget below one evaluation")
    ranked = sorted(cache.items(), key=lambda kv: -kv[1])
    candidates = tuple(
        (" ".join(f"{ScriptId(s).name}" for s in key), 1, v) for key, v in ranked[:16]
    )
    record = DecisionRecord(
        tick=root.tick,
        side=side,
        agent_name=config.label() or "sss",
        candidates=candidates,
        chosen_index=0,
        forward_calls=model.calls,
    )
    return assignment_orders(best_assignment), record


# ---------------------------------------------------------------------------
# Two-stage: stratified plan, then local refinement near contacts


def two_stage_decide(root: GameState, side: int, budget: SearchBudget, config: AgentConfig, seed: int = 0):
    """Stage 1: stratified search with half the budget. Stage 2: greedily
    re-enumerate legal orders for units within 3 hexes of a known contact,
    keeping changes that improve the evaluated value."""
    _require_command_phase(root)
    half = SearchBudget(max(1, budget.max_forward_calls // 2), budget.max_millis)
    orders, stage1_record = sss_decide(root, side, half, config, seed)
    model = ForwardModel(
        SearchBudget(max(1, budget.max_forward_calls - stage1_record.forward_calls), budget.max_millis)
    )
    contacts = state_contacts = root.contacts[side]
    refinable = []
    for uid, u in root.units.items():
        if u.side != side:
            continue
        for rec in state_contacts.values():
            if hex_distance((u.q, u.r), (rec[0], rec[1])) <= 3:
                refinable.append(uid)
                break
    eval_seed = derive(seed, 0x25E)
    current = dict(orders)

    def evaluate(action):
        return evaluate_first_orders(
            model, root, side, action, config.rollout_cycles, eval_seed, config
        )

    record_calls = stage1_record.forward_calls
    tried = []
    try:
        value = evaluate(current)
        improved = True
        while improved and refinable:
            improved = False
            for uid in refinable:
                for cand in legal_orders(root, uid):
                    if current.get(uid) == cand:
                        continue
                    trial = dict(current)
                    trial[uid] = cand
                    v = evaluate(trial)
                    tried.append((trial, v))
                    if v > value:
                        current, value = trial, v
                        improved = True
    except BudgetExhausted:
        pass
    record = DecisionRecord(
        tick=root.tick,
        side=side,
        agent_name=config.label() or "twoStage",
        candidates=stage1_record.candidates,
        chosen_index=0,
        forward_calls=record_calls + model.calls,
    )
    return current, record


# ---------------------------------------------------------------------------
# Baseline agents


def random_decide(root: GameState, side: int, budget: SearchBudget, seed: int = 0, name: str = "random"):
    """Uniform choice from each unit's legal order menu."""
    _require_command_phase(root)
    stream = Stream(derive(seed, 0xA11))
    orders = {}
    for uid in _own_unit_ids(root, side):
        orders[uid] = stream.choice(legal_orders(root, uid))
    record = DecisionRecord(
        tick=root.tick, side=side, agent_name=name,
        candidates=((order_summary(orders), 1, 0.0),),
        chosen_index=0, forward_calls=0,
    )
    return orders, record


def scripted_decide(root: GameState, side: int, config: AgentConfig, name: str = "scripted"):
    """One fixed script for every unit."""
    _require_command_phase(root)
    obs = observe(root, side, FOG)
    params = config.script_params()
    orders = {
        u.unit_id: evaluate_script(config.script, params, obs, u.unit_id)
        for u in obs.own_units
    }
    record = DecisionRecord(
        tick=root.tick, side=side, agent_name=name,
        candidates=((order_summary(orders), 1, 0.0),),
        chosen_index=0, forward_calls=0,
    )
    return orders, record


# ---------------------------------------------------------------------------
# Agent objects: per-match instances that may carry state between decisions


class Agent:
    """Base agent: stateless decision on a perfect-information root."""

    needs_belief = False

    def __init__(self, config: AgentConfig):
        self.config = config
        self.name = config.label()

    def decide(self, root: GameState, side: int, budget: SearchBudget, seed: int):
        raise NotImplementedError

    def reset(self):
        pass


class RandomAgent(Agent):
    def decide(self, root, side, budget, seed):
        return random_decide(root, side, budget, seed, self.name)


class ScriptedAgent(Agent):
    def decide(self, root, side, budget, seed):
        return scripted_decide(root, side, self.config, self.name)


class MctsAgent(Agent):
    def decide(self, root, side, budget, seed):
        return mcts_decide(root, side, budget, self.config, seed)


class CmabAgent(Agent):
    def decide(self, root, side, budget, seed):
        return cmab_decide(root, side, budget, self.config, seed)


class SssAgent(Agent):
    def decide(self, root, side, budget, seed):
        return sss_decide(root, side, budget, self.config, seed)


class TwoStageAgent(Agent):
    def decide(self, root, side, budget, seed):
        return two_stage_decide(root, side, budget, self.config, seed)


class RheaAgent(Agent):
    def __init__(self, config):
        super().__init__(config)
        self._carry = None

    def reset(self):
        self._carry = None

    def decide(self, root, side, budget, seed):
        orders, record, self._carry = rhea_decide(root, side, budget, self.config, seed, self._carry)
        return orders, record


class MpcAgent(RheaAgent):
    def decide(self, root, side, budget, seed):
        orders, record, self._carry = mpc_decide(root, side, budget, self.config, seed, self._carry)
        return orders, record


class IsmctsAgent(Agent):
    needs_belief = True

    def decide(self, root, side, budget, seed):
        # perfect-information fallback: a single-particle belief equal to truth
        from .belief import ParticleSet, Particle

        particles = ParticleSet((Particle((), 1.0),), side, root.tick, ())
        obs = observe(root, side, FOG)
        return ismcts_decide(obs, particles, root, budget, self.config, seed)

    def decide_belief(self, observation, particles, state, budget, seed):
        return ismcts_decide(observation, particles, state, budget, self.config, seed)


_AGENT_CLASSES = {
    "random": RandomAgent,
    "scripted": ScriptedAgent,
    "mcts": MctsAgent,
    "ismcts": IsmctsAgent,
    "rhea": RheaAgent,
    "cmab": CmabAgent,
    "sss": SssAgent,
    "twoStage": TwoStageAgent,
    "mpc": MpcAgent,
}


def make_agent(config: AgentConfig) -> Agent:
    kind = normalize_kind(config.kind)
    if kind == "mpc":
        config = replace(config, kind=kind, horizon=config.horizon)
    return _AGENT_CLASSES[kind](replace(config, kind=kind))
