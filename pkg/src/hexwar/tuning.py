"""N-tuple bandit evolutionary algorithm for noisy discrete optimisation.

The model keeps (count, mean) statistics for all 1-tuples, all 2-tuples,
and the single all-dimensions tuple of the configuration space (no
3-tuples; the tables stay small at desk scale). Candidates are scored by
the mean of their matching tuple means plus an exploration bonus, so
information generalises across configurations sharing parameter values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .agents import AgentConfig, SearchBudget
from .rng import Stream, derive


@dataclass(frozen=True)
class ParamSpace:
    """Ordered discrete dimensions: ((name, (value, ...)), ...)."""

    dims: tuple

    def __post_init__(self):
        if not self.dims:
            raise ValueError("parameter space needs at least one dimension")
        for name, values in self.dims:
            if not values:
                raise ValueError(f"dimension {name!r} has no values")

    @classmethod
    def of(cls, **dims) -> "ParamSpace":
        return cls(tuple((name, tuple(values)) for name, values in dims.items()))

    def size(self) -> int:
        out = 1
        for _, values in self.dims:
            out *= len(values)
        return out

    def names(self) -> tuple:
        return tuple(name for name, _ in self.dims)

    def decode(self, indices) -> dict:
        return {name: values[i] for (name, values), i in zip(self.dims, indices)}

    def random_point(self, stream: Stream) -> tuple:
        return tuple(stream.randrange(len(values)) for _, values in self.dims)


class NTupleModel:
    """Bandit statistics over parameter tuples."""

    def __init__(self, space: ParamSpace, use_pairs: bool = True, use_full: bool = True):
        self.space = space
        n = len(space.dims)
        tuples = [(i,) for i in range(n)]
        if use_pairs and n > 1:
            tuples.extend(combinations(range(n), 2))
        if use_full and n > 2:
            tuples.append(tuple(range(n)))
        self.tuples = tuple(tuples)
        self.stats = [dict() for _ in self.tuples]  # pattern -> [count, mean]
        self.total_evaluations = 0

    def update(self, point: tuple, fitness: float) -> None:
        self.total_evaluations += 1
        for t_idx, dims in enumerate(self.tuples):
            pattern = tuple(point[d] for d in dims)
            entry = self.stats[t_idx].get(pattern)
            if entry is None:
                self.stats[t_idx][pattern] = [1, fitness]
            else:
                entry[0] += 1
                entry[1] += (fitness - entry[1]) / entry[0]

    def estimate(self, point: tuple) -> float:
        total = 0.0
        seen = 0
        for t_idx, dims in enumerate(self.tuples):
            entry = self.stats[t_idx].get(tuple(point[d] for d in dims))
            if entry is not None:
                total += entry[1]
                seen += 1
        return total / seen if seen else 0.0

    def exploration(self, point: tuple) -> float:
        log_total = math.log(self.total_evaluations + 1)
        bonus = 0.0
        for t_idx, dims in enumerate(self.tuples):
            entry = self.stats[t_idx].get(tuple(point[d] for d in dims))
            count = entry[0] if entry is not None else 0
            bonus += math.sqrt(log_total / (count + 1))
        return bonus / len(self.tuples)

    def ucb(self, point: tuple, k: float) -> float:
        return self.estimate(point) + k * self.exploration(point)


@dataclass
class TuneResult:
    best_point: tuple
    best_config: dict
    model: NTupleModel
    evaluations: int
    log: list = field(default_factory=list)  # (index, point, fitness)


def ntbea_optimize(
    space: ParamSpace,
    fitness,
    budget: int,
    seed: int,
    *,
    neighbourhood: int = 50,
    k: float = 2.0,
    model: NTupleModel | None = None,
    log_path=None,
) -> TuneResult:
    """Optimise a noisy fitness over a discrete space within `budget` evaluations.

    Loop: evaluate the current point, update all matching tuple statistics,
    then move to the best of `neighbourhood` random single-dimension
    mutations by estimated mean + k * exploration. Returns the evaluated
    point with the best model-estimated mean.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    model = model or NTupleModel(space)
    stream = Stream(derive(seed, 0x47BEA))
    current = space.random_point(stream)
    evaluated: set = set()
    log = []
    sink = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for index in range(budget):
            value = fitness(space.decode(current))
            model.update(current, value)
            evaluated.add(current)
            log.append((index, current, value))
            if sink:
                values = "\t".join(str(v) for v in space.decode(current).values())
                sink.write(f"{index}\t{values}\t{value}\n")
                sink.flush()
            if index + 1 >= budget:
                break
            best_candidate = None
            best_ucb = -math.inf
            for _ in range(neighbourhood):
                dim = stream.randrange(len(space.dims))
                size = len(space.dims[dim][1])
                candidate = list(current)
                if size > 1:
                    shift = 1 + stream.randrange(size - 1)
                    candidate[dim] = (candidate[dim] + shift) % size
                candidate = tuple(candidate)
                u = model.ucb(candidate, k)
                if u > best_ucb:
                    best_ucb = u
                    best_candidate = candidate
            current = best_candidate if best_candidate is not None else current
    finally:
        if sink:
            sink.close()
    best_point = max(evaluated, key=lambda p: (model.estimate(p), p))
    return TuneResult(
        best_point=best_point,
        best_config=space.decode(best_point),
        model=model,
        evaluations=len(log),
        log=log,
    )


def tune_agent(
    agent_kind: str,
    space: ParamSpace,
    scenario,
    opponent_config: AgentConfig,
    games_per_eval: int,
    budget: int,
    seed: int,
    *,
    match_budget: SearchBudget | None = None,
    fog: bool = True,
    log_path=None,
) -> TuneResult:
    """NTBEA over agent parameters with win-rate fitness.

    Fitness of a configuration is its mean outcome over `games_per_eval`
    seeded matches (as blue) against the fixed opponent.
    """
    from dataclasses import replace

    from .evaluation import DEFAULT_BUDGET, run_match

    match_budget = match_budget or DEFAULT_BUDGET
    base = AgentConfig(kind=agent_kind)

    def fitness(params: dict) -> float:
        weights = list(base.weights)
        updates = {}
        for name, value in params.items():
            if name in ("w1", "w2", "w3", "w4"):
                weights[int(name[1]) - 1] = value
            else:
                updates[name] = value
        config = replace(base, weights=tuple(weights), **updates)
        total = 0.0
        for g in range(games_per_eval):
            result = run_match(
                scenario, config, opponent_config, derive(seed, 0x7A9E, g),
                fog=fog, budget=match_budget,
            )
            total += result.outcome_blue
        return total / games_per_eval

    return ntbea_optimize(space, fitness, budget, seed, log_path=log_path)
