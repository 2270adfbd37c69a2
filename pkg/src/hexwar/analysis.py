"""Decision-data export and result screening.

The exporter turns per-decision search statistics into supervised training
samples (feature vector, normalized visit distribution, final outcome), the
first half of an expert-iteration loop; no learning happens here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .agents import DecisionRecord
from .evaluation import GameResult
from .scenario import SIDE_NAMES


@dataclass(frozen=True)
class ExItSample:
    features: tuple
    policy_target: tuple  # normalized visit distribution over candidates
    value_target: float  # final outcome for the deciding side: 0, 0.5 or 1


def exit_samples(result: GameResult):
    """One sample per recorded decision of a finished game."""
    out = []
    for record, features in result.decisions:
        visits = [max(0, v) for _s, v, _m in record.candidates]
        total = sum(visits)
        if total <= 0:
            n = len(record.candidates)
            policy = tuple(1.0 / n for _ in range(n)) if n else ()
        else:
            policy = tuple(v / total for v in visits)
        out.append(
            ExItSample(
                features=tuple(features),
                policy_target=policy,
                value_target=result.outcome(record.side),
            )
        )
    return out


def export_exit_dataset(results, path) -> int:
    """Write one JSON line per decision across the given games; returns rows."""
    rows = 0
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            for sample in exit_samples(result):
                fh.write(
                    json.dumps(
                        {
                            "features": list(sample.features),
                            "policyTarget": list(sample.policy_target),
                            "valueTarget": sample.value_target,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
                rows += 1
    return rows


@dataclass(frozen=True)
class Anomaly:
    result_index: int
    scenario: str
    pairing: tuple
    metric: str
    value: float
    detail: str


def detect_anomalies(results, z_threshold: float = 2.5, min_cell: int = 10):
    """Flag statistically unusual games.

    Within each (scenario, agent pairing) cell holding at least `min_cell`
    results, games whose VP margin sits more than z_threshold standard
    deviations from the cell mean are flagged; additionally any game that
    loses a unit before the first command cycle completes gets an early-loss
    marker. Cells with zero variance produce no z-flags.
    """
    cells: dict = {}
    for idx, r in enumerate(results):
        cells.setdefault((r.scenario_name, r.blue_name, r.red_name), []).append(idx)
    flagged = []
    results = list(results)
    for key, indices in sorted(cells.items()):
        if len(indices) < min_cell:
            continue
        margins = [results[i].margin for i in indices]
        mean = sum(margins) / len(margins)
        var = sum((m - mean) ** 2 for m in margins) / len(margins)
        std = var ** 0.5
        if std > 0:
            for i in indices:
                z = abs(results[i].margin - mean) / std
                if z > z_threshold:
                    flagged.append(
                        Anomaly(
                            result_index=i,
                            scenario=key[0],
                            pairing=(key[1], key[2]),
                            metric="vpMarginZ",
                            value=z,
                            detail=f"margin {results[i].margin:.3f} vs cell mean {mean:.3f}",
                        )
                    )
    for i, r in enumerate(results):
        for side, tick in sorted(r.earliest_death_tick.items()):
            if tick < _first_cycle_ticks(r):
                flagged.append(
                    Anomaly(
                        result_index=i,
                        scenario=r.scenario_name,
                        pairing=(r.blue_name, r.red_name),
                        metric="earlyLoss",
                        value=float(tick),
                        detail=f"{SIDE_NAMES[side]} lost a unit at tick {tick}",
                    )
                )
    return flagged


def _first_cycle_ticks(result: GameResult) -> int:
    # the ticks-per-command value is not stored on the result; infer a
    # conservative default when absent
    return getattr(result, "ticks_per_command", 10)


def near_tied_decisions(records, gap: float = 0.05):
    """Decision records whose top two candidates sit within `gap` of each
    other: candidate branch points worth replaying."""
    out = []
    for record in records:
        if isinstance(record, tuple):
            record = record[0]
        means = sorted((m for _s, _v, m in record.candidates), reverse=True)
        if len(means) >= 2 and means[0] - means[1] < gap:
            out.append(record)
    return out
