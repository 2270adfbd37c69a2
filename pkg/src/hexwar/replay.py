"""Record/replay: line-delimited JSON logs that make finished games
verifiable bit-for-bit.

File contract (one record per line, UTF-8):

    header   {"version": 1, "scenarioSha256": <hex>, "seed": <int>,
              "blue": <name>, "red": <name>}
    orders   {"kind": "orders", "tick": t, "side": "blue"|"red",
              "orders": [[unit_id, order_kind, args...], ...]}
    chance   {"kind": "chance", "tick": t, "purpose": "combat"|"spotting",
              "subjects": [...], "draw": <int>, "outcome": <int>}
    terminal {"kind": "terminal", "reason": r, "finalHash": <16 hex chars>,
              "score": {...}}

Both the order stream and every chance outcome are recorded, so verification
replays recorded outcomes instead of trusting RNG reproduction across
versions; the generator state is still advanced in lockstep and compared,
which pins down the first divergent event exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .engine import (
    ChanceCursor,
    ChanceEvent,
    EngineError,
    GameState,
    ReplayMismatch,
    apply_orders,
    instantiate,
    state_hash,
    step,
)
from .scenario import SIDE_BY_NAME, SIDE_NAMES, ScenarioDoc, parse_scenario, serialize_scenario

FORMAT_VERSION = 1


class ReplayError(ValueError):
    pass


def scenario_sha256(doc_or_text) -> str:
    text = doc_or_text if isinstance(doc_or_text, str) else serialize_scenario(doc_or_text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def encode_order(order: tuple) -> list:
    kind = order[0]
    if kind == "move":
        return ["move", [[q, r] for q, r in order[1]]]
    if kind == "attack":
        return ["attack", order[1]]
    if kind == "hold":
        return ["hold"]
    if kind == "scout":
        return ["scout", [order[1][0], order[1][1]], order[2]]
    raise ReplayError(f"cannot encode order {order!r}")


def decode_order(data: list) -> tuple:
    kind = data[0]
    if kind == "move":
        return ("move", tuple((int(q), int(r)) for q, r in data[1]))
    if kind == "attack":
        return ("attack", data[1])
    if kind == "hold":
        return ("hold",)
    if kind == "scout":
        return ("scout", (int(data[1][0]), int(data[1][1])), int(data[2]))
    raise ReplayError(f"cannot decode order {data!r}")


class ReplayWriter:
    """Streams one game to disk, flushing after every record."""

    def __init__(self, path, scenario: ScenarioDoc, seed: int, blue: str, red: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._write(
            {
                "version": FORMAT_VERSION,
                "scenarioSha256": scenario_sha256(scenario),
                "seed": seed,
                "blue": blue,
                "red": red,
            }
        )

    def _write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        self._fh.flush()

    def orders(self, tick: int, side: int, global_action: dict) -> None:
        self._write(
            {
                "kind": "orders",
                "tick": tick,
                "side": SIDE_NAMES[side],
                "orders": [[uid, *encode_order(o)] for uid, o in sorted(global_action.items())],
            }
        )

    def chance(self, event: ChanceEvent) -> None:
        self._write(
            {
                "kind": "chance",
                "tick": event[0],
                "purpose": event[1],
                "subjects": list(event[2]),
                "draw": event[3],
                "outcome": event[4],
            }
        )

    def terminal(self, reason: str, final_hash: int, score) -> None:
        self._write(
            {
                "kind": "terminal",
                "reason": reason,
                "finalHash": f"{final_hash:016x}",
                "score": {
                    "held": list(score.held),
                    "inflicted": list(score.inflicted),
                    "mpSpent": list(score.mp_spent),
                },
            }
        )

    def close(self) -> None:
        self._fh.close()


@dataclass
class ReplayLog:
    header: dict
    orders: list  # (tick, side, {unit_id: order})
    chance: list  # ChanceEvent
    terminal: dict | None


def read_replay(path) -> ReplayLog:
    orders = []
    chance = []
    terminal = None
    header = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"line {line_no}: corrupt record ({exc})") from None
            if line_no == 1:
                if rec.get("version") != FORMAT_VERSION:
                    raise ReplayError(f"unsupported replay version {rec.get('version')!r}")
                header = rec
                continue
            kind = rec.get("kind")
            if kind == "orders":
                side = SIDE_BY_NAME.get(rec["side"])
                if side is None:
                    raise ReplayError(f"line {line_no}: unknown side {rec['side']!r}")
                orders.append(
                    (rec["tick"], side, {u[0]: decode_order(u[1:]) for u in rec["orders"]})
                )
            elif kind == "chance":
                chance.append(
                    ChanceEvent(rec["tick"], rec["purpose"], tuple(rec["subjects"]), rec["draw"], rec["outcome"])
                )
            elif kind == "terminal":
                terminal = rec
            else:
                raise ReplayError(f"line {line_no}: unknown record kind {kind!r}")
    if header is None:
        raise ReplayError("empty replay file")
    return ReplayLog(header=header, orders=orders, chance=chance, terminal=terminal)


@dataclass
class VerifyResult:
    ok: bool
    mismatch_tick: int | None = None
    reason: str = ""


def replay_verify(path, scenario_text: str) -> VerifyResult:
    """Re-simulate a recorded game and check it reproduces the log.

    Re-applies the recorded orders, replays (and cross-checks) every recorded
    chance outcome with the generator advanced in lockstep, and compares the
    final state hash. Reports the first divergence tick otherwise.
    """
    log = read_replay(path)
    expected_sha = hashlib.sha256(scenario_text.encode("utf-8")).hexdigest()
    doc = parse_scenario(scenario_text)
    canonical_sha = scenario_sha256(doc)
    if log.header["scenarioSha256"] not in (expected_sha, canonical_sha):
        raise ReplayError("scenario text does not match the replay header hash")
    if log.terminal is None:
        raise ReplayError("replay has no terminal record (incomplete game)")

    state = instantiate(doc, log.header["seed"])
    cursor = ChanceCursor(log.chance)
    state.chance_cursor = cursor
    orders_queue = list(log.orders)
    idx = 0
    try:
        while state.terminal is None:
            while idx < len(orders_queue) and orders_queue[idx][0] == state.tick:
                _tick, side, action = orders_queue[idx]
                apply_orders(state, side, action)
                idx += 1
            step(state)
    except ReplayMismatch as exc:
        return VerifyResult(ok=False, mismatch_tick=exc.tick, reason=str(exc))
    except EngineError as exc:
        return VerifyResult(ok=False, mismatch_tick=state.tick, reason=str(exc))
    if idx < len(orders_queue):
        return VerifyResult(False, orders_queue[idx][0], "orders recorded past the terminal state")
    if not cursor.exhausted():
        ev = log.chance[cursor.index]
        return VerifyResult(False, ev[0], "recorded chance events were never replayed")
    final = state_hash(state)
    recorded = int(log.terminal["finalHash"], 16)
    if final != recorded:
        return VerifyResult(False, state.tick, f"final hash {final:016x} != recorded {recorded:016x}")
    if state.terminal != log.terminal["reason"]:
        return VerifyResult(False, state.tick, "termination reason differs")
    return VerifyResult(ok=True)
