"""Performative messages, the one-tick delivery bus and the message trace."""

from __future__ import annotations

import enum
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, TextIO

from .ontology import Predicate, parse_content, render_content

DELIVERY_LATENCY = 1


class Performative(enum.Enum):
    INFORM = "inform"
    REQUEST = "request"
    QUERY_REF = "query-ref"
    AGREE = "agree"
    REFUSE = "refuse"
    FAILURE = "failure"


@dataclass(frozen=True)
class Message:
    performative: Performative
    sender: int
    receiver: int
    content: Predicate
    tick: int = -1
    conversation: str = ""

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError(f"agent {self.sender} cannot message itself")

    @property
    def deliver_at(self) -> int:
        return self.tick + DELIVERY_LATENCY


class MessageBus:
    """Single-writer bus: messages sent during tick t are readable at t+1."""

    def __init__(self, agents: Iterable[int] = ()):
        self.agents: set[int] = set(agents)
        self.tick = 0
        self.trace: list[Message] = []
        self._pending: dict[int, dict[int, list[Message]]] = defaultdict(lambda: defaultdict(list))

    def register(self, aid: int) -> None:
        self.agents.add(aid)

    def advance(self, tick: int) -> None:
        if tick < self.tick:
            raise ValueError("bus time cannot go backwards")
        self.tick = tick
        for t in [t for t in self._pending if t < tick]:
            del self._pending[t]

    def send(self, m: Message) -> Message:
        stamped = replace(m, tick=self.tick)
        self.trace.append(stamped)
        if stamped.receiver in self.agents:
            self._pending[stamped.deliver_at][stamped.receiver].append(stamped)
            return stamped
        bounce = Message(
            Performative.FAILURE,
            sender=stamped.receiver,
            receiver=stamped.sender,
            content=stamped.content,
            tick=self.tick,
            conversation=stamped.conversation,
        )
        self.trace.append(bounce)
        if bounce.receiver in self.agents:
            self._pending[bounce.deliver_at][bounce.receiver].append(bounce)
        return stamped

    def inbox(self, aid: int, tick: int | None = None) -> list[Message]:
        t = self.tick if tick is None else tick
        box = self._pending.get(t)
        if not box or aid not in box:
            return []
        return list(box[aid])


# --------------------------------------------------------------------------
# trace export: one record per line, content in the listing style

_LINE_RE = re.compile(
    r'^(?P<tick>\d+)\t(?P<conv>\S+)\t\["(?P<perf>[a-z-]+)" "sender:(?P<s>-?\d+)" '
    r'"receiver:(?P<r>-?\d+)" "content:" "(?P<content>[^"]*)"\]$'
)


def format_message(m: Message) -> str:
    return (
        f'{m.tick}\t{m.conversation or "-"}\t["{m.performative.value}" "sender:{m.sender}" '
        f'"receiver:{m.receiver}" "content:" "{render_content(m.content)}"]'
    )


def parse_message(line: str) -> Message:
    m = _LINE_RE.match(line.rstrip("\n"))
    if m is None:
        raise ValueError(f"malformed trace line: {line!r}")
    conv = m["conv"]
    return Message(
        Performative(m["perf"]),
        int(m["s"]),
        int(m["r"]),
        parse_content(m["content"]),
        tick=int(m["tick"]),
        conversation="" if conv == "-" else conv,
    )


def write_trace(trace: Iterable[Message], out: TextIO) -> None:
    for m in trace:
        out.write(format_message(m) + "\n")


def read_trace(lines: Iterable[str]) -> Iterator[Message]:
    for line in lines:
        if line.strip():
            yield parse_message(line)
