"""Provider side: FIFO queues, one customer at a time, profile-dependent service times."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .ontology import Profile
from .world import Position, Zone, ZoneKind


class QueueError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceTimes:
    checkin_base: int = 3
    passport_base: int = 3
    shop_base: int = 3
    belt_base: int = 3
    gate_base: int = 3
    per_suitcase: int = 2
    danger_factor: int = 5
    noise_max: int = 2

    def expected_shop_time(self) -> float:
        return self.shop_base + self.noise_max / 2


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def service_time(
    kind: ZoneKind, profile: Profile, rng: random.Random, times: ServiceTimes = ServiceTimes()
) -> int:
    """Ticks needed to serve ``profile`` at a provider of ``kind``.

    Info panels answer instantly and draw nothing. Every other kind draws one
    uniform integer noise term in ``[0, noise_max]``.
    """
    if kind.is_panel:
        return 0
    if not kind.is_service:
        raise ValueError(f"{kind.value} does not provide a service")
    noise = rng.randint(0, times.noise_max)
    if kind is ZoneKind.CHECKIN_COUNTER:
        return times.checkin_base + times.per_suitcase * profile.suitcases + noise
    if kind is ZoneKind.PASSPORT_CONTROL:
        return times.passport_base + _round_half_up(profile.danger * times.danger_factor) + noise
    if kind is ZoneKind.SHOP:
        return times.shop_base + noise
    if kind is ZoneKind.BAGGAGE_BELT:
        return times.belt_base + times.per_suitcase * profile.suitcases + noise
    return times.gate_base + noise


@dataclass
class ServiceRecord:
    aid: int
    provider: int
    enqueued: int
    started: int | None = None
    finished: int | None = None
    removed: bool = False

    @property
    def wait(self) -> int | None:
        return None if self.started is None else self.started - self.enqueued


@dataclass
class ProviderState:
    aid: int
    zone: Zone
    position: Position
    queue: deque = field(default_factory=deque)
    busy_until: int | None = None
    current: int | None = None
    records: list[ServiceRecord] = field(default_factory=list)
    _open: dict[int, ServiceRecord] = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> ZoneKind:
        return self.zone.kind

    @property
    def idle(self) -> bool:
        return self.current is None

    def __contains__(self, aid: int) -> bool:
        return aid in self._open

    def enqueue(self, aid: int, tick: int) -> int:
        if aid in self._open:
            raise QueueError(f"agent {aid} is already queued at provider {self.aid}")
        rec = ServiceRecord(aid, self.aid, tick)
        self.records.append(rec)
        self._open[aid] = rec
        self.queue.append(aid)
        return len(self.queue) - 1

    def _start_next(self, tick: int, draw: Callable[[int], int]) -> None:
        if self.current is not None or not self.queue:
            return
        aid = self.queue.popleft()
        self.current = aid
        self.busy_until = tick + max(1, draw(aid))
        self._open[aid].started = tick

    def tick(self, tick: int, draw: Callable[[int], int]) -> int | None:
        """Release a finished customer, then start the next one (same tick)."""
        done = None
        if self.current is not None and self.busy_until <= tick:
            done = self.current
            self._open.pop(done).finished = tick
            self.current = None
            self.busy_until = None
        self._start_next(tick, draw)
        return done

    def remove(self, aid: int, tick: int, draw: Callable[[int], int]) -> ServiceRecord | None:
        """Drop an agent that left the airport (missed flight)."""
        rec = self._open.pop(aid, None)
        if rec is None:
            return None
        rec.removed = True
        rec.finished = tick
        if self.current == aid:
            self.current = None
            self.busy_until = None
            self._start_next(tick, draw)
        else:
            self.queue.remove(aid)
        return rec


def enqueue(provider: ProviderState, aid: int, tick: int) -> int:
    return provider.enqueue(aid, tick)


def tick_provider(provider: ProviderState, tick: int, draw: Callable[[int], int]) -> int | None:
    return provider.tick(tick, draw)
