"""Deterministic tick loop for one simulation run.

Per tick, in order: deliver messages, step agents in ascending aid
(facilitator, positioning, providers, panels, evaluator, users), tick the
providers, then check flight deadlines and record metrics.

All randomness comes from one ``random.Random(seed)``. Draw order: the user
population shuffle, then per user (aid order) entry tick and profile, then
per tick whatever agents and providers draw in aid order.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field

from .agents import SERVICE_FACTS, AgentState, Role, bdi_step, plan_for, random_profile
from .messaging import Message, MessageBus, Performative
from .metrics import MetricLog, RunResult, accrued_satisfaction
from .ontology import IsProvider, Provide, Service
from .params import SetupParameters
from .protocol import (
    PANEL_SERVICES,
    SHOPPING,
    Directory,
    DirectoryEntry,
    Phase,
    evaluation_message,
    facilitator_answer,
    location_message,
    service_name,
    zone_label,
)
from .services import ProviderState, service_time
from .world import AIRPORT, AirportMap, Position, ZoneKind, build_layout

log = logging.getLogger(__name__)

FACILITATOR_AID = 0
POSITIONING_AID = 1

# provider kinds in aid order
PROVIDER_KINDS = (
    ZoneKind.CHECKIN_COUNTER,
    ZoneKind.PASSPORT_CONTROL,
    ZoneKind.SHOP,
    ZoneKind.BAGGAGE_BELT,
    ZoneKind.BOARDING_GATE,
)
PANEL_KINDS = (ZoneKind.FLIGHT_INFO_PANEL, ZoneKind.BOARDING_INFO_PANEL, ZoneKind.BAGGAGE_INFO_PANEL)


@dataclass
class SimClock:
    tick: int = 0

    def advance(self) -> int:
        self.tick += 1
        return self.tick


@dataclass
class PanelState:
    aid: int
    kind: ZoneKind
    position: Position


@dataclass
class EvaluatorState:
    aid: int
    # user aid -> list of (service, wait) evaluations
    store: dict[int, list[tuple[str, str]]] = field(default_factory=dict)


def flight_names(params: SetupParameters) -> list[str]:
    return [f"FL{k}" for k in range(params.flights)]


def spawn_population(
    params: SetupParameters,
    rng: random.Random,
    amap: AirportMap | None = None,
    first_aid: int = 0,
) -> list[AgentState]:
    """Create the user agents with random profiles, entry ticks and start cells."""
    amap = amap or build_layout(params)
    kinds = (
        [(False, False)] * params.ingoing_nonami
        + [(False, True)] * params.ingoing_ami
        + [(True, False)] * params.outgoing_nonami
        + [(True, True)] * params.outgoing_ami
    )
    rng.shuffle(kinds)
    flights = flight_names(params)
    shops = params.shop_names
    gates = amap.positions(ZoneKind.BOARDING_GATE)
    entrance = amap.positions(ZoneKind.ENTRANCE)
    users = []
    for i, (outgoing, ami) in enumerate(kinds):
        aid = first_aid + i
        entry = rng.randrange(params.arrival_window) if params.arrival_window > 0 else 0
        flight = flights[i % len(flights)]
        profile = random_profile(f"passenger-{aid}", rng, shops, flight)
        if outgoing:
            start = entrance[0]
        else:
            start = gates[(i % len(flights)) % len(gates)]
        users.append(
            AgentState(
                aid=aid,
                outgoing=outgoing,
                ami=ami,
                profile=profile,
                position=start,
                stack=plan_for(outgoing, ami),
                metrics=MetricLog(aid, ami, outgoing, entry),
                deadline=entry + params.flight_deadline if outgoing else None,
                visited={start},
            )
        )
    return users


class Simulation:
    """State of one run; also the world interface the agents act through."""

    facilitator_aid = FACILITATOR_AID
    positioning_aid = POSITIONING_AID

    def __init__(self, params: SetupParameters, amap: AirportMap | None = None):
        self.params = params
        self.amap = amap or build_layout(params)
        self.rng = random.Random(params.seed)
        self.clock = SimClock()
        self.bus = MessageBus([FACILITATOR_AID, POSITIONING_AID])
        self.shop_names = params.shop_names
        self.times = params.service_times
        self.weights = params.weights
        self.trace = self.bus.trace
        self.events: list[tuple] = []
        self.roles: dict[int, str] = {
            FACILITATOR_AID: Role.FACILITATOR.value,
            POSITIONING_AID: Role.POSITIONING.value,
        }

        self.shop_cells = frozenset(self.amap.positions(ZoneKind.SHOP))
        shop_rows = {p.y for p in self.shop_cells}
        self.shop_corridor = frozenset(p for p in self.amap.open_cells() if p.y in shop_rows)

        self._build_infrastructure()
        self.users = spawn_population(params, self.rng, self.amap, self._next_aid)
        for u in self.users:
            self.bus.register(u.aid)
            self.roles[u.aid] = f"user:{u.direction}:{'ami' if u.ami else 'nonami'}"
        self.user_by_aid = {u.aid: u for u in self.users}
        self._pending_users = deque(sorted(self.users, key=lambda u: (u.metrics.entry_tick, u.aid)))
        self._active: list[AgentState] = []
        self._location_requests: list[tuple[int, int, str]] = []
        self._facilitator_backlog: deque[Message] = deque()
        self.queue_lengths: dict[int, list[int]] = {aid: [] for aid in self.providers}
        self.series: list[tuple[int, float, float]] = []

    # -- setup ---------------------------------------------------------------

    def _build_infrastructure(self) -> None:
        aid = POSITIONING_AID + 1
        flights = flight_names(self.params)
        self.providers: dict[int, ProviderState] = {}
        self.provider_by_pos: dict[Position, int] = {}
        self.directory = Directory(self.amap)
        self._gate_of_flight: dict[str, Position] = {}
        for kind in PROVIDER_KINDS:
            cells = self.amap.positions(kind)
            served: dict[int, set[str]] = {i: set() for i in range(len(cells))}
            if kind in (ZoneKind.CHECKIN_COUNTER, ZoneKind.BOARDING_GATE, ZoneKind.BAGGAGE_BELT):
                for k, f in enumerate(flights):
                    if cells:
                        served[k % len(cells)].add(f)
            for i, pos in enumerate(cells):
                zone = self.amap.zone_at(pos)
                self.providers[aid] = ProviderState(aid, zone, pos)
                self.provider_by_pos[pos] = aid
                self.roles[aid] = f"provider:{kind.value}"
                flights_here = frozenset(served[i]) if served[i] else None
                if kind in (ZoneKind.PASSPORT_CONTROL, ZoneKind.SHOP):
                    flights_here = None
                elif flights_here is None:
                    flights_here = frozenset()
                self.directory.add(
                    DirectoryEntry(
                        aid,
                        Service(service_name(zone, self.shop_names)),
                        pos,
                        zone_label(zone, self.shop_names),
                        flights_here,
                    )
                )
                if kind is ZoneKind.BOARDING_GATE:
                    for f in served[i]:
                        self._gate_of_flight[f] = pos
                self.bus.register(aid)
                aid += 1
        self.panels: dict[int, PanelState] = {}
        self.panel_by_pos: dict[Position, int] = {}
        for kind in PANEL_KINDS:
            for pos in self.amap.positions(kind):
                self.panels[aid] = PanelState(aid, kind, pos)
                self.panel_by_pos[pos] = aid
                self.roles[aid] = f"panel:{kind.value}"
                self.bus.register(aid)
                aid += 1
        self.evaluator = EvaluatorState(aid)
        self.roles[aid] = Role.EVALUATOR.value
        self.bus.register(aid)
        self._next_aid = aid + 1

    # -- world interface used by agents ----------------------------------------

    @property
    def tick(self) -> int:
        return self.clock.tick

    def send(self, m: Message) -> Message:
        return self.bus.send(m)

    def event(self, a: AgentState, kind: str, detail=None) -> None:
        self.events.append((self.tick, a.aid, kind, detail))

    def note_zone(self, a: AgentState) -> None:
        z = self.amap.zone_at(a.position)
        if z.kind is not ZoneKind.OPEN:
            self.event(a, "zone", zone_label(z, self.shop_names))

    def request_location(self, a: AgentState) -> None:
        conv = next(reversed(a.conversations.values()))
        self._location_requests.append((self.tick, a.aid, conv.cid))

    def panel_at(self, pos: Position) -> int:
        return self.panel_by_pos[pos]

    def provider_at(self, pos: Position) -> int:
        return self.provider_by_pos[pos]

    def nearest_provider(self, at: Position, kind: ZoneKind) -> tuple[int, Position]:
        best = None
        for aid, prov in self.providers.items():
            if prov.kind is not kind:
                continue
            d = self.amap.distance(at, prov.position)
            if best is None or (d, aid) < best[:2]:
                best = (d, aid, prov.position)
        if best is None:
            raise LookupError(f"no {kind.value} in this airport")
        return best[1], best[2]

    def gate_of(self, flight: str) -> Position:
        return self._gate_of_flight[flight]

    def finish(self, a: AgentState) -> None:
        a.status = "boarded" if a.outgoing else "exited"
        a.metrics.close(self.tick + 1)
        self.event(a, "outcome", a.status)

    def fail(self, a: AgentState, why: str) -> None:
        self._leave_queue(a)
        a.status = "failed"
        a.metrics.failed = True
        a.metrics.close(self.tick + 1)
        self.event(a, "outcome", f"failed: {why}")

    # -- infrastructure agents -------------------------------------------------

    def _step_facilitator(self) -> None:
        self._facilitator_backlog.extend(self.bus.inbox(FACILITATOR_AID))
        for _ in range(min(self.params.facilitator_capacity, len(self._facilitator_backlog))):
            m = self._facilitator_backlog.popleft()
            answer = facilitator_answer(self.directory, FACILITATOR_AID, m, self._flight_of)
            if answer is not None:
                self.send(answer)

    def _flight_of(self, aid: int) -> str | None:
        u = self.user_by_aid.get(aid)
        return u.flight if u is not None else None

    def _step_positioning(self) -> None:
        requests, self._location_requests = self._location_requests, []
        for _, aid, cid in sorted(requests):
            u = self.user_by_aid[aid]
            if not u.alive:
                continue
            label = zone_label(self.amap.zone_at(u.position), self.shop_names)
            self.send(location_message(POSITIONING_AID, aid, u.position, label, cid))

    def _step_provider(self, prov: ProviderState) -> None:
        for m in sorted(self.bus.inbox(prov.aid), key=lambda m: m.sender):
            u = self.user_by_aid.get(m.sender)
            if (
                m.performative is not Performative.REQUEST
                or not isinstance(m.content, Provide)
                or u is None
                or not u.alive
                or u.position != prov.position
                or m.sender in prov
            ):
                if m.performative in (Performative.REQUEST, Performative.QUERY_REF):
                    self.send(
                        Message(Performative.REFUSE, prov.aid, m.sender, m.content, conversation=m.conversation)
                    )
                continue
            prov.enqueue(u.aid, self.tick)
            self.event(u, "queue-join", prov.aid)

    def _step_panel(self, panel: PanelState) -> None:
        info, target = PANEL_SERVICES[panel.kind]
        for m in sorted(self.bus.inbox(panel.aid), key=lambda m: m.sender):
            u = self.user_by_aid.get(m.sender)
            if m.performative is not Performative.REQUEST or u is None or u.position != panel.position:
                continue
            matches = self.directory.providers_for(Service(target), panel.position, u.flight)
            if not matches:
                self.send(Message(Performative.FAILURE, panel.aid, u.aid, m.content))
                continue
            best = matches[0]
            self.send(
                Message(
                    Performative.INFORM,
                    panel.aid,
                    u.aid,
                    IsProvider(AIRPORT, best.position, best.aid, Service(target), best.zone),
                )
            )

    def _step_evaluator(self) -> None:
        for m in self.bus.inbox(self.evaluator.aid):
            # phases 11-12: update the user's stored profile, once
            feats = {f.name: f.value for f in m.content.what.characteristics}
            self.evaluator.store.setdefault(m.sender, []).append(
                (feats.get("Service", ""), feats.get("Queue-Wait", ""))
            )

    # -- provider stage ----------------------------------------------------------

    def _draw_for(self, prov: ProviderState):
        def draw(aid: int) -> int:
            return service_time(prov.kind, self.user_by_aid[aid].profile, self.rng, self.times)

        return draw

    def _tick_providers(self) -> None:
        t = self.tick
        for aid, prov in self.providers.items():
            done = prov.tick(t, self._draw_for(prov))
            if done is not None:
                self._release(prov, self.user_by_aid[done])
            self._note_start(prov)
            self.queue_lengths[aid].append(len(prov.queue))

    def _note_start(self, prov: ProviderState) -> None:
        if prov.current is None:
            return
        rec = prov._open[prov.current]
        if rec.started == self.tick:
            u = self.user_by_aid[prov.current]
            u.metrics.queue_wait += rec.started - rec.enqueued
            self.event(u, "service-start", prov.aid)

    def _release(self, prov: ProviderState, u: AgentState) -> None:
        t = self.tick
        u.awaiting = None
        self.event(u, "service-end", prov.aid)
        service = service_name(prov.zone, self.shop_names)
        if service.startswith(SHOPPING):
            shop = service[len(SHOPPING):]
            u.facts.add("shopped")
            u.metrics.purchases.append((shop, u.profile.interests.get(shop, 0.0)))
            self.event(u, "purchase", shop)
        else:
            u.facts.add(SERVICE_FACTS[service])
        conv = u.conversations.get(service)
        if self.params.evaluator and conv is not None and conv.phase == Phase.REQUEST:
            rec = next(r for r in reversed(prov.records) if r.aid == u.aid)
            conv, msg = evaluation_message(conv, self.evaluator.aid, rec.wait or 0)
            u.conversations[service] = conv
            self.send(msg)
        if prov.kind is ZoneKind.BOARDING_GATE:
            while u.stack:
                u.stack.pop()
            u.status = "boarded"
            u.metrics.close(t)
            self.event(u, "outcome", "boarded")

    def _leave_queue(self, u: AgentState) -> None:
        if u.awaiting is None or u.awaiting not in self.providers:
            return
        prov = self.providers[u.awaiting]
        before = prov.current
        rec = prov.remove(u.aid, self.tick, self._draw_for(prov))
        if rec is not None and rec.started is None:
            u.metrics.queue_wait += self.tick - rec.enqueued
        if prov.current != before:
            self._note_start(prov)
        u.awaiting = None

    def _check_deadlines(self) -> None:
        t = self.tick
        for u in self._active:
            if u.alive and u.deadline is not None and u.deadline <= t:
                self._leave_queue(u)
                u.status = "missed"
                u.metrics.mark_missed()
                u.metrics.close(u.deadline)
                self.event(u, "outcome", "missed-flight")

    def _record_series(self) -> None:
        t = self.tick
        totals = {False: 0.0, True: 0.0}
        for u in self.users:
            if u.status == "pending":
                continue
            extra = 0
            if u.alive and u.awaiting in self.providers:
                rec = self.providers[u.awaiting]._open.get(u.aid)
                if rec is not None and rec.started is None:
                    extra = t + 1 - rec.enqueued
            totals[u.ami] += accrued_satisfaction(u.metrics, self.weights, extra)
        self.series.append((t, totals[False], totals[True]))

    # -- main loop -----------------------------------------------------------------

    def step(self) -> None:
        t = self.tick
        self.bus.advance(t)
        while self._pending_users and self._pending_users[0].metrics.entry_tick <= t:
            u = self._pending_users.popleft()
            u.status = "active"
            self._active.append(u)
            self.event(u, "enter", u.direction)
        self._active.sort(key=lambda u: u.aid)

        self._step_facilitator()
        self._step_positioning()
        for prov in self.providers.values():
            self._step_provider(prov)
        for panel in self.panels.values():
            self._step_panel(panel)
        self._step_evaluator()
        for u in self._active:
            if u.alive:
                bdi_step(u, self)

        self._tick_providers()
        self._check_deadlines()
        self._record_series()
        self._active = [u for u in self._active if u.alive]

    @property
    def live(self) -> bool:
        return bool(self._pending_users or self._active)

    def run(self) -> RunResult:
        cap = self.params.tick_cap
        while self.live and self.tick < cap:
            self.step()
            self.clock.advance()
        truncated = self.live
        # reports sent on the final tick land one tick later
        self.bus.advance(self.tick)
        self._step_evaluator()
        if truncated:
            log.warning("run with seed %d truncated at tick %d", self.params.seed, self.tick)
        return RunResult(
            seed=self.params.seed,
            ticks=self.tick,
            truncated=truncated,
            logs={u.aid: u.metrics for u in self.users},
            weights=self.weights,
            series=self.series,
            trace=self.trace,
            roles=self.roles,
            events=self.events,
            queue_lengths=self.queue_lengths,
        )


def run(params: SetupParameters, amap: AirportMap | None = None) -> RunResult:
    return Simulation(params, amap).run()
