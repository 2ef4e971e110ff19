"""Service-discovery conversation between user, positioning and facilitator agents.

Message flow for one service (phase numbers in brackets)::

    positioning -> user         inform     HasLocation   [3]
    user        -> facilitator  query-ref  HasServices   [4]
    facilitator -> user         inform     HasServices   [5]
    (user picks the service it wants)                    [6]
    user        -> facilitator  query-ref  IsProvider    [7]
    facilitator -> user         inform     IsProvider    [8]
    user        -> provider     request    Provide       [9]
    user        -> evaluator    inform     HasContext    [10, optional]
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .messaging import Message, MessageBus, Performative
from .ontology import (
    Context,
    Feature,
    HasContext,
    HasLocation,
    HasServices,
    IsProvider,
    Product,
    Provide,
    Service,
)
from .world import AIRPORT, AirportMap, NoPathError, Place, Position, Zone, ZoneKind

log = logging.getLogger(__name__)

CHECKIN = "Check-in"
PASSPORT = "Passport-Control"
BAGGAGE = "Baggage-Delivery"
BOARDING = "Boarding"
SHOPPING = "Shopping-"
FLIGHT_INFO = "Flight-Info"
BOARDING_INFO = "Boarding-Info"
BAGGAGE_INFO = "Baggage-Info"

PANEL_SERVICES = {
    ZoneKind.FLIGHT_INFO_PANEL: (FLIGHT_INFO, CHECKIN),
    ZoneKind.BOARDING_INFO_PANEL: (BOARDING_INFO, BOARDING),
    ZoneKind.BAGGAGE_INFO_PANEL: (BAGGAGE_INFO, BAGGAGE),
}

_ZONE_LABELS = {
    ZoneKind.ENTRANCE: "Entrance",
    ZoneKind.FLIGHT_INFO_PANEL: "FlightInfo",
    ZoneKind.CHECKIN_COUNTER: "Counter",
    ZoneKind.PASSPORT_CONTROL: "Control",
    ZoneKind.BOARDING_INFO_PANEL: "BoardingInfo",
    ZoneKind.BOARDING_GATE: "Gate",
    ZoneKind.BAGGAGE_INFO_PANEL: "BaggageInfo",
    ZoneKind.BAGGAGE_BELT: "Belt",
    ZoneKind.OPEN: "Hall",
    ZoneKind.EXIT: "Exit",
    ZoneKind.WALL: "Wall",
}


def zone_label(zone: Zone, shop_names: Sequence[str] = ()) -> str:
    if zone.kind is ZoneKind.SHOP:
        name = shop_names[zone.shop_type] if zone.shop_type < len(shop_names) else zone.shop_type
        return f"Shop-{name}"
    return _ZONE_LABELS[zone.kind]


def service_name(zone: Zone, shop_names: Sequence[str]) -> str:
    kind = zone.kind
    if kind is ZoneKind.SHOP:
        return SHOPPING + shop_names[zone.shop_type]
    if kind in PANEL_SERVICES:
        return PANEL_SERVICES[kind][0]
    return {
        ZoneKind.CHECKIN_COUNTER: CHECKIN,
        ZoneKind.PASSPORT_CONTROL: PASSPORT,
        ZoneKind.BAGGAGE_BELT: BAGGAGE,
        ZoneKind.BOARDING_GATE: BOARDING,
    }[kind]


class Phase(enum.IntEnum):
    LOCATE = 1
    READ_POSITION = 2
    SEND_LOCATION = 3
    QUERY_SERVICES = 4
    SERVICES = 5
    SELECT = 6
    QUERY_PROVIDER = 7
    PROVIDER = 8
    REQUEST = 9
    EVALUATE = 10
    UPDATE_PROFILE = 11
    STORE_PROFILE = 12


class DiscoveryFailure(LookupError):
    pass


@dataclass(frozen=True)
class ConversationState:
    """User-side view of one discovery conversation.

    ``phase`` is the last phase completed. A fresh conversation sits at
    READ_POSITION, waiting for the positioning agent's HasLocation.
    """

    cid: str
    user: int
    facilitator: int
    positioning: int
    wanted: Service
    phase: Phase = Phase.READ_POSITION
    place: Place = AIRPORT
    location: Position | None = None
    zone: str = ""
    available: tuple[Service, ...] = ()
    service: Service | None = None
    provider: int | None = None
    provider_position: Position | None = None
    failed: bool = False

    @property
    def ready(self) -> bool:
        """Provider known: the service request (phase 9) can be sent."""
        return self.phase == Phase.PROVIDER and not self.failed


# answering these would let two agents refuse each other forever
_NO_REPLY = frozenset({Performative.REFUSE, Performative.FAILURE, Performative.AGREE})


def _refuse(incoming: Message, me: int) -> Message:
    return Message(
        Performative.REFUSE, me, incoming.sender, incoming.content, conversation=incoming.conversation
    )


def advance(state: ConversationState, incoming: Message) -> tuple[ConversationState, list[Message]]:
    """Consume one message addressed to the user; return the new state and replies."""
    me = state.user
    perf, content = incoming.performative, incoming.content

    if perf in _NO_REPLY and not (perf is Performative.FAILURE and not state.failed):
        return state, []
    if state.failed or incoming.receiver != me:
        return state, [_refuse(incoming, me)]

    if perf is Performative.FAILURE and incoming.sender == state.facilitator and state.phase in (
        Phase.QUERY_SERVICES,
        Phase.QUERY_PROVIDER,
    ):
        log.info("discovery of %s failed for agent %d", state.wanted.name, me)
        return replace(state, failed=True), []

    if (
        state.phase == Phase.READ_POSITION
        and perf is Performative.INFORM
        and incoming.sender == state.positioning
        and isinstance(content, HasLocation)
        and content.aid == me
    ):
        query = Message(
            Performative.QUERY_REF,
            me,
            state.facilitator,
            HasServices(content.place, content.position, (), content.zone),
            conversation=state.cid,
        )
        new = replace(
            state,
            phase=Phase.QUERY_SERVICES,
            place=content.place,
            location=content.position,
            zone=content.zone,
        )
        return new, [query]

    if (
        state.phase == Phase.QUERY_SERVICES
        and perf is Performative.INFORM
        and incoming.sender == state.facilitator
        and isinstance(content, HasServices)
    ):
        available = content.services
        if state.wanted not in available:
            log.info("%s not offered near agent %d", state.wanted.name, me)
            return replace(state, phase=Phase.SERVICES, available=available, failed=True), []
        query = Message(
            Performative.QUERY_REF,
            me,
            state.facilitator,
            IsProvider(state.place, state.location, me, state.wanted, state.zone),
            conversation=state.cid,
        )
        new = replace(state, phase=Phase.QUERY_PROVIDER, available=available, service=state.wanted)
        return new, [query]

    if (
        state.phase == Phase.QUERY_PROVIDER
        and perf is Performative.INFORM
        and incoming.sender == state.facilitator
        and isinstance(content, IsProvider)
        and content.service == state.wanted
    ):
        new = replace(
            state, phase=Phase.PROVIDER, provider=content.aid, provider_position=content.position
        )
        return new, []

    if perf in _NO_REPLY:
        return state, []
    return state, [_refuse(incoming, me)]


def request_service(state: ConversationState, product: Product) -> tuple[ConversationState, Message]:
    """Phase 9: ask the chosen provider for ``product``."""
    if not state.ready:
        raise ValueError(f"conversation {state.cid} has no provider yet (phase {state.phase})")
    msg = Message(
        Performative.REQUEST,
        state.user,
        state.provider,
        Provide(product, state.provider),
        conversation=state.cid,
    )
    return replace(state, phase=Phase.REQUEST), msg


def evaluation_message(
    state: ConversationState, evaluator: int, wait: int
) -> tuple[ConversationState, Message]:
    """Phase 10: report the finished interaction to the evaluator."""
    ctx = Context(
        "Evaluation",
        (Feature("Service", state.wanted.name), Feature("Queue-Wait", str(wait))),
    )
    msg = Message(
        Performative.INFORM,
        state.user,
        evaluator,
        HasContext(ctx, state.user),
        conversation=state.cid,
    )
    return replace(state, phase=Phase.EVALUATE), msg


def location_message(
    positioning: int, user: int, position: Position, zone: str, cid: str, place: Place = AIRPORT
) -> Message:
    """Phase 3: positioning agent tells a user where it is."""
    return Message(
        Performative.INFORM,
        positioning,
        user,
        HasLocation(place, position, user, zone),
        conversation=cid,
    )


# --------------------------------------------------------------------------
# facilitator side

@dataclass(frozen=True)
class DirectoryEntry:
    aid: int
    service: Service
    position: Position
    zone: str
    flights: frozenset[str] | None = None  # None: serves every flight


@dataclass
class Directory:
    """The facilitator's map from positions to services and providers."""

    amap: AirportMap
    entries: list[DirectoryEntry] = field(default_factory=list)
    place: Place = AIRPORT

    def __post_init__(self):
        self._areas = self._label_areas()

    def _label_areas(self) -> dict[Position, int]:
        # Areas are separated by passport controls; a control belongs to every
        # area it touches.
        area: dict[Position, int] = {}
        n = 0
        for start in self.amap.open_cells():
            if start in area or self.amap.zone_at(start).kind is ZoneKind.PASSPORT_CONTROL:
                continue
            stack = [start]
            area[start] = n
            while stack:
                p = stack.pop()
                for q in self.amap.neighbours(p):
                    if q not in area and self.amap.zone_at(q).kind is not ZoneKind.PASSPORT_CONTROL:
                        area[q] = n
                        stack.append(q)
            n += 1
        return area

    def areas_of(self, p: Position) -> set[int]:
        if p in self._areas:
            return {self._areas[p]}
        return {self._areas[q] for q in self.amap.neighbours(p) if q in self._areas}

    def add(self, entry: DirectoryEntry) -> None:
        self.entries.append(entry)

    def services_at(self, p: Position) -> tuple[Service, ...]:
        here = self.areas_of(p)
        seen: dict[str, Service] = {}
        for e in self.entries:
            if self.areas_of(e.position) & here:
                seen.setdefault(e.service.name, e.service)
        return tuple(seen[name] for name in sorted(seen))

    def providers_for(
        self, service: Service, at: Position, flight: str | None = None
    ) -> list[DirectoryEntry]:
        """Matching providers, nearest by path first, ties by lowest aid."""
        ranked = []
        for e in self.entries:
            if e.service != service:
                continue
            if e.flights is not None and flight not in e.flights:
                continue
            try:
                d = self.amap.distance(at, e.position)
            except NoPathError:
                continue
            ranked.append((d, e.aid, e))
        ranked.sort(key=lambda t: (t[0], t[1]))
        return [e for _, _, e in ranked]


def facilitator_answer(
    directory: Directory,
    facilitator: int,
    incoming: Message,
    flight_of: Callable[[int], str | None] = lambda aid: None,
) -> Message | None:
    """Phases 5 and 8: answer a user's query-ref (None for refusals and failures)."""
    content = incoming.content
    reply_to = incoming.sender

    def reply(perf: Performative, pred) -> Message:
        return Message(perf, facilitator, reply_to, pred, conversation=incoming.conversation)

    if incoming.performative in _NO_REPLY:
        return None
    if incoming.performative is not Performative.QUERY_REF:
        return reply(Performative.REFUSE, content)
    if isinstance(content, HasServices):
        services = directory.services_at(content.position)
        return reply(
            Performative.INFORM,
            HasServices(content.place, content.position, services, content.zone),
        )
    if isinstance(content, IsProvider):
        matches = directory.providers_for(content.service, content.position, flight_of(reply_to))
        if not matches:
            return reply(Performative.FAILURE, content)
        best = matches[0]
        return reply(
            Performative.INFORM,
            IsProvider(directory.place, best.position, best.aid, content.service, best.zone),
        )
    return reply(Performative.REFUSE, content)


# --------------------------------------------------------------------------
# standalone discovery (used by tests and as an executable description)

@dataclass(frozen=True)
class Discovery:
    service: Service
    provider: int
    elapsed: int
    trace: tuple[Message, ...]


def full_discovery(
    user: int,
    position: Position,
    wanted: Service,
    directory: Directory,
    *,
    facilitator: int = 0,
    positioning: int = 1,
    flight: str | None = None,
    product: Product | None = None,
    max_ticks: int = 100,
) -> Discovery:
    """Run one conversation on a private bus until the phase-9 request is delivered.

    The user is assumed to already stand at the provider, so the request goes
    out on the tick the provider becomes known. ``elapsed`` counts ticks from
    the positioning inform being sent to the request being deliverable.
    """
    provider_ids = {e.aid for e in directory.entries}
    bus = MessageBus([user, facilitator, positioning, *provider_ids])
    zone = zone_label(directory.amap.zone_at(position))
    state = ConversationState(f"{user}.0", user, facilitator, positioning, wanted)
    bus.advance(0)
    first = bus.send(location_message(positioning, user, position, zone, state.cid))
    for tick in range(1, max_ticks):
        bus.advance(tick)
        for m in bus.inbox(facilitator):
            answer = facilitator_answer(directory, facilitator, m, lambda _aid: flight)
            if answer is not None:
                bus.send(answer)
        for m in bus.inbox(user):
            state, out = advance(state, m)
            for o in out:
                bus.send(o)
        if state.failed:
            raise DiscoveryFailure(f"no provider of {wanted.name} for agent {user}")
        if state.ready:
            prod = product or Product(wanted.name, ())
            state, req = request_service(state, prod)
            sent = bus.send(req)
            return Discovery(
                state.service, state.provider, sent.deliver_at - first.tick, tuple(bus.trace)
            )
    raise DiscoveryFailure(f"discovery of {wanted.name} did not finish in {max_ticks} ticks")
