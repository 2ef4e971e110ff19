"""BDI user agents: intention stacks, the four plan libraries and one-tick reasoning.

Each tick a user agent reads its inbox, pops every intention whose completion
condition already holds, then performs one unit of the top intention: a move
of one cell, one message emission, or one tick of waiting.
"""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .messaging import Message, Performative
from .metrics import MetricLog
from .ontology import Feature, HasLocation, HasServices, IsProvider, Product, Profile, Provide, Service
from .protocol import (
    BAGGAGE,
    BAGGAGE_INFO,
    BOARDING,
    BOARDING_INFO,
    CHECKIN,
    FLIGHT_INFO,
    PASSPORT,
    SHOPPING,
    ConversationState,
    advance,
    request_service,
)
from .world import NoPathError, Position, ZoneKind, random_walk_step

if TYPE_CHECKING:
    from .engine import Simulation

log = logging.getLogger(__name__)


class Role(enum.Enum):
    USER = "user"
    PROVIDER = "provider"
    FACILITATOR = "facilitator"
    POSITIONING = "positioning"
    EVALUATOR = "evaluator"


@dataclass(frozen=True)
class Intention:
    action: str
    done_when: str

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.done_when not in CONDITIONS:
            raise ValueError(f"unknown completion condition {self.done_when!r}")
# Plan libraries in push order: ``add-intention`` pushes,

# Plan libraries as written in the NetLogo models: ``add-intention`` pushes,
# so the last line is executed first.
LISTINGS: dict[tuple[bool, bool], tuple[tuple[str, str], ...]] = {
    # (outgoing, ami)
    (False, False): (
        ("move-to-output", "in-output"),
        ("pass-control", "past-control"),
        ("move-to-control", "in-control"),
        ("shopping", "shopped"),
        ("move-to-shops", "in-shops"),
        ("collect-baggage", "baggage-collected"),
        ("move-to-belt", "in-belt"),
        ("ask-baggage-info", "informed-belt-baggage"),
        ("move-to-baggage-info", "in-baggage-info"),
    ),
    (False, True): (
        ("move-to-output", "in-output"),
        ("pass-control", "past-control"),
        ("move-to-control", "in-control"),
        ("shopping", "shopped"),
        ("move-to-interestingshop", "in-interestingshop"),
        ("collect-baggage", "baggage-collected"),
        ("move-to-belt", "in-belt"),
        ("ask-baggage-info", "informed-belt-baggage"),
    ),
    (True, False): (
        ("move-to-gate", "in-gate"),
        ("query-gate", "informed-gate"),
        ("move-to-gate-info", "in-gate-info"),
        ("shopping", "shopped"),
        ("move-to-shops", "in-shops"),
        ("pass-control", "past-control"),
        ("move-to-control", "in-control"),
        ("request-checkin", "done-checkin"),
        ("move-to-checkin", "in-checkin"),
        ("query-checkin", "informed-checkin"),
        ("move-to-checkin-info", "in-checkin-info"),
    ),
    (True, True): (
        ("move-to-gate", "in-gate"),
        ("query-gate", "informed-gate"),
        ("shopping", "shopped"),
        ("move-to-interestingshop", "in-interestingshop"),
        ("pass-control", "past-control"),
        ("move-to-control", "in-control"),
        ("request-checkin", "done-checkin"),
        ("move-to-checkin", "in-checkin"),
        ("query-checkin", "informed-checkin"),
    ),
}


class IntentionStack:
    """Stack of intentions; ``top`` is the one being pursued."""

    def __init__(self, pushed: Iterable[Intention] = ()):
        self._items: list[Intention] = []
        for it in pushed:
            self._items.append(it)

    def top(self) -> Intention | None:
        return self._items[-1] if self._items else None

    def pop(self) -> Intention:
        return self._items.pop()

    def __len__(self):
        return len(self._items)

    def __bool__(self):
        return bool(self._items)

    def executable(self) -> list[Intention]:
        """Intentions in the order they will be executed."""
        return list(reversed(self._items))


def plan_for(outgoing: bool, ami: bool) -> IntentionStack:
    return IntentionStack(Intention(a, c) for a, c in LISTINGS[(outgoing, ami)])


# --------------------------------------------------------------------------
# agent state

@dataclass
class AgentState:
    aid: int
    outgoing: bool
    ami: bool
    profile: Profile
    position: Position
    stack: IntentionStack
    metrics: MetricLog
    deadline: int | None = None
    role: Role = Role.USER
    beliefs: set = field(default_factory=set)
    visited: set[Position] = field(default_factory=set)
    facts: set[str] = field(default_factory=set)
    known: dict[str, tuple[int, Position]] = field(default_factory=dict)
    conversations: dict[str, ConversationState] = field(default_factory=dict)
    fallback: set[str] = field(default_factory=set)
    awaiting: int | None = None
    wanted_shop: str | None = None
    control_target: tuple[int, Position] | None = None
    corridor: frozenset[Position] | None = None
    status: str = "pending"
    executed: list[str] = field(default_factory=list)

    @property
    def direction(self) -> str:
        return "outgoing" if self.outgoing else "ingoing"

    @property
    def alive(self) -> bool:
        return self.status == "active"

    @property
    def flight(self) -> str:
        return self.profile.flight

    def belief_size(self) -> int:
        return len(self.beliefs) + len(self.facts) + len(self.visited)

    def believe(self, pred) -> None:
        self.beliefs.add(pred)
        if isinstance(pred, IsProvider):
            self.known[pred.service.name] = (pred.aid, pred.position)

    def uses_ami(self, service: str) -> bool:
        return self.ami and service not in self.fallback


# --------------------------------------------------------------------------
# shopping decisions

def select_interesting_shop(profile: Profile, shop_types: Sequence[str]) -> str:
    """Shop type with the highest interest weight; ties go to the earliest type."""
    weights = profile.interests
    best, best_w = None, None
    for name in shop_types:
        w = weights.get(name)
        if w is None:
            continue
        if best_w is None or w > best_w:
            best, best_w = name, w
    if best is None:
        raise ValueError("profile has no weight for any configured shop type")
    return best


def decide_shopping(now: int, estimate: float, deadline: int | None, margin: float) -> bool:
    """Go shopping only if the slack left after ``estimate`` exceeds ``margin``."""
    if deadline is None:
        return True
    return deadline - now - estimate > margin


# --------------------------------------------------------------------------
# completion conditions

def _at_panel(kind: ZoneKind) -> Callable[["AgentState", "Simulation"], bool]:
    return lambda a, sim: sim.amap.zone_at(a.position).kind is kind


def _informed(service: str) -> Callable[["AgentState", "Simulation"], bool]:
    return lambda a, sim: service in a.known


def _at_known(service: str) -> Callable[["AgentState", "Simulation"], bool]:
    return lambda a, sim: service in a.known and a.position == a.known[service][1]


def _fact(name: str) -> Callable[["AgentState", "Simulation"], bool]:
    return lambda a, sim: name in a.facts


def _in_shops(a: AgentState, sim: "Simulation") -> bool:
    if "skip-shopping" in a.facts:
        return True
    z = sim.amap.zone_at(a.position)
    return a.wanted_shop is not None and z.kind is ZoneKind.SHOP and sim.shop_names[z.shop_type] == a.wanted_shop


def _in_interesting_shop(a: AgentState, sim: "Simulation") -> bool:
    if "skip-shopping" in a.facts:
        return True
    if a.wanted_shop is None:
        return False
    return _at_known(SHOPPING + a.wanted_shop)(a, sim)


CONDITIONS: dict[str, Callable[[AgentState, "Simulation"], bool]] = {
    "in-checkin-info": _at_panel(ZoneKind.FLIGHT_INFO_PANEL),
    "informed-checkin": _informed(CHECKIN),
    "in-checkin": _at_known(CHECKIN),
    "done-checkin": _fact("done-checkin"),
    "in-control": lambda a, sim: a.control_target is not None and a.position == a.control_target[1],
    "past-control": _fact("past-control"),
    "in-shops": _in_shops,
    "in-interestingshop": _in_interesting_shop,
    "shopped": lambda a, sim: "skip-shopping" in a.facts or "shopped" in a.facts,
    "in-gate-info": _at_panel(ZoneKind.BOARDING_INFO_PANEL),
    "informed-gate": _informed(BOARDING),
    "in-gate": _fact("boarded"),
    "in-baggage-info": _at_panel(ZoneKind.BAGGAGE_INFO_PANEL),
    "informed-belt-baggage": _informed(BAGGAGE),
    "in-belt": _at_known(BAGGAGE),
    "baggage-collected": _fact("baggage-collected"),
    "in-output": lambda a, sim: sim.amap.zone_at(a.position).kind is ZoneKind.EXIT,
}

# fact set when the provider of a service releases the agent
SERVICE_FACTS = {
    CHECKIN: "done-checkin",
    PASSPORT: "past-control",
    BAGGAGE: "baggage-collected",
    BOARDING: "boarded",
}


# --------------------------------------------------------------------------
# action units; each returns a short label of what was done this tick

def _move_towards(a: AgentState, sim: "Simulation", target: Position) -> str:
    if a.position == target:
        return "arrived"
    a.position = sim.amap.next_step(a.position, target)
    a.visited.add(a.position)
    sim.note_zone(a)
    return "move"


def _nearest_of(a: AgentState, sim: "Simulation", kind: ZoneKind) -> Position:
    cells = sim.amap.positions(kind)
    if not cells:
        raise NoPathError(a.position, a.position)
    best = min(cells, key=lambda p: (sim.amap.distance(a.position, p), p.y, p.x))
    return best


def product_for(a: AgentState, service: str) -> Product:
    p = a.profile
    if service in (CHECKIN, BAGGAGE):
        feats = (Feature("Baggage-Number", str(p.suitcases)),)
    elif service == PASSPORT:
        feats = (Feature("Danger-Perception", repr(p.danger)),)
    elif service.startswith(SHOPPING):
        feats = (Feature("Shop-Type", service[len(SHOPPING):]),)
    else:
        feats = (Feature("Flight-Number", p.flight),)
    return Product(service, feats)


def _request(a: AgentState, sim: "Simulation", service: str) -> str:
    """Send the service request once, then wait until the provider releases us."""
    if a.awaiting is not None:
        return "wait"
    provider, _ = a.known[service]
    conv = a.conversations.get(service)
    product = product_for(a, service)
    if conv is not None and conv.ready and a.uses_ami(service):
        conv, msg = request_service(conv, product)
        a.conversations[service] = conv
    else:
        msg = Message(Performative.REQUEST, a.aid, provider, Provide(product, provider))
    sim.send(msg)
    a.awaiting = provider
    return "request"


def _discover(a: AgentState, sim: "Simulation", service: str) -> str | None:
    """Drive the discovery conversation for ``service``.

    Returns None once the provider is known (or discovery failed and the agent
    fell back to acting without AmI), otherwise the unit spent this tick.
    """
    if service in a.known or service in a.fallback:
        return None
    conv = a.conversations.get(service)
    if conv is None:
        conv = ConversationState(
            f"{a.aid}.{len(a.conversations)}",
            a.aid,
            sim.facilitator_aid,
            sim.positioning_aid,
            Service(service),
        )
        a.conversations[service] = conv
        sim.request_location(a)
        return "locate"
    if conv.failed:
        a.fallback.add(service)
        sim.event(a, "discovery-failed", service)
        return None
    return "wait-discovery"


_PANEL_INFO = {
    ZoneKind.FLIGHT_INFO_PANEL: FLIGHT_INFO,
    ZoneKind.BOARDING_INFO_PANEL: BOARDING_INFO,
    ZoneKind.BAGGAGE_INFO_PANEL: BAGGAGE_INFO,
}


def _panel_query(a: AgentState, sim: "Simulation", kind: ZoneKind) -> str:
    """Walk to the info panel of ``kind`` (if not there) and ask it."""
    if sim.amap.zone_at(a.position).kind is not kind:
        return _move_towards(a, sim, _nearest_of(a, sim, kind))
    if a.awaiting is not None:
        return "wait"
    panel = sim.panel_at(a.position)
    info = _PANEL_INFO[kind]
    sim.send(
        Message(Performative.REQUEST, a.aid, panel, Provide(product_for(a, info), panel))
    )
    a.awaiting = panel
    return "request"


def _query(kind: ZoneKind, service: str):
    def action(a: AgentState, sim: "Simulation") -> str:
        if a.uses_ami(service):
            unit = _discover(a, sim, service)
            if unit is not None:
                return unit
            if service in a.known:
                return "informed"
        return _panel_query(a, sim, kind)

    return action


def _move_to_panel(kind: ZoneKind):
    def action(a: AgentState, sim: "Simulation") -> str:
        return _move_towards(a, sim, _nearest_of(a, sim, kind))

    return action


def _move_to_known(service: str):
    def action(a: AgentState, sim: "Simulation") -> str:
        return _move_towards(a, sim, a.known[service][1])

    return action


def _request_known(service: str):
    def action(a: AgentState, sim: "Simulation") -> str:
        return _request(a, sim, service)

    return action


def move_to_control(a: AgentState, sim: "Simulation") -> str:
    if a.control_target is None:
        if a.uses_ami(PASSPORT):
            unit = _discover(a, sim, PASSPORT)
            if unit is not None:
                return unit
        if PASSPORT in a.known and a.uses_ami(PASSPORT):
            a.control_target = a.known[PASSPORT]
        else:
            aid, pos = sim.nearest_provider(a.position, ZoneKind.PASSPORT_CONTROL)
            a.control_target = (aid, pos)
            a.known[PASSPORT] = (aid, pos)
    return _move_towards(a, sim, a.control_target[1])


def pass_control(a: AgentState, sim: "Simulation") -> str:
    return _request(a, sim, PASSPORT)


def _skip_shopping(a: AgentState, sim: "Simulation", why: str) -> None:
    a.facts.add("skip-shopping")
    sim.event(a, "shopping-skipped", why)


def _shop_exit_distance(sim: "Simulation", a: AgentState, shop: Position) -> int:
    if a.outgoing:
        return sim.amap.distance(shop, sim.gate_of(a.flight))
    return sim.amap.distance(shop, sim.amap.positions(ZoneKind.EXIT)[0])


def move_to_shops(a: AgentState, sim: "Simulation") -> str:
    """Search without AmI: reach the shop corridor, then random-walk it."""
    params = sim.params
    pessimistic = 2 * sim.amap.diameter + params.service_times.expected_shop_time()
    if a.wanted_shop is None:
        if not sim.shop_cells or max(a.profile.interests.values()) <= 0.0:
            _skip_shopping(a, sim, "no-interest")
            return "skip"
        if not decide_shopping(sim.tick, pessimistic, a.deadline, params.safety_margin):
            _skip_shopping(a, sim, "no-time")
            return "skip"
        a.wanted_shop = select_interesting_shop(a.profile, sim.shop_names)
        a.corridor = sim.shop_corridor
    elif not decide_shopping(sim.tick, pessimistic, a.deadline, params.safety_margin):
        _skip_shopping(a, sim, "gave-up")
        return "skip"
    if a.position not in a.corridor:
        entry = min(a.corridor, key=lambda p: (sim.amap.distance(a.position, p), p.x, p.y))
        return _move_towards(a, sim, entry)
    options = None
    if params.shop_memory:
        options = [
            q
            for q in sim.amap.neighbours(a.position)
            if q in a.corridor and not (q in sim.shop_cells and q in a.visited)
        ] or None
    a.position = random_walk_step(sim.amap, a.position, sim.rng, options or a.corridor)
    a.visited.add(a.position)
    sim.note_zone(a)
    return "walk"


def move_to_interesting_shop(a: AgentState, sim: "Simulation") -> str:
    """Search with AmI: ask the facilitator for the nearest shop of the wanted type."""
    if a.wanted_shop is None:
        if not sim.shop_cells or max(a.profile.interests.values()) <= 0.0:
            _skip_shopping(a, sim, "no-interest")
            return "skip"
        a.wanted_shop = select_interesting_shop(a.profile, sim.shop_names)
    service = SHOPPING + a.wanted_shop
    if not a.uses_ami(service):
        return move_to_shops(a, sim)
    if "shop-decided" not in a.facts:
        unit = _discover(a, sim, service)
        if unit is not None:
            return unit
        if service not in a.known:
            return move_to_shops(a, sim)
        a.facts.add("shop-decided")
        shop = a.known[service][1]
        estimate = (
            sim.amap.distance(a.position, shop)
            + sim.params.service_times.expected_shop_time()
            + _shop_exit_distance(sim, a, shop)
        )
        if not decide_shopping(sim.tick, estimate, a.deadline, sim.params.safety_margin):
            _skip_shopping(a, sim, "no-time")
            return "skip"
    return _move_towards(a, sim, a.known[service][1])


def shopping(a: AgentState, sim: "Simulation") -> str:
    z = sim.amap.zone_at(a.position)
    service = SHOPPING + sim.shop_names[z.shop_type]
    if service not in a.known:
        a.known[service] = (sim.provider_at(a.position), a.position)
    return _request(a, sim, service)


def move_to_gate(a: AgentState, sim: "Simulation") -> str:
    gate = a.known[BOARDING][1]
    if a.position != gate:
        return _move_towards(a, sim, gate)
    return _request(a, sim, BOARDING)


def move_to_output(a: AgentState, sim: "Simulation") -> str:
    return _move_towards(a, sim, sim.amap.positions(ZoneKind.EXIT)[0])


ACTIONS: dict[str, Callable[[AgentState, "Simulation"], str]] = {
    "move-to-checkin-info": _move_to_panel(ZoneKind.FLIGHT_INFO_PANEL),
    "query-checkin": _query(ZoneKind.FLIGHT_INFO_PANEL, CHECKIN),
    "move-to-checkin": _move_to_known(CHECKIN),
    "request-checkin": _request_known(CHECKIN),
    "move-to-control": move_to_control,
    "pass-control": pass_control,
    "move-to-shops": move_to_shops,
    "move-to-interestingshop": move_to_interesting_shop,
    "shopping": shopping,
    "move-to-gate-info": _move_to_panel(ZoneKind.BOARDING_INFO_PANEL),
    "query-gate": _query(ZoneKind.BOARDING_INFO_PANEL, BOARDING),
    "move-to-gate": move_to_gate,
    "move-to-baggage-info": _move_to_panel(ZoneKind.BAGGAGE_INFO_PANEL),
    "ask-baggage-info": _query(ZoneKind.BAGGAGE_INFO_PANEL, BAGGAGE),
    "move-to-belt": _move_to_known(BAGGAGE),
    "collect-baggage": _request_known(BAGGAGE),
    "move-to-output": move_to_output,
}


# --------------------------------------------------------------------------
# reasoning step

def read_inbox(a: AgentState, sim: "Simulation") -> bool:
    """Process delivered messages. True if a reply was emitted (uses the tick)."""
    emitted = False
    by_cid = {c.cid: s for s, c in a.conversations.items()}
    for m in sim.bus.inbox(a.aid):
        service = by_cid.get(m.conversation) if m.conversation else None
        if m.performative is Performative.INFORM:
            a.believe(m.content)
        if service is not None:
            conv, out = advance(a.conversations[service], m)
            a.conversations[service] = conv
            for o in out:
                sim.send(o)
                emitted = emitted or o.performative is not Performative.REFUSE
            if conv.ready and service not in a.known:
                a.known[service] = (conv.provider, conv.provider_position)
        elif m.performative is Performative.INFORM and m.sender == a.awaiting:
            # an info panel answered
            a.awaiting = None
            sim.event(a, "informed", m.sender)
    return emitted


def bdi_step(a: AgentState, sim: "Simulation") -> list[str]:
    """One tick of deliberation for a live user agent; returns executed units."""
    units: list[str] = []
    if read_inbox(a, sim):
        units.append("reply")
        _record(a, units[-1])
        _pop_done(a, sim)
        return units
    _pop_done(a, sim)
    top = a.stack.top()
    if top is None:
        sim.finish(a)
        return units
    try:
        unit = ACTIONS[top.action](a, sim)
    except NoPathError as exc:
        log.warning("agent %d cannot %s: %s", a.aid, top.action, exc)
        sim.fail(a, f"{top.action}: {exc}")
        return units
    units.append(unit)
    _record(a, unit)
    _pop_done(a, sim)
    if not a.stack and a.alive:
        sim.finish(a)
    return units


def _record(a: AgentState, unit: str) -> None:
    top = a.stack.top()
    if top is not None and (not a.executed or a.executed[-1] != top.action):
        a.executed.append(top.action)


def _pop_done(a: AgentState, sim: "Simulation") -> None:
    while a.stack:
        top = a.stack.top()
        if not CONDITIONS[top.done_when](a, sim):
            return
        a.stack.pop()
        sim.event(a, "intention-done", top.action)


# --------------------------------------------------------------------------
# population

def random_profile(
    name: str, rng: random.Random, shop_names: Sequence[str], flight: str
) -> Profile:
    """Draw order: suitcases, danger perception, one interest weight per shop type."""
    suitcases = rng.randint(0, 3)
    danger = rng.random()
    interests = {s: rng.random() for s in shop_names}
    return Profile.build(name, interests, suitcases, danger, flight)
