import random

import pytest

from airport_ami.messaging import Message, Performative
from airport_ami.ontology import Product, Profile, Provide
from airport_ami.params import SetupParameters
from airport_ami.engine import Simulation
from airport_ami.services import (
    ProviderState,
    QueueError,
    ServiceTimes,
    enqueue,
    service_time,
    tick_provider,
)
from airport_ami.world import Position, Zone, ZoneKind

EXACT = ServiceTimes(noise_max=0)


def profile(suitcases=0, danger=0.0):
    return Profile.build("p", {"A": 0.5}, suitcases, danger, "FL0")


def test_checkin_no_bags():
    assert service_time(ZoneKind.CHECKIN_COUNTER, profile(0), random.Random(0), EXACT) == 3


def test_passport_max_danger():
    assert service_time(ZoneKind.PASSPORT_CONTROL, profile(danger=1.0), random.Random(0), EXACT) == 8


def test_passport_rounds_half_up():
    assert service_time(ZoneKind.PASSPORT_CONTROL, profile(danger=0.5), random.Random(0), EXACT) == 3 + 3


@pytest.mark.parametrize(
    "kind,expected",
    [
        (ZoneKind.CHECKIN_COUNTER, 3 + 2 * 2),
        (ZoneKind.BAGGAGE_BELT, 3 + 2 * 2),
        (ZoneKind.SHOP, 3),
        (ZoneKind.BOARDING_GATE, 3),
    ],
)
def test_formulas(kind, expected):
    assert service_time(kind, profile(suitcases=2), random.Random(0), EXACT) == expected


def test_more_bags_take_longer_for_same_draw():
    a = service_time(ZoneKind.CHECKIN_COUNTER, profile(3), random.Random(4))
    b = service_time(ZoneKind.CHECKIN_COUNTER, profile(1), random.Random(4))
    assert a > b


def test_noise_range_and_single_draw():
    rng = random.Random(1)
    seen = set()
    for _ in range(500):
        ref = random.Random(rng.random())
        probe = random.Random()
        probe.setstate(ref.getstate())
        t = service_time(ZoneKind.SHOP, profile(), ref)
        seen.add(t)
        probe.randint(0, 2)
        assert ref.random() == probe.random()
    assert seen == {3, 4, 5}


def test_panels_are_instant_and_draw_nothing():
    rng = random.Random(3)
    state = rng.getstate()
    for kind in (ZoneKind.FLIGHT_INFO_PANEL, ZoneKind.BOARDING_INFO_PANEL, ZoneKind.BAGGAGE_INFO_PANEL):
        assert service_time(kind, profile(), rng) == 0
    assert rng.getstate() == state


def test_non_service_kind_rejected():
    with pytest.raises(ValueError):
        service_time(ZoneKind.WALL, profile(), random.Random(0))


def provider():
    return ProviderState(9, Zone(ZoneKind.SHOP, 0), Position(0, 0))


def test_enqueue_positions_and_duplicates():
    p = provider()
    assert enqueue(p, 1, 0) == 0
    assert enqueue(p, 2, 0) == 1
    with pytest.raises(QueueError):
        enqueue(p, 1, 1)


def test_idle_empty_provider_does_nothing():
    p = provider()
    assert tick_provider(p, 0, lambda aid: 5) is None
    assert p.idle


def test_three_agent_hand_trace():
    # A and B arrive at tick 0, C at tick 2; service 4, 2 and 3 ticks.
    # A: 0-4, B waits until 4 and runs 4-6, C waits 2-6 and runs 6-9.
    durations = {1: 4, 2: 2, 3: 3}
    p = provider()
    draws = []

    def draw(aid):
        draws.append(aid)
        return durations[aid]

    released = {}
    enqueue(p, 1, 0)
    enqueue(p, 2, 0)
    for t in range(12):
        if t == 2:
            enqueue(p, 3, 2)
        done = tick_provider(p, t, draw)
        if done is not None:
            released[done] = t
    assert released == {1: 4, 2: 6, 3: 9}
    assert {r.aid: r.wait for r in p.records} == {1: 0, 2: 4, 3: 4}
    assert draws == [1, 2, 3]  # each head dequeued exactly once


def test_zero_duration_still_takes_a_tick():
    p = provider()
    enqueue(p, 1, 0)
    tick_provider(p, 0, lambda aid: 0)
    assert tick_provider(p, 0, lambda aid: 0) is None
    assert tick_provider(p, 1, lambda aid: 0) == 1


def test_remove_current_starts_next():
    p = provider()
    enqueue(p, 1, 0)
    enqueue(p, 2, 0)
    tick_provider(p, 0, lambda aid: 10)
    rec = p.remove(1, 3, lambda aid: 10)
    assert rec.removed and p.current == 2
    assert p._open[2].started == 3


def test_remove_waiting_agent():
    p = provider()
    for aid in (1, 2, 3):
        enqueue(p, aid, 0)
    tick_provider(p, 0, lambda aid: 10)
    p.remove(2, 1, lambda aid: 10)
    assert list(p.queue) == [3]
    assert p.remove(2, 1, lambda aid: 10) is None


def test_same_tick_arrivals_queue_by_aid():
    sim = Simulation(
        SetupParameters(ingoing_nonami=2, ingoing_ami=0, outgoing_nonami=0, outgoing_ami=0, arrival_window=0)
    )
    belt = sim.amap.positions(ZoneKind.BAGGAGE_BELT)[0]
    prov = sim.providers[sim.provider_at(belt)]
    low, high = sorted(sim.users, key=lambda u: u.aid)
    for u in (high, low):
        u.status = "active"
        u.position = belt
        sim.send(Message(Performative.REQUEST, u.aid, prov.aid, Provide(Product("Baggage-Delivery"), prov.aid)))
    sim.clock.advance()
    sim.bus.advance(sim.tick)
    sim._step_provider(prov)
    assert list(prov.queue) == [low.aid, high.aid]


def test_request_from_elsewhere_refused():
    sim = Simulation(
        SetupParameters(ingoing_nonami=1, ingoing_ami=0, outgoing_nonami=0, outgoing_ami=0, arrival_window=0)
    )
    belt = sim.amap.positions(ZoneKind.BAGGAGE_BELT)[0]
    prov = sim.providers[sim.provider_at(belt)]
    u = sim.users[0]
    u.status = "active"
    u.position = Position(0, 0)
    sim.send(Message(Performative.REQUEST, u.aid, prov.aid, Provide(Product("Baggage-Delivery"), prov.aid)))
    sim.clock.advance()
    sim.bus.advance(sim.tick)
    sim._step_provider(prov)
    assert not prov.queue
    assert sim.trace[-1].performative is Performative.REFUSE
