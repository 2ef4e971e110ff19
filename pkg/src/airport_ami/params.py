"""Run parameters. Flat on purpose: every field is one key in a config file."""

from __future__ import annotations

import string
from dataclasses import dataclass, fields

from .metrics import SatisfactionWeights
from .services import ServiceTimes


@dataclass(frozen=True)
class SetupParameters:
    # populations
    ingoing_nonami: int = 50
    ingoing_ami: int = 50
    outgoing_nonami: int = 50
    outgoing_ami: int = 50
    # iterations an outgoing agent has, from entering, to board its flight
    flight_deadline: int = 200
    # airport size
    passport_controls: int = 3
    checkin_counters: int = 6
    shops_per_type: int = 3
    shop_types: int = 3
    boarding_gates: int = 4
    baggage_belts: int = 3
    flights: int = 4
    width: int = 33
    height: int = 33
    # agents enter uniformly over [0, arrival_window)
    arrival_window: int = 100
    # service times
    checkin_base: int = 3
    passport_base: int = 3
    shop_base: int = 3
    belt_base: int = 3
    gate_base: int = 3
    per_suitcase: int = 2
    danger_factor: int = 5
    noise_max: int = 2
    # satisfaction weights
    w_miss: float = 100.0
    w_shop: float = 10.0
    w_queue: float = 1.0
    # behaviour
    safety_margin: int = 10
    facilitator_capacity: int = 8
    evaluator: bool = False
    shop_memory: bool = False
    max_ticks: int = 0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")
        if self.flight_deadline <= 0:
            raise ValueError("flight_deadline must be > 0")
        if not 1 <= self.shop_types <= 10:
            raise ValueError("shop_types must be between 1 and 10")
        if self.flights < 1:
            raise ValueError("flights must be >= 1")
        if self.facilitator_capacity < 1:
            raise ValueError("facilitator_capacity must be >= 1")

    @property
    def service_times(self) -> ServiceTimes:
        return ServiceTimes(
            checkin_base=self.checkin_base,
            passport_base=self.passport_base,
            shop_base=self.shop_base,
            belt_base=self.belt_base,
            gate_base=self.gate_base,
            per_suitcase=self.per_suitcase,
            danger_factor=self.danger_factor,
            noise_max=self.noise_max,
        )

    @property
    def weights(self) -> SatisfactionWeights:
        return SatisfactionWeights(miss=self.w_miss, shop=self.w_shop, queue=self.w_queue)

    @property
    def tick_cap(self) -> int:
        return self.max_ticks or 10 * self.flight_deadline

    @property
    def shop_names(self) -> list[str]:
        return list(string.ascii_uppercase[: self.shop_types])

    @property
    def user_count(self) -> int:
        return self.ingoing_nonami + self.ingoing_ami + self.outgoing_nonami + self.outgoing_ami
