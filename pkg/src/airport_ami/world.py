"""Airport grid: zone layout, connectivity and 4-neighbour movement."""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

if TYPE_CHECKING:
    from .params import SetupParameters


class LayoutError(ValueError):
    """Raised when a configuration cannot be laid out on the grid."""


class NoPathError(LookupError):
    def __init__(self, start: "Position", target: "Position"):
        super().__init__(f"no path from {tuple(start)} to {tuple(target)}")
        self.start = start
        self.target = target


class Position(NamedTuple):
    x: int
    y: int


class Place(NamedTuple):
    building: str = "Airport"
    floor: int = 0


AIRPORT = Place()


class ZoneKind(enum.Enum):
    ENTRANCE = "Entrance"
    FLIGHT_INFO_PANEL = "FlightInfoPanel"
    CHECKIN_COUNTER = "CheckinCounter"
    PASSPORT_CONTROL = "PassportControl"
    SHOP = "Shop"
    BOARDING_INFO_PANEL = "BoardingInfoPanel"
    BOARDING_GATE = "BoardingGate"
    BAGGAGE_INFO_PANEL = "BaggageInfoPanel"
    BAGGAGE_BELT = "BaggageBelt"
    WALL = "Wall"
    OPEN = "Open"
    EXIT = "Exit"

    @property
    def is_panel(self) -> bool:
        return self in PANEL_KINDS

    @property
    def is_service(self) -> bool:
        return self in SERVICE_KINDS


PANEL_KINDS = frozenset(
    {ZoneKind.FLIGHT_INFO_PANEL, ZoneKind.BOARDING_INFO_PANEL, ZoneKind.BAGGAGE_INFO_PANEL}
)
SERVICE_KINDS = frozenset(
    {
        ZoneKind.CHECKIN_COUNTER,
        ZoneKind.PASSPORT_CONTROL,
        ZoneKind.SHOP,
        ZoneKind.BAGGAGE_BELT,
        ZoneKind.BOARDING_GATE,
    }
)


@dataclass(frozen=True)
class Zone:
    kind: ZoneKind
    shop_type: int | None = None

    def __post_init__(self):
        if (self.kind is ZoneKind.SHOP) != (self.shop_type is not None):
            raise ValueError("shop_type is required for shops and only for shops")
        if self.shop_type is not None and not 0 <= self.shop_type <= 9:
            raise ValueError(f"shop_type out of range: {self.shop_type}")

    @property
    def char(self) -> str:
        if self.kind is ZoneKind.SHOP:
            return str(self.shop_type)
        return _KIND_CHARS[self.kind]

    @classmethod
    def from_char(cls, ch: str) -> "Zone":
        if ch.isdigit():
            return cls(ZoneKind.SHOP, int(ch))
        try:
            return cls(_CHAR_KINDS[ch])
        except KeyError:
            raise ValueError(f"unknown map character {ch!r}") from None


_KIND_CHARS = {
    ZoneKind.OPEN: ".",
    ZoneKind.WALL: "#",
    ZoneKind.ENTRANCE: "E",
    ZoneKind.EXIT: "X",
    ZoneKind.FLIGHT_INFO_PANEL: "F",
    ZoneKind.CHECKIN_COUNTER: "C",
    ZoneKind.PASSPORT_CONTROL: "P",
    ZoneKind.BOARDING_INFO_PANEL: "I",
    ZoneKind.BOARDING_GATE: "G",
    ZoneKind.BAGGAGE_INFO_PANEL: "N",
    ZoneKind.BAGGAGE_BELT: "B",
}
_CHAR_KINDS = {v: k for k, v in _KIND_CHARS.items()}

OPEN = Zone(ZoneKind.OPEN)
WALL = Zone(ZoneKind.WALL)

# +x, -x, +y, -y; fixes tie-breaking everywhere a neighbour is chosen
NEIGHBOUR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(eq=False)
class AirportMap:
    """Immutable grid of zones. ``cells[y][x]`` holds the zone at (x, y)."""

    width: int
    height: int
    cells: tuple[tuple[Zone, ...], ...]
    index: dict[Zone, tuple[Position, ...]] = field(init=False)
    _dist_cache: dict[Position, dict[Position, int]] = field(init=False, repr=False)
    _adjacent: dict[Position, list[Position]] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.cells) != self.height or any(len(r) != self.width for r in self.cells):
            raise LayoutError("cell grid does not match width/height")
        index: dict[Zone, list[Position]] = {}
        for y, row in enumerate(self.cells):
            for x, zone in enumerate(row):
                index.setdefault(zone, []).append(Position(x, y))
        self.index = {z: tuple(ps) for z, ps in index.items()}
        self._dist_cache = {}
        self._adjacent = {}

    def __eq__(self, other):
        if not isinstance(other, AirportMap):
            return NotImplemented
        return self.cells == other.cells

    def __hash__(self):
        return hash(self.cells)

    def zone_at(self, p: Position) -> Zone:
        return self.cells[p.y][p.x]

    def in_bounds(self, p: Position) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height

    def is_open(self, p: Position) -> bool:
        return self.in_bounds(p) and self.cells[p.y][p.x].kind is not ZoneKind.WALL

    def neighbours(self, p: Position) -> list[Position]:
        out = self._adjacent.get(p)
        if out is None:
            out = [
                q
                for q in (Position(p.x + dx, p.y + dy) for dx, dy in NEIGHBOUR_OFFSETS)
                if self.is_open(q)
            ]
            self._adjacent[p] = out
        return list(out)

    def positions(self, kind: ZoneKind, shop_type: int | None = None) -> tuple[Position, ...]:
        """All cells of ``kind`` in row-major order (optionally one shop type)."""
        if kind is ZoneKind.SHOP and shop_type is not None:
            return self.index.get(Zone(kind, shop_type), ())
        found = [p for z, ps in self.index.items() if z.kind is kind for p in ps]
        return tuple(sorted(found, key=lambda p: (p.y, p.x)))

    def count(self, kind: ZoneKind) -> int:
        return len(self.positions(kind))

    def open_cells(self) -> list[Position]:
        return [
            Position(x, y)
            for y in range(self.height)
            for x in range(self.width)
            if self.cells[y][x].kind is not ZoneKind.WALL
        ]

    @property
    def diameter(self) -> int:
        """Manhattan bound on any wall-free path; used as a pessimistic estimate."""
        return self.width + self.height - 2

    def distances_to(self, target: Position) -> dict[Position, int]:
        """BFS distance field towards ``target`` (cached per target)."""
        cached = self._dist_cache.get(target)
        if cached is not None:
            return cached
        if not self.is_open(target):
            raise ValueError(f"target {tuple(target)} is not an open cell")
        dist = {target: 0}
        frontier = deque([target])
        while frontier:
            p = frontier.popleft()
            d = dist[p] + 1
            for q in self.neighbours(p):
                if q not in dist:
                    dist[q] = d
                    frontier.append(q)
        self._dist_cache[target] = dist
        return dist

    def distance(self, start: Position, target: Position) -> int:
        d = self.distances_to(target).get(start)
        if d is None:
            raise NoPathError(start, target)
        return d

    def next_step(self, at: Position, target: Position) -> Position:
        """First cell of ``shortest_path(at, target)``; ``at`` itself if already there."""
        if at == target:
            return at
        dist = self.distances_to(target)
        d = dist.get(at)
        if d is None:
            raise NoPathError(at, target)
        for q in self.neighbours(at):
            if dist.get(q) == d - 1:
                return q
        raise NoPathError(at, target)  # pragma: no cover - BFS field is consistent

    def to_text(self) -> str:
        return "\n".join("".join(z.char for z in row) for row in self.cells) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AirportMap":
        rows = [line for line in text.splitlines() if line.strip()]
        if not rows:
            raise LayoutError("empty map text")
        cells = tuple(tuple(Zone.from_char(ch) for ch in row) for row in rows)
        return cls(width=len(rows[0]), height=len(rows), cells=cells)


def shortest_path(amap: AirportMap, start: Position, target: Position) -> list[Position]:
    """Minimal 4-neighbour path from ``start`` to ``target``, excluding ``start``.

    Among equal-length paths, each step takes the first neighbour in +x, -x, +y, -y
    order that lies on a shortest route.
    """
    for p in (start, target):
        if not amap.is_open(p):
            raise ValueError(f"{tuple(p)} is a wall or out of bounds")
    path = []
    at = start
    while at != target:
        at = amap.next_step(at, target)
        path.append(at)
    return path


def random_walk_step(
    amap: AirportMap,
    at: Position,
    rng: random.Random,
    within: Iterable[Position] | None = None,
) -> Position:
    """Uniformly chosen open neighbour of ``at``; consumes exactly one draw.

    ``within`` optionally restricts the candidate cells (e.g. a shop corridor).
    """
    options = amap.neighbours(at)
    if within is not None:
        allowed = within if isinstance(within, (set, frozenset)) else set(within)
        options = [q for q in options if q in allowed]
    if not options:
        raise NoPathError(at, at)
    return options[rng.randrange(len(options))]


def nearest(
    amap: AirportMap, start: Position, candidates: Sequence[tuple[int, Position]]
) -> tuple[int, Position]:
    """Pick the (key, position) closest by path from ``start``; ties -> lowest key."""
    best = None
    for key, pos in candidates:
        try:
            d = amap.distance(start, pos)
        except NoPathError:
            continue
        cand = (d, key, pos)
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None:
        raise LookupError("no reachable candidate")
    return best[1], best[2]


# --------------------------------------------------------------------------
# layout

@dataclass(frozen=True)
class LayoutRows:
    entrance: int
    flight_info: int
    checkin: int
    wall: int
    shops: int
    boarding_info: int
    baggage_info: int
    belts: int
    gates: int


def layout_rows(height: int) -> LayoutRows:
    h = height - 1
    rows = LayoutRows(
        entrance=0,
        flight_info=round(0.10 * h),
        checkin=round(0.20 * h),
        wall=round(0.33 * h),
        shops=round(0.46 * h),
        boarding_info=round(0.58 * h),
        baggage_info=round(0.66 * h),
        belts=round(0.80 * h),
        gates=h,
    )
    values = list(vars(rows).values())
    if any(b <= a for a, b in zip(values, values[1:])):
        raise LayoutError(f"grid height {height} too small for the band layout")
    return rows


def spread(n: int, width: int) -> list[int]:
    """Columns for ``n`` evenly spaced items on a row of ``width`` cells."""
    return [(2 * i + 1) * width // (2 * n) for i in range(n)]


def build_layout(config: "SetupParameters") -> AirportMap:
    width, height = config.width, config.height
    if width < 5:
        raise LayoutError(f"grid width {width} too small")
    rows = layout_rows(height)

    counts = {
        "passport_controls": config.passport_controls,
        "checkin_counters": config.checkin_counters,
        "shops_per_type": config.shops_per_type,
        "shop_types": config.shop_types,
        "boarding_gates": config.boarding_gates,
        "baggage_belts": config.baggage_belts,
    }
    for name, n in counts.items():
        if n < 0:
            raise LayoutError(f"{name} must be >= 0, got {n}")
    if config.shop_types > 10:
        raise LayoutError("at most 10 shop types are supported")
    outgoing = config.outgoing_nonami + config.outgoing_ami
    ingoing = config.ingoing_nonami + config.ingoing_ami
    if outgoing and config.boarding_gates == 0:
        raise LayoutError("outgoing agents need at least one boarding gate")
    if outgoing and config.checkin_counters == 0:
        raise LayoutError("outgoing agents need at least one check-in counter")
    if ingoing and config.boarding_gates == 0:
        raise LayoutError("ingoing agents arrive at a boarding gate; need at least one")
    if ingoing and config.baggage_belts == 0:
        raise LayoutError("ingoing agents need at least one baggage belt")
    if (ingoing or outgoing) and config.passport_controls == 0:
        raise LayoutError("user agents need at least one passport control")

    n_shops = config.shops_per_type * config.shop_types
    for name, n in (
        ("check-in counters", config.checkin_counters),
        ("passport controls", config.passport_controls),
        ("shops", n_shops),
        ("boarding gates", config.boarding_gates),
        ("baggage belts", config.baggage_belts),
    ):
        if n > width:
            raise LayoutError(f"{n} {name} do not fit on a row of width {width}")

    grid = [[OPEN] * width for _ in range(height)]

    def put(x: int, y: int, zone: Zone):
        grid[y][x] = zone

    mid = width // 2
    put(mid - 1, rows.entrance, Zone(ZoneKind.ENTRANCE))
    put(mid + 1, rows.entrance, Zone(ZoneKind.EXIT))
    put(1, rows.flight_info, Zone(ZoneKind.FLIGHT_INFO_PANEL))
    for x in spread(config.checkin_counters, width):
        put(x, rows.checkin, Zone(ZoneKind.CHECKIN_COUNTER))

    grid[rows.wall] = [WALL] * width
    if config.passport_controls:
        for x in spread(config.passport_controls, width):
            put(x, rows.wall, Zone(ZoneKind.PASSPORT_CONTROL))
    else:
        put(mid, rows.wall, OPEN)

    for i, x in enumerate(spread(n_shops, width)):
        put(x, rows.shops, Zone(ZoneKind.SHOP, i % config.shop_types))
    put(width - 2, rows.boarding_info, Zone(ZoneKind.BOARDING_INFO_PANEL))
    put(width - 2, rows.baggage_info, Zone(ZoneKind.BAGGAGE_INFO_PANEL))
    for x in spread(config.baggage_belts, width):
        put(x, rows.belts, Zone(ZoneKind.BAGGAGE_BELT))
    for x in spread(config.boarding_gates, width):
        put(x, rows.gates, Zone(ZoneKind.BOARDING_GATE))

    amap = AirportMap(width, height, tuple(tuple(r) for r in grid))
    check_connectivity(amap)
    return amap


def check_connectivity(amap: AirportMap) -> None:
    """Every open cell must be reachable from the entrance (or first open cell)."""
    entrances = amap.positions(ZoneKind.ENTRANCE)
    cells = amap.open_cells()
    if not cells:
        raise LayoutError("map has no open cells")
    origin = entrances[0] if entrances else cells[0]
    reach = amap.distances_to(origin)
    missing = [p for p in cells if p not in reach]
    if missing:
        raise LayoutError(f"{len(missing)} open cells unreachable, e.g. {tuple(missing[0])}")
