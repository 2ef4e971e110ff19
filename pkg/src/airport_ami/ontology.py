"""Ontology concepts, predicates and the textual content codec.

The content syntax follows the airport message listings, e.g.::

    isProvider (Place (Building Airport ; Floor 0); Position: Belt (patch 18 6) ;
    AID: 51 ; Service (Name: Baggage-Delivery) )

See ``docs/content-grammar.ebnf`` for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .world import Place, Position

_WORD = r"[^\s();:,]+"
_WORD_RE = re.compile(rf"^{_WORD}$")
_TOKEN_RE = re.compile(rf"\s*([();:,]|{_WORD})")


class ContentParseError(ValueError):
    def __init__(self, message: str, token: str | None = None, index: int | None = None):
        where = "end of input" if token is None else f"token {token!r} at offset {index}"
        super().__init__(f"{message} ({where})")
        self.token = token
        self.index = index


def _check_word(kind: str, value: str) -> None:
    if not isinstance(value, str) or not _WORD_RE.match(value):
        raise ValueError(f"{kind} must be a non-empty word without spaces or ();:, got {value!r}")


# --------------------------------------------------------------------------
# concepts

@dataclass(frozen=True)
class Feature:
    name: str
    value: str

    def __post_init__(self):
        _check_word("feature name", self.name)
        _check_word("feature value", self.value)


@dataclass(frozen=True)
class Service:
    name: str

    def __post_init__(self):
        _check_word("service name", self.name)


@dataclass(frozen=True)
class Product:
    name: str
    characteristics: tuple[Feature, ...] = ()

    def __post_init__(self):
        _check_word("product name", self.name)
        object.__setattr__(self, "characteristics", tuple(self.characteristics))

    def feature(self, name: str) -> str | None:
        for f in self.characteristics:
            if f.name == name:
                return f.value
        return None


@dataclass(frozen=True)
class Context:
    name: str
    characteristics: tuple[Feature, ...] = ()

    def __post_init__(self):
        _check_word("context name", self.name)
        object.__setattr__(self, "characteristics", tuple(self.characteristics))


INTEREST_PREFIX = "shopping-interest."
BAGGAGE_COUNT = "baggage-count"
DANGER_PERCEPTION = "danger-perception"
FLIGHT_NUMBER = "flight-number"


@dataclass(frozen=True)
class Profile:
    """Passenger profile; four attribute groups carried as features."""

    name: str
    characteristics: tuple[Feature, ...]

    def __post_init__(self):
        _check_word("profile name", self.name)
        feats = tuple(self.characteristics)
        object.__setattr__(self, "characteristics", feats)
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise ValueError("duplicate profile feature")
        singles = {BAGGAGE_COUNT, DANGER_PERCEPTION, FLIGHT_NUMBER}
        interests = [n for n in names if n.startswith(INTEREST_PREFIX)]
        unknown = set(names) - singles - set(interests)
        if unknown:
            raise ValueError(f"unknown profile features: {sorted(unknown)}")
        if not interests:
            raise ValueError("profile needs at least one shopping-interest weight")
        missing = singles - set(names)
        if missing:
            raise ValueError(f"profile is missing {sorted(missing)}")
        for shop, w in self.interests.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"shopping interest {shop}={w} outside [0, 1]")
        if self.suitcases < 0:
            raise ValueError("baggage count must be >= 0")
        if not 0.0 <= self.danger <= 1.0:
            raise ValueError("danger perception outside [0, 1]")

    @classmethod
    def build(
        cls,
        name: str,
        interests: dict[str, float],
        suitcases: int,
        danger: float,
        flight: str,
    ) -> "Profile":
        feats = [Feature(INTEREST_PREFIX + shop, repr(float(w))) for shop, w in interests.items()]
        feats += [
            Feature(BAGGAGE_COUNT, str(int(suitcases))),
            Feature(DANGER_PERCEPTION, repr(float(danger))),
            Feature(FLIGHT_NUMBER, flight),
        ]
        return cls(name, tuple(feats))

    def _get(self, name: str) -> str:
        for f in self.characteristics:
            if f.name == name:
                return f.value
        raise KeyError(name)

    @property
    def interests(self) -> dict[str, float]:
        return {
            f.name[len(INTEREST_PREFIX):]: float(f.value)
            for f in self.characteristics
            if f.name.startswith(INTEREST_PREFIX)
        }

    @property
    def suitcases(self) -> int:
        return int(self._get(BAGGAGE_COUNT))

    @property
    def danger(self) -> float:
        return float(self._get(DANGER_PERCEPTION))

    @property
    def flight(self) -> str:
        return self._get(FLIGHT_NUMBER)


# --------------------------------------------------------------------------
# predicates

@dataclass(frozen=True)
class HasLocation:
    place: Place
    position: Position
    aid: int
    zone: str = ""


@dataclass(frozen=True)
class HasServices:
    place: Place
    position: Position
    services: tuple[Service, ...]
    zone: str = ""

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))


@dataclass(frozen=True)
class IsProvider:
    place: Place
    position: Position
    aid: int
    service: Service
    zone: str = ""


@dataclass(frozen=True)
class HasContext:
    what: Context
    who: int


@dataclass(frozen=True)
class HasProfile:
    profile: Profile
    aid: int


@dataclass(frozen=True)
class Provide:
    """The ontology's single action: ask agent ``aid`` to provide ``product``."""

    product: Product
    aid: int


Predicate = Union[HasLocation, HasServices, IsProvider, HasContext, HasProfile, Provide]
PREDICATE_TYPES = (HasLocation, HasServices, IsProvider, HasContext, HasProfile, Provide)


# --------------------------------------------------------------------------
# rendering

def _place(p: Place) -> str:
    _check_word("building", str(p.building))
    return f"Place (Building {p.building} ; Floor {int(p.floor)})"


def _position(pos: Position, zone: str) -> str:
    label = f"{zone} " if zone else ""
    return f"Position: {label}(patch {int(pos.x)} {int(pos.y)})"


def _service(s: Service) -> str:
    return f"Service (Name: {s.name})"


def _features(feats: Iterable[Feature]) -> str:
    body = " , ".join(f"{f.name} {f.value}" for f in feats)
    return f"Characteristics: {body} )" if body else "Characteristics: )"


def _named(head: str, name: str, feats: Iterable[Feature]) -> str:
    return f"{head} (Name: {name} ; {_features(feats)}"


def render_content(p: Predicate) -> str:
    if isinstance(p, IsProvider):
        return (
            f"isProvider ({_place(p.place)}; {_position(p.position, p.zone)} ; "
            f"AID: {p.aid} ; {_service(p.service)} )"
        )
    if isinstance(p, HasLocation):
        return f"HasLocation ({_place(p.place)}; {_position(p.position, p.zone)} ; AID: {p.aid} )"
    if isinstance(p, HasServices):
        services = " , ".join(_service(s) for s in p.services)
        tail = f"Services: {services} )" if services else "Services: )"
        return f"HasServices ({_place(p.place)}; {_position(p.position, p.zone)} ; {tail}"
    if isinstance(p, Provide):
        return f"Provide ({_named('Product', p.product.name, p.product.characteristics)} ; AID: {p.aid} )"
    if isinstance(p, HasContext):
        return f"HasContext ({_named('Context', p.what.name, p.what.characteristics)} ; AID: {p.who} )"
    if isinstance(p, HasProfile):
        return (
            f"HasProfile ({_named('Profile', p.profile.name, p.profile.characteristics)} ; "
            f"AID: {p.aid} )"
        )
    raise TypeError(f"not a predicate: {p!r}")


# --------------------------------------------------------------------------
# parsing

class _Parser:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, int]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:  # pragma: no cover - every char is either space, delimiter or word
                raise ContentParseError("unrecognised character", text[pos], pos)
            self.tokens.append((m.group(1), m.start(1)))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def fail(self, message: str):
        if self.i < len(self.tokens):
            tok, idx = self.tokens[self.i]
            raise ContentParseError(message, tok, idx)
        raise ContentParseError(message)

    def expect(self, *options: str) -> str:
        tok = self.peek()
        if tok is None or tok not in options:
            self.fail(f"expected {' or '.join(repr(o) for o in options)}")
        self.i += 1
        return tok

    def word(self, what: str) -> str:
        tok = self.peek()
        if tok is None or not _WORD_RE.match(tok):
            self.fail(f"expected {what}")
        self.i += 1
        return tok

    def integer(self, what: str) -> int:
        tok = self.peek()
        if tok is None or not re.fullmatch(r"-?\d+", tok):
            self.fail(f"expected integer {what}")
        self.i += 1
        return int(tok)

    def field(self, name: str):
        self.expect(name)
        self.expect(":")

    # grammar productions

    def place(self) -> Place:
        self.expect("Place")
        self.expect("(")
        self.expect("Building")
        building = self.word("building identifier")
        self.expect(";")
        self.expect("Floor")
        floor = self.integer("floor")
        self.expect(")")
        return Place(building, floor)

    def position(self) -> tuple[Position, str]:
        self.field("Position")
        zone = ""
        if self.peek() != "(":
            zone = self.word("zone label")
        self.expect("(")
        self.expect("patch")
        x = self.integer("x coordinate")
        y = self.integer("y coordinate")
        self.expect(")")
        return Position(x, y), zone

    def service(self) -> Service:
        self.expect("Service")
        self.expect("(")
        self.field("Name")
        name = self.word("service name")
        self.expect(")")
        return Service(name)

    def features(self) -> tuple[Feature, ...]:
        self.field("Characteristics")
        feats = []
        while self.peek() != ")":
            name = self.word("feature name")
            value = self.word("feature value")
            feats.append(Feature(name, value))
            if self.peek() == ",":
                self.i += 1
            elif self.peek() != ")":
                self.fail("expected ',' or ')' after feature")
        self.expect(")")
        return tuple(feats)

    def named(self, head: str) -> tuple[str, tuple[Feature, ...]]:
        self.expect(head)
        self.expect("(")
        self.field("Name")
        name = self.word(f"{head.lower()} name")
        self.expect(";")
        return name, self.features()

    def aid(self) -> int:
        self.field("AID")
        return self.integer("agent id")

    def predicate(self) -> Predicate:
        head = self.peek()
        if head is None:
            self.fail("empty content")
        if head in ("isProvider", "IsProvider"):
            self.i += 1
            self.expect("(")
            place = self.place()
            self.expect(";")
            pos, zone = self.position()
            self.expect(";")
            aid = self.aid()
            self.expect(";")
            service = self.service()
            self.expect(")")
            return IsProvider(place, pos, aid, service, zone)
        if head == "HasLocation":
            self.i += 1
            self.expect("(")
            place = self.place()
            self.expect(";")
            pos, zone = self.position()
            self.expect(";")
            aid = self.aid()
            self.expect(")")
            return HasLocation(place, pos, aid, zone)
        if head == "HasServices":
            self.i += 1
            self.expect("(")
            place = self.place()
            self.expect(";")
            pos, zone = self.position()
            self.expect(";")
            self.field("Services")
            services = []
            while self.peek() != ")":
                services.append(self.service())
                if self.peek() == ",":
                    self.i += 1
                elif self.peek() != ")":
                    self.fail("expected ',' or ')' after service")
            # the list's closing paren also closes the predicate
            self.expect(")")
            return HasServices(place, pos, tuple(services), zone)
        if head in ("Provide", "HasContext", "HasProfile"):
            self.i += 1
            self.expect("(")
            inner = {"Provide": "Product", "HasContext": "Context", "HasProfile": "Profile"}[head]
            name, feats = self.named(inner)
            self.expect(";")
            aid = self.aid()
            self.expect(")")
            if head == "Provide":
                return Provide(Product(name, feats), aid)
            if head == "HasContext":
                return HasContext(Context(name, feats), aid)
            try:
                return HasProfile(Profile(name, feats), aid)
            except ValueError as exc:
                raise ContentParseError(f"invalid profile: {exc}") from None
        self.fail("unknown predicate")

    def parse(self) -> Predicate:
        p = self.predicate()
        if self.peek() is not None:
            self.fail("trailing input")
        return p


def parse_content(s: str) -> Predicate:
    """Inverse of :func:`render_content`; whitespace between tokens is free."""
    return _Parser(s).parse()
