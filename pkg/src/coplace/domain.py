"""Board geometry, relation algebra, constraints, actions and observations.

The table has seven locations: four destination bins arranged in a 2x2 grid
(rows/columns/diagonals defined once, in the global overhead frame), each
player's private starting area, and the shared common bin in the center.
Pairwise relations over destination bins form a Klein four-group under
composition, which is what makes knowledge expansion a simple offset
propagation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Union


class CoplaceError(Exception):
    """Base class for all library errors."""


class InvalidBin(CoplaceError):
    pass


class InvalidInput(CoplaceError):
    pass


class ParseError(CoplaceError):
    pass


class Bin(str, Enum):
    TOP_LEFT = "top_left"
    TOP_RIGHT = "top_right"
    BOTTOM_LEFT = "bottom_left"
    BOTTOM_RIGHT = "bottom_right"
    AREA_P1 = "area_p1"
    AREA_P2 = "area_p2"
    COMMON = "common"

    def __str__(self) -> str:
        return self.value


DESTINATION_BINS = (Bin.TOP_LEFT, Bin.TOP_RIGHT, Bin.BOTTOM_LEFT, Bin.BOTTOM_RIGHT)

# (row, col) coordinates in the global overhead frame: row 0 = top, col 0 = left.
_BIN_COORDS = {
    Bin.TOP_LEFT: (0, 0),
    Bin.TOP_RIGHT: (0, 1),
    Bin.BOTTOM_LEFT: (1, 0),
    Bin.BOTTOM_RIGHT: (1, 1),
}


class Player(str, Enum):
    P1 = "p1"
    P2 = "p2"

    @property
    def other(self) -> "Player":
        return Player.P2 if self is Player.P1 else Player.P1

    def __str__(self) -> str:
        return self.value


# Fixed reach sets: each player reaches the two corner bins in front of them,
# their own area and the common bin.
_REACH = {
    Player.P1: frozenset({Bin.BOTTOM_LEFT, Bin.BOTTOM_RIGHT, Bin.AREA_P1, Bin.COMMON}),
    Player.P2: frozenset({Bin.TOP_LEFT, Bin.TOP_RIGHT, Bin.AREA_P2, Bin.COMMON}),
}


def reachable_bins(player: Player) -> frozenset[Bin]:
    return _REACH[player]


class Relation(str, Enum):
    SAME_BIN = "same_bin"
    SAME_ROW = "same_row"
    SAME_COL = "same_col"
    SAME_DIAG = "same_diag"

    def __str__(self) -> str:
        return self.value


# Each relation is the XOR difference (d_row, d_col) between two bins.  The
# composition table is the Klein four-group: same_bin is the identity and
# every relation is its own inverse.
_RELATION_BITS = {
    Relation.SAME_BIN: (0, 0),
    Relation.SAME_ROW: (0, 1),
    Relation.SAME_COL: (1, 0),
    Relation.SAME_DIAG: (1, 1),
}
_BITS_RELATION = {v: k for k, v in _RELATION_BITS.items()}


def relation_between(a: Bin, b: Bin) -> Relation:
    """The unique relation implied by the 2x2 destination-bin geometry."""
    if a not in _BIN_COORDS or b not in _BIN_COORDS:
        raise InvalidBin(f"not a destination bin: {a if a not in _BIN_COORDS else b}")
    (ra, ca), (rb, cb) = _BIN_COORDS[a], _BIN_COORDS[b]
    return _BITS_RELATION[(ra ^ rb, ca ^ cb)]


def compose(r1: Relation, r2: Relation) -> Relation:
    (a1, b1), (a2, b2) = _RELATION_BITS[r1], _RELATION_BITS[r2]
    return _BITS_RELATION[(a1 ^ a2, b1 ^ b2)]


def shift_bin(b: Bin, r: Relation) -> Bin:
    """The unique destination bin related to ``b`` by ``r``."""
    if b not in _BIN_COORDS:
        raise InvalidBin(f"not a destination bin: {b}")
    row, col = _BIN_COORDS[b]
    dr, dc = _RELATION_BITS[r]
    for cand, (cr, cc) in _BIN_COORDS.items():
        if (cr, cc) == (row ^ dr, col ^ dc):
            return cand
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class PairRule:
    """An exclusive pairwise relation between two distinct objects.

    Stored with objects in lexicographic order so that (A,B,r) == (B,A,r).
    """

    a: str
    b: str
    relation: Relation

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise InvalidInput(f"pair rule needs two distinct objects: {self.a}")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    def involves(self, obj: str) -> bool:
        return obj in (self.a, self.b)

    def __str__(self) -> str:
        return f"{self.relation.value}({self.a},{self.b})"


def pair_rule(a: str, b: str, relation: Relation) -> PairRule:
    if a > b:
        a, b = b, a
    return PairRule(a, b, relation)


@dataclass(frozen=True)
class Grounding:
    """Anchors one object to a specific destination bin."""

    obj: str
    bin: Bin

    def __post_init__(self) -> None:
        if self.bin not in DESTINATION_BINS:
            raise InvalidBin(f"grounding must target a destination bin: {self.bin}")

    def involves(self, obj: str) -> bool:
        return obj == self.obj

    def __str__(self) -> str:
        return f"in_bin({self.obj},{self.bin.value})"


Constraint = Union[PairRule, Grounding]


@dataclass(frozen=True)
class Move:
    obj: str
    src: Bin
    dst: Bin

    def __str__(self) -> str:
        return f"move({self.obj}, {self.src.value}, {self.dst.value})"


@dataclass(frozen=True)
class Share:
    constraint: Constraint

    def __str__(self) -> str:
        return f"share({self.constraint})"


@dataclass(frozen=True)
class Ask:
    obj: str

    def __str__(self) -> str:
        return f"ask({self.obj})"


@dataclass(frozen=True)
class Pass:
    def __str__(self) -> str:
        return "pass"


Action = Union[Move, Share, Ask, Pass]

PASS = Pass()


_CONSTRAINT_RE = re.compile(
    r"^\s*(same_row|same_col|same_diag|same_bin|in_bin)\s*\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)\s*$"
)
_MOVE_RE = re.compile(r"^\s*move\s*\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)\s*$")
_SHARE_RE = re.compile(r"^\s*share\s*\(\s*(.+?)\s*\)\s*$")
_ASK_RE = re.compile(r"^\s*ask\s*\(\s*([^,()\s]+)\s*\)\s*$")
_PASS_RE = re.compile(r"^\s*pass\s*$")


def _parse_bin(text: str) -> Bin:
    try:
        return Bin(text)
    except ValueError:
        raise ParseError(f"unknown bin name: {text!r}") from None


def parse_constraint(text: str) -> Constraint:
    """Parse the canonical constraint grammar, e.g. ``same_row(A,B)``."""
    m = _CONSTRAINT_RE.match(text)
    if not m:
        raise ParseError(f"malformed constraint: {text!r}")
    kind, x, y = m.groups()
    if kind == "in_bin":
        return Grounding(x, _parse_bin(y))
    return pair_rule(x, y, Relation(kind))


def parse_action_text(text: str) -> Action:
    """Parse one action in the canonical grammar (no THINK/ACTION envelope)."""
    if _PASS_RE.match(text):
        return PASS
    m = _MOVE_RE.match(text)
    if m:
        obj, src, dst = m.groups()
        return Move(obj, _parse_bin(src), _parse_bin(dst))
    m = _ASK_RE.match(text)
    if m:
        return Ask(m.group(1))
    m = _SHARE_RE.match(text)
    if m:
        return Share(parse_constraint(m.group(1)))
    raise ParseError(f"malformed action: {text!r}")


@dataclass(frozen=True)
class Observation:
    """What the acting player sees at the start of their turn.

    The board is fully public; only the un-communicated constraints of the
    partner are hidden.
    """

    player: Player
    placements: tuple[tuple[str, Bin], ...]  # sorted by object name
    own_constraints: tuple[Constraint, ...]
    history: tuple[str, ...]  # rendered turn records, in order
    step_count: int
    step_limit: int
    pending_ask: tuple[Player, str] | None = None

    def placement_of(self, obj: str) -> Bin:
        for name, loc in self.placements:
            if name == obj:
                return loc
        raise KeyError(obj)
