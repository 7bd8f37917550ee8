"""Message vocabulary: attribute filters, advertisements, subscriptions,
notifications, the cluster-index bit vector and wire-level control messages.

All values here are immutable (payload dicts are never mutated in place);
matching and overlap checks are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

Number = Union[int, float]

OPS = ("=", "!=", "<", "<=", ">", ">=", "between")
_NUMERIC_OPS = ("<", "<=", ">", ">=", "between")


class FilterError(ValueError):
    """Malformed predicate or filter text."""


class FilterTypeError(TypeError):
    """Comparison between incompatible value types in an overlap check."""


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


@dataclass(frozen=True)
class Predicate:
    """Single attribute constraint; conjunctions are tuples of these.

    ``between`` carries the inclusive range ``[value, hi]``; every other
    operator uses ``value`` alone.  Order comparisons require numbers.
    """

    attribute: str
    op: str
    value: object
    hi: object = None

    def __post_init__(self) -> None:
        if self.op not in OPS:
            raise FilterError(f"unknown operator {self.op!r}")
        if self.op == "between":
            if not (_is_number(self.value) and _is_number(self.hi)):
                raise FilterError("'between' requires numeric bounds")
            if self.value > self.hi:
                raise FilterError(f"'between' bounds out of order: {self.value} > {self.hi}")
        elif self.op in _NUMERIC_OPS:
            if not _is_number(self.value):
                raise FilterError(f"operator {self.op!r} requires a numeric value")
        else:
            if self.hi is not None:
                raise FilterError(f"operator {self.op!r} takes a single value")

    def satisfied_by(self, x) -> bool:
        """Closed-world check of one payload value (type mismatch fails)."""
        if self.op == "=":
            return _compatible(x, self.value) and x == self.value
        if self.op == "!=":
            return _compatible(x, self.value) and x != self.value
        if not _is_number(x):
            return False
        if self.op == "<":
            return x < self.value
        if self.op == "<=":
            return x <= self.value
        if self.op == ">":
            return x > self.value
        if self.op == ">=":
            return x >= self.value
        return self.value <= x <= self.hi  # between

    def __str__(self) -> str:
        if self.op == "between":
            return f"{self.attribute} between {self.value} {self.hi}"
        return f"{self.attribute} {self.op} {self.value}"


def _compatible(a, b) -> bool:
    if _is_number(a) and _is_number(b):
        return True
    return isinstance(a, str) and isinstance(b, str)


def parse_filter(text: str) -> tuple:
    """Parse the filter text syntax: comma-joined ``attr op value`` terms,
    e.g. ``"symbol = YHOO, price between 10 50, volume >= 100"``."""
    predicates = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        tokens = part.split()
        if len(tokens) < 3:
            raise FilterError(f"cannot parse predicate {part!r}")
        attr, op = tokens[0], tokens[1]
        if op == "between":
            if len(tokens) != 4:
                raise FilterError(f"'between' needs two bounds in {part!r}")
            predicates.append(Predicate(attr, op, _coerce(tokens[2]), _coerce(tokens[3])))
        else:
            if len(tokens) != 3:
                raise FilterError(f"too many tokens in {part!r}")
            predicates.append(Predicate(attr, op, _coerce(tokens[2])))
    if not predicates:
        raise FilterError("empty filter")
    return tuple(predicates)


def format_filter(predicates) -> str:
    return ", ".join(str(p) for p in predicates)


def _coerce(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


@dataclass(frozen=True)
class Advertisement:
    adv_id: str
    publisher: str
    predicates: tuple

    def __post_init__(self) -> None:
        if not self.predicates:
            raise FilterError("advertisement needs at least one predicate")


@dataclass(frozen=True)
class Subscription:
    sub_id: str
    subscriber: str
    predicates: tuple

    def __post_init__(self) -> None:
        if not self.predicates:
            raise FilterError("subscription needs at least one predicate")


def payload_satisfies(predicates, payload: dict) -> bool:
    """True iff the payload satisfies every predicate; a missing attribute
    fails its predicate (closed-world matching)."""
    for p in predicates:
        if p.attribute not in payload:
            return False
        if not p.satisfied_by(payload[p.attribute]):
            return False
    return True


def matches(notification: "Notification", subscription: Subscription) -> bool:
    return payload_satisfies(subscription.predicates, notification.payload)


def overlaps(adv: Advertisement, sub: Subscription) -> bool:
    """True iff some payload could satisfy both conjunctions.

    Checked attribute by attribute; an attribute constrained on only one
    side does not constrain the other.  Raises :class:`FilterTypeError` when
    the two sides constrain one attribute with incompatible value types.
    """
    by_attr: dict[str, list] = {}
    for p in adv.predicates + sub.predicates:
        by_attr.setdefault(p.attribute, []).append(p)
    adv_attrs = {p.attribute for p in adv.predicates}
    sub_attrs = {p.attribute for p in sub.predicates}
    for attr in sorted(adv_attrs & sub_attrs):
        if not _feasible(attr, by_attr[attr]):
            return False
    return True


def _feasible(attr: str, preds) -> bool:
    """Satisfiability of a conjunction of predicates on one attribute over
    an unbounded domain (reals for numbers, infinite set for strings)."""
    numeric = any(
        _is_number(p.value) or p.op in _NUMERIC_OPS for p in preds
    )
    stringy = any(isinstance(p.value, str) for p in preds)
    if numeric and stringy:
        raise FilterTypeError(f"attribute {attr!r} compared as both number and string")

    eqs = [p.value for p in preds if p.op == "="]
    neqs = {p.value for p in preds if p.op == "!="}
    if eqs:
        v = eqs[0]
        if any(e != v for e in eqs[1:]):
            return False
        if v in neqs:
            return False
        return all(p.satisfied_by(v) for p in preds if p.op not in ("=", "!="))

    if not numeric:
        return True  # only inequalities over an infinite string domain

    lo, lo_open = -math.inf, False
    hi, hi_open = math.inf, False
    for p in preds:
        if p.op == ">":
            if p.value > lo or (p.value == lo and not lo_open):
                lo, lo_open = p.value, True
        elif p.op == ">=":
            if p.value > lo:
                lo, lo_open = p.value, False
        elif p.op == "<":
            if p.value < hi or (p.value == hi and not hi_open):
                hi, hi_open = p.value, True
        elif p.op == "<=":
            if p.value < hi:
                hi, hi_open = p.value, False
        elif p.op == "between":
            if p.value > lo:
                lo, lo_open = p.value, False
            if p.hi < hi:
                hi, hi_open = p.hi, False
    if lo > hi:
        return False
    if lo == hi:
        return not (lo_open or hi_open) and lo not in neqs
    return True  # a real interval minus finitely many points is non-empty


# -- cluster index vector ---------------------------------------------------

A_CXT = "A"  # advertisement context (stored at the publisher's host broker)
S_CXT = "S"  # subscription context (stored at secondary brokers)
P_CXT = "P"  # publication context (carried by dynamically routed copies)

_CONTEXTS = (A_CXT, S_CXT, P_CXT)


@dataclass(frozen=True)
class Civ:
    """Fixed-width bit vector with one bit per cluster.

    Bits are indexed right-to-left from zero, so bit *i* stands for cluster
    *i*; ``cb_index`` marks the context bit (the host or sending cluster,
    depending on context).  Operations return new vectors and never change
    the width; setting a bit is idempotent.
    """

    width: int
    context: str
    cb_index: int
    bits: int = 0

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("civ width must be positive")
        if self.context not in _CONTEXTS:
            raise ValueError(f"unknown civ context {self.context!r}")
        if not (0 <= self.cb_index < self.width):
            raise ValueError(f"context bit index {self.cb_index} out of range")
        if not (0 <= self.bits < (1 << self.width)):
            raise ValueError("bit pattern wider than the vector")

    def _check(self, i: int) -> None:
        if not (0 <= i < self.width):
            raise IndexError(f"bit index {i} out of range for width {self.width}")

    def set_bit(self, i: int) -> "Civ":
        self._check(i)
        return replace(self, bits=self.bits | (1 << i))

    def clear_bit(self, i: int) -> "Civ":
        self._check(i)
        return replace(self, bits=self.bits & ~(1 << i))

    def has(self, i: int) -> bool:
        self._check(i)
        return bool(self.bits >> i & 1)

    def set_indexes(self) -> tuple:
        return tuple(i for i in range(self.width) if self.bits >> i & 1)

    def any_set(self) -> bool:
        return self.bits != 0

    def with_context(self, context: str, cb_index: Optional[int] = None) -> "Civ":
        return replace(
            self, context=context, cb_index=self.cb_index if cb_index is None else cb_index
        )

    def as_string(self) -> str:
        return format(self.bits, f"0{self.width}b")

    def __str__(self) -> str:
        return f"{self.context}:{self.as_string()}@{self.cb_index}"


def civ_make(width: int, context: str, cb_index: int) -> Civ:
    return Civ(width, context, cb_index)


def civ_set_bit(c: Civ, i: int) -> Civ:
    return c.set_bit(i)


# -- notifications and wire messages ---------------------------------------

@dataclass
class Notification:
    """A published event.  ``civ`` is present only on dynamically routed
    copies; ``tid`` only in the flooding-baseline mode; ``hops`` counts
    broker-to-broker transfers so far."""

    notif_id: str
    publisher: str
    payload: dict
    civ: Optional[Civ] = None
    tid: Optional[str] = None
    hops: int = 0

    def forwarded(self, civ: Optional[Civ] = None) -> "Notification":
        return replace(self, civ=civ, hops=self.hops + 1)


@dataclass(frozen=True)
class AdvertiseMsg:
    adv: Advertisement
    civ: Optional[Civ] = None  # S_cxt vector stamped by the host broker
    hops: int = 0


@dataclass(frozen=True)
class SubscribeMsg:
    sub: Subscription
    hops: int = 0


@dataclass(frozen=True)
class UnsubscribeMsg:
    sub_id: str
    hops: int = 0


@dataclass(frozen=True)
class CibSetMsg:
    """Interest announcement: cluster ``from_ci`` wants the advertisement's
    notifications.  Carries the triggering subscription; the receiver uses it
    to locate the advertisement but never stores it."""

    adv_id: str
    from_ci: int
    sub: Subscription
    hops: int = 0


@dataclass(frozen=True)
class CibClearMsg:
    """Mirror of :class:`CibSetMsg`: cluster ``from_ci`` no longer has any
    overlapping subscription."""

    adv_id: str
    from_ci: int
    hops: int = 0


@dataclass(frozen=True)
class TidAdvertiseMsg:
    adv: Advertisement
    tid: str
    hops: int = 0


@dataclass(frozen=True)
class TidSubscribeMsg:
    sub: Subscription
    tids: tuple
    hops: int = 0


@dataclass(frozen=True)
class FillerMsg:
    """Opaque queue load injected by congestion scripting; consumes link
    capacity but carries no protocol meaning."""

    seq: int = 0
    hops: int = 0


def message_kind(msg) -> str:
    if isinstance(msg, Notification):
        return "notification"
    if isinstance(msg, (AdvertiseMsg, TidAdvertiseMsg)):
        return "advertise"
    if isinstance(msg, (SubscribeMsg, TidSubscribeMsg)):
        return "subscribe"
    if isinstance(msg, UnsubscribeMsg):
        return "unsubscribe"
    if isinstance(msg, CibSetMsg):
        return "cib_set"
    if isinstance(msg, CibClearMsg):
        return "cib_clear"
    if isinstance(msg, FillerMsg):
        return "filler"
    raise TypeError(f"not a wire message: {msg!r}")


def message_hops(msg) -> int:
    return msg.hops
