"""Synthetic stock-quote workload with tunable subscription selectivity.

Every payload carries the same 10 attributes.  Each publisher advertises one
symbol over the full price range; each subscriber registers one subscription
pinned to a symbol with a price floor.  Selectivity (the chance a random
notification matches a random subscription) is the product of the symbol hit
rate and the price-range fraction, so the price floor is solved from the
requested selectivity:

    selectivity = (1 / n_publishers) * (1 - floor / PRICE_MAX)

Placement of clients onto brokers is uniform at random from the run seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .messages import Advertisement, Notification, Predicate, Subscription
from .topology import BrokerId, ScotTopology

SYMBOL_POOL = tuple(f"SYM{i:03d}" for i in range(500))
PRICE_MAX = 100.0
VOLUME_MAX = 100_000
SECTORS = ("tech", "energy", "finance", "health", "retail")
EXCHANGES = ("NYSE", "NASDAQ", "TSX")

ATTRIBUTES = (
    "symbol", "price", "volume", "open", "high", "low", "close",
    "change", "sector", "exchange",
)


@dataclass(frozen=True)
class PlacedClient:
    client: str
    broker: BrokerId


@dataclass
class Workload:
    advertisements: list  # (PlacedClient, Advertisement)
    subscriptions: list   # (PlacedClient, Subscription)
    notifications: list   # (client_id, Notification)
    selectivity: float

    def subscriber_host(self, client: str) -> BrokerId:
        for placed, _ in self.subscriptions:
            if placed.client == client:
                return placed.broker
        raise KeyError(client)

    def publisher_host(self, client: str) -> BrokerId:
        for placed, _ in self.advertisements:
            if placed.client == client:
                return placed.broker
        raise KeyError(client)


def price_floor(selectivity: float, n_publishers: int) -> float:
    """Price floor giving the requested match rate; errors when the target
    is unreachable with symbol-pinned subscriptions."""
    if not (0 < selectivity <= 1):
        raise ValueError("selectivity must be in (0, 1]")
    frac = selectivity * n_publishers
    if frac > 1.0 + 1e-9:
        raise ValueError(
            f"selectivity {selectivity} too high for {n_publishers} publishers "
            f"(needs selectivity * publishers <= 1)"
        )
    return PRICE_MAX * (1.0 - frac)


def make_payload(rng: random.Random, symbol: str) -> dict:
    price = round(rng.uniform(0.0, PRICE_MAX), 2)
    spread = round(rng.uniform(0.0, 5.0), 2)
    return {
        "symbol": symbol,
        "price": price,
        "volume": rng.randrange(VOLUME_MAX),
        "open": round(max(0.0, price - spread), 2),
        "high": round(min(PRICE_MAX, price + spread), 2),
        "low": round(max(0.0, price - 2 * spread), 2),
        "close": price,
        "change": round(rng.uniform(-5.0, 5.0), 2),
        "sector": rng.choice(SECTORS),
        "exchange": rng.choice(EXCHANGES),
    }


def generate_workload(
    topology: ScotTopology,
    seed: int,
    n_publishers: int,
    n_subscribers: int,
    n_notifications: int,
    selectivity: float = 0.02,
) -> Workload:
    """Deterministic workload: advertisements, one subscription per
    subscriber, and a conforming notification stream."""
    if n_publishers < 1:
        raise ValueError("need at least one publisher")
    if n_publishers > len(SYMBOL_POOL):
        raise ValueError(f"at most {len(SYMBOL_POOL)} publishers supported")
    rng = random.Random(seed)
    floor = price_floor(selectivity, n_publishers)
    brokers = list(topology.brokers)

    symbols = rng.sample(SYMBOL_POOL, n_publishers)
    advertisements = []
    pub_symbol = {}
    for i, symbol in enumerate(symbols):
        client = f"pub{i:03d}"
        placed = PlacedClient(client, rng.choice(brokers))
        adv = Advertisement(
            adv_id=f"{client}/a0",
            publisher=client,
            predicates=(
                Predicate("symbol", "=", symbol),
                Predicate("price", "between", 0.0, PRICE_MAX),
                Predicate("volume", "between", 0, VOLUME_MAX),
            ),
        )
        pub_symbol[client] = symbol
        advertisements.append((placed, adv))

    subscriptions = []
    for j in range(n_subscribers):
        client = f"sub{j:03d}"
        placed = PlacedClient(client, rng.choice(brokers))
        sub = Subscription(
            sub_id=f"{client}/s0",
            subscriber=client,
            predicates=(
                Predicate("symbol", "=", rng.choice(symbols)),
                Predicate("price", ">=", round(floor, 2)),
            ),
        )
        subscriptions.append((placed, sub))

    notifications = []
    publishers = [placed.client for placed, _ in advertisements]
    for k in range(n_notifications):
        client = publishers[k % len(publishers)]
        payload = make_payload(rng, pub_symbol[client])
        notifications.append(
            (client, Notification(f"{client}/n{k}", client, payload))
        )
    return Workload(advertisements, subscriptions, notifications, selectivity)


def measured_selectivity(workload: Workload) -> float:
    """Fraction of (notification, subscription) pairs that match; the
    calibration check for the generator."""
    from .messages import matches

    pairs = 0
    hits = 0
    for _, notif in workload.notifications:
        for _, sub in workload.subscriptions:
            pairs += 1
            if matches(notif, sub):
                hits += 1
    return hits / pairs if pairs else 0.0
