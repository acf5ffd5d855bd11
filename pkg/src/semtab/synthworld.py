"""Synthetic transaction world with planted semantic structure.

The generator builds a small universe of MCCs grouped into behavioral
clusters, merchants pinned to (MCC, city) pairs, and a cluster-level Markov
transition matrix that prefers same-cluster successors. Crucially, MCCs in
the same cluster share a keyword block in the generated knowledge-base text,
so semantic proximity (shared prompt tokens) correlates with behavioral
proximity (transition mass) by construction. That makes the benefit of
semantic embedding initialization falsifiable on purely synthetic data.

All generation is a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fusion import KnowledgeBase, LocationEntry, MccEntry
from .txndata import MONTH_SECONDS, Transaction, TransactionLog

START_EPOCH = 1_640_995_200  # 2022-01-01 00:00 UTC

COUNTRY = "USA"

# Theme word pools. The first four words of a theme form the cluster keyword
# block shared by every MCC in that cluster; the rest individualize entries.
_CLUSTER_THEMES = [
    ("dining", ["restaurant", "meal", "kitchen", "beverage", "catering", "bakery", "grill", "snack"]),
    ("travel", ["airline", "lodging", "journey", "booking", "resort", "transit", "cruise", "tour"]),
    ("fuel", ["fuel", "gasoline", "vehicle", "roadside", "garage", "motor", "tire", "wash"]),
    ("apparel", ["clothing", "fashion", "garment", "footwear", "tailor", "fabric", "outfit", "boutique"]),
    ("electronics", ["electronics", "computer", "gadget", "software", "repair", "network", "device", "audio"]),
    ("health", ["medical", "pharmacy", "wellness", "clinic", "dental", "therapy", "hospital", "care"]),
    ("entertainment", ["cinema", "concert", "arcade", "ticket", "theater", "festival", "museum", "show"]),
    ("home", ["furniture", "hardware", "garden", "appliance", "lumber", "decor", "tools", "paint"]),
    ("grocery", ["grocery", "produce", "market", "butcher", "dairy", "organic", "deli", "pantry"]),
    ("finance", ["banking", "insurance", "brokerage", "lending", "payments", "advisory", "savings", "credit"]),
    ("education", ["school", "tuition", "training", "books", "campus", "lessons", "childcare", "courses"]),
    ("services", ["cleaning", "plumbing", "landscaping", "moving", "printing", "legal", "grooming", "storage"]),
]

_STORE_TYPES = ["Stores", "Services", "Suppliers", "Outlets", "Providers", "Shops"]

_ADJECTIVES = ["premium", "budget", "express", "classic", "urban", "family",
               "artisan", "digital", "outdoor", "vintage", "modern", "regional",
               "boutique", "standard", "prime", "select", "metro", "coastal",
               "summit", "valley"]

_BRAND_WORDS = ["SILVER", "GOLDEN", "BLUE", "RED", "NORTH", "SOUTH", "ROYAL",
                "UNION", "CENTRAL", "PACIFIC", "ATLAS", "DELTA", "ORION",
                "CEDAR", "MAPLE", "GRANITE", "HARBOR", "CANYON", "PIONEER",
                "LIBERTY"]

_BRAND_NOUNS = ["TRADING", "BROTHERS", "CORNER", "DEPOT", "WORKS", "HOUSE",
                "POINT", "PLAZA", "STATION", "EXCHANGE", "COLLECTIVE", "CO",
                "GROUP", "MART", "PLACE", "HUB"]

_CITY_PREFIX = ["Lake", "River", "Oak", "Maple", "Stone", "Fair", "Green",
                "Bridge", "Ash", "Clear", "Spring", "Elm", "Mill", "Ridge",
                "Glen", "Hay", "Winter", "Summer", "Iron", "Crystal"]

_CITY_SUFFIX = ["wood", "field", "port", "ville", "ton", "haven", "dale",
                "burg", "ford", "view", "crest", "brook"]

_REGION_NAMES = ["Northland", "Eastmark", "Westvale", "Southreach", "Midland",
                 "Lakeshore", "Highplain", "Seaboard"]

_REGION_WORDS = ["industrial", "agricultural", "commercial", "coastal",
                 "metropolitan", "rural", "logistics", "manufacturing"]


@dataclass(frozen=True)
class WorldConfig:
    n_clusters: int = 4
    mccs_per_cluster: int = 5
    n_merchants: int = 300
    n_cities: int = 15
    n_regions: int = 5
    same_cluster_margin: float = 0.6
    anomaly_rate: float = 0.02
    home_city_affinity: float = 0.9
    log_amount_mean_range: tuple[float, float] = (2.0, 4.5)
    log_amount_sd_range: tuple[float, float] = (0.3, 0.8)

    def __post_init__(self):
        for name in ("n_clusters", "mccs_per_cluster", "n_merchants",
                     "n_cities", "n_regions"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not (0.0 <= self.same_cluster_margin <= 1.0):
            raise ConfigurationError("same_cluster_margin must be in [0, 1]")
        if not (0.0 <= self.anomaly_rate < 1.0):
            raise ConfigurationError("anomaly_rate must be in [0, 1)")
        if not (0.0 <= self.home_city_affinity <= 1.0):
            raise ConfigurationError("home_city_affinity must be in [0, 1]")


@dataclass(frozen=True)
class MerchantInfo:
    mcc: str
    city: str


@dataclass(frozen=True)
class SyntheticWorld:
    config: WorldConfig
    seed: int
    mcc_codes: tuple[str, ...]
    mcc_cluster: dict[str, int]
    merchants: dict[str, MerchantInfo]
    cities: dict[str, str]               # city -> region
    regions: tuple[str, ...]
    transition: np.ndarray               # cluster x cluster row-stochastic
    amount_params: dict[str, tuple[float, float]]  # mcc -> (log-mean, log-sd)
    kb: KnowledgeBase = field(repr=False)

    def validate(self) -> None:
        n = self.transition.shape[0]
        row_sums = self.transition.sum(axis=1)
        if not np.all(np.abs(row_sums - 1.0) <= 1e-9):
            raise ConfigurationError("transition rows must sum to 1")
        for name, info in self.merchants.items():
            if info.mcc not in self.mcc_cluster:
                raise ConfigurationError(f"merchant {name} references unknown MCC")
            if info.city not in self.cities:
                raise ConfigurationError(f"merchant {name} references unknown city")
        if n > 1:
            same = float(np.mean(np.diag(self.transition)))
            off = self.transition[~np.eye(n, dtype=bool)]
            if same <= float(np.mean(off)):
                raise ConfigurationError("planted signal violated: same-cluster "
                                         "transition mass not above cross-cluster")


def _cluster_words(cluster_id: int) -> tuple[str, list[str]]:
    theme, words = _CLUSTER_THEMES[cluster_id % len(_CLUSTER_THEMES)]
    rotation = cluster_id // len(_CLUSTER_THEMES)
    if rotation == 0:
        return theme, list(words)
    # beyond the pool, suffix the words so clusters stay lexically distinct
    return f"{theme}{rotation}", [f"{w}{rotation}" for w in words]


def _make_mccs(cfg: WorldConfig) -> tuple[list[str], dict[str, int]]:
    if cfg.n_clusters > 85:
        raise ConfigurationError("n_clusters above 85 exhausts the 4-digit code space")
    if cfg.mccs_per_cluster > 99:
        raise ConfigurationError("mccs_per_cluster above 99 exhausts the code space")
    codes, cluster_of = [], {}
    for c in range(cfg.n_clusters):
        for i in range(cfg.mccs_per_cluster):
            code = f"{1000 + c * 100 + i:04d}"
            codes.append(code)
            cluster_of[code] = c
    return codes, cluster_of


def _make_kb(cfg: WorldConfig, codes: list[str], cluster_of: dict[str, int],
             cities: dict[str, str], regions: list[str]) -> KnowledgeBase:
    mcc_entries = {}
    for idx, code in enumerate(codes):
        c = cluster_of[code]
        theme, words = _cluster_words(c)
        block = words[:4]
        extra = words[4 + idx % 4]
        adj = _ADJECTIVES[idx % len(_ADJECTIVES)]
        kind = _STORE_TYPES[idx % len(_STORE_TYPES)]
        title = f"{adj.title()} {extra.title()} {kind}"
        description = (f"{adj} {extra} providers of {block[0]}, {block[1]}, "
                       f"{block[2]}, and {block[3]} services")
        siblings = [o for o in codes if cluster_of[o] == c and o != code][:3]
        mcc_entries[code] = MccEntry(title=title, description=description,
                                     similar_codes=tuple(siblings))
    location_entries = {}
    for r_idx, region in enumerate(regions):
        rw = _REGION_WORDS[r_idx % len(_REGION_WORDS)]
        rw2 = _REGION_WORDS[(r_idx + 3) % len(_REGION_WORDS)]
        location_entries[(COUNTRY, region)] = LocationEntry(
            economic_context=f"a {rw} driven regional economy",
            demographics=f"communities across the {region} region",
            industries=f"{rw} and {rw2} industries",
        )
    for city, region in cities.items():
        r_idx = regions.index(region)
        rw = _REGION_WORDS[r_idx % len(_REGION_WORDS)]
        rw2 = _REGION_WORDS[(r_idx + 3) % len(_REGION_WORDS)]
        location_entries[(COUNTRY, city)] = LocationEntry(
            economic_context=f"a {rw} driven local economy in {city}",
            demographics=f"residents of {city} in the {region} region",
            industries=f"{rw} and local {rw2} industries",
        )
    return KnowledgeBase(mcc_entries=mcc_entries,
                         location_entries=location_entries,
                         city_entries=dict(cities))


def generate_world(cfg: WorldConfig, seed: int) -> SyntheticWorld:
    """Build a deterministic synthetic world for (cfg, seed)."""
    rng = np.random.default_rng(seed)
    codes, cluster_of = _make_mccs(cfg)

    max_cities = len(_CITY_PREFIX) * len(_CITY_SUFFIX)
    if cfg.n_cities > max_cities:
        raise ConfigurationError(f"n_cities above {max_cities} exhausts city names")
    city_order = rng.permutation(max_cities)[:cfg.n_cities]
    regions = [_REGION_NAMES[i % len(_REGION_NAMES)] if i < len(_REGION_NAMES)
               else f"{_REGION_NAMES[i % len(_REGION_NAMES)]}{i // len(_REGION_NAMES)}"
               for i in range(cfg.n_regions)]
    cities = {}
    for k, idx in enumerate(city_order):
        # two-word names ("Maple Grove" style): the city contributes distinct
        # tokens to location-bearing prompts
        name = (_CITY_PREFIX[idx // len(_CITY_SUFFIX)] + " "
                + _CITY_SUFFIX[idx % len(_CITY_SUFFIX)].capitalize())
        cities[name] = regions[k % cfg.n_regions]
    city_names = list(cities)

    # merchants: cover every MCC first, then fill unique (mcc, city) pairs,
    # then extras with replacement
    pairs = [(code, city) for code in codes for city in city_names]
    pair_perm = [pairs[i] for i in rng.permutation(len(pairs))]
    head, tail, seen_codes = [], [], set()
    for pair in pair_perm:
        if pair[0] not in seen_codes:
            seen_codes.add(pair[0])
            head.append(pair)
        else:
            tail.append(pair)
    assign = head + tail
    merchants: dict[str, MerchantInfo] = {}
    for m in range(cfg.n_merchants):
        if m < len(assign):
            code, city = assign[m]
        else:
            code = codes[int(rng.integers(len(codes)))]
            city = city_names[int(rng.integers(len(city_names)))]
        brand = _BRAND_WORDS[int(rng.integers(len(_BRAND_WORDS)))]
        noun = _BRAND_NOUNS[int(rng.integers(len(_BRAND_NOUNS)))]
        name = f"{brand} {noun} {m + 101}"
        merchants[name] = MerchantInfo(mcc=code, city=city)

    n = cfg.n_clusters
    margin = cfg.same_cluster_margin
    transition = np.zeros((n, n))
    for i in range(n):
        w = rng.uniform(0.5, 1.5, n)
        row = (1.0 - margin) * w / w.sum()
        row[i] += margin
        transition[i] = row / row.sum()

    lo_m, hi_m = cfg.log_amount_mean_range
    lo_s, hi_s = cfg.log_amount_sd_range
    amount_params = {code: (float(rng.uniform(lo_m, hi_m)), float(rng.uniform(lo_s, hi_s)))
                     for code in codes}

    world = SyntheticWorld(
        config=cfg,
        seed=seed,
        mcc_codes=tuple(codes),
        mcc_cluster=cluster_of,
        merchants=merchants,
        cities=cities,
        regions=tuple(regions),
        transition=transition,
        amount_params=amount_params,
        kb=_make_kb(cfg, codes, cluster_of, cities, regions),
    )
    world.validate()
    return world


def select_cold_merchants(world: SyntheticWorld, frac: float, seed: int) -> frozenset[str]:
    """Pick the cold-start quota: merchants withheld until the final months.

    Only MCCs with at least two merchants contribute, so every MCC stays
    reachable before the cold-start boundary.
    """
    if frac <= 0.0:
        return frozenset()
    rng = np.random.default_rng([seed, 0xC01D])
    by_mcc: dict[str, list[str]] = {}
    for name in world.merchants:  # insertion order is deterministic
        by_mcc.setdefault(world.merchants[name].mcc, []).append(name)
    candidates = []
    for code in sorted(by_mcc):
        group = by_mcc[code]
        if len(group) < 2:
            continue
        picks = rng.permutation(len(group))[:len(group) - 1]
        candidates.extend(group[p] for p in picks)
    n_cold = min(int(round(frac * len(world.merchants))), len(candidates))
    order = rng.permutation(len(candidates))
    return frozenset(candidates[i] for i in order[:n_cold])


def generate_log(world: SyntheticWorld, n_users: int, seq_len_range: tuple[int, int],
                 months: int, seed: int, cold_start_frac: float = 0.0,
                 cold_start_last_months: int = 0) -> TransactionLog:
    """Simulate user transaction sequences over `months` 30-day windows.

    Each user walks the cluster Markov chain; merchants resolve from
    (MCC, city) with a home-city preference; amounts are log-normal per MCC;
    anomalies are injected at the configured rate (inflated amount or a
    merchant/city mismatch). Merchants in the cold-start quota never appear
    before the final `cold_start_last_months` months.
    """
    if not world.merchants or not world.mcc_codes:
        raise ConfigurationError("world has no merchants or MCCs")
    if n_users < 1:
        raise ConfigurationError("n_users must be >= 1")
    lo, hi = seq_len_range
    if not (1 <= lo <= hi):
        raise ConfigurationError(f"bad seq_len_range {seq_len_range}")
    if months < 1:
        raise ConfigurationError("months must be >= 1")

    rng = np.random.default_rng([seed, world.seed])
    window = months * MONTH_SECONDS
    cold = select_cold_merchants(world, cold_start_frac, seed)
    cold_boundary = window - cold_start_last_months * MONTH_SECONDS

    city_names = list(world.cities)
    n_clusters = world.transition.shape[0]
    members = [[c for c in world.mcc_codes if world.mcc_cluster[c] == k]
               for k in range(n_clusters)]
    by_pair: dict[tuple[str, str], list[str]] = {}
    by_mcc: dict[str, list[str]] = {}
    for name, info in world.merchants.items():
        by_pair.setdefault((info.mcc, info.city), []).append(name)
        by_mcc.setdefault(info.mcc, []).append(name)

    # draw every user's timestamps first so the global span can be pinned
    lengths = rng.integers(lo, hi + 1, n_users)
    times = [np.sort(rng.integers(0, window, int(L))) for L in lengths]
    flat_min = min((t[0], u) for u, t in enumerate(times))
    flat_max = max((t[-1], u) for u, t in enumerate(times))
    times[flat_min[1]][0] = 0
    times[flat_max[1]][-1] = window - 1

    all_names = list(world.merchants)

    def pick_merchant(mcc: str, city: str, ts_off: int) -> str:
        block = cold if (cold and ts_off < cold_boundary) else frozenset()
        for pool in (by_pair.get((mcc, city), ()), by_mcc.get(mcc, ()), all_names):
            open_names = [n for n in pool if n not in block] if block else list(pool)
            if open_names:
                return open_names[int(rng.integers(len(open_names)))]
        return all_names[int(rng.integers(len(all_names)))]

    rows: list[Transaction] = []
    for u in range(n_users):
        user_id = f"u{u:05d}"
        home = city_names[int(rng.integers(len(city_names)))]
        cluster = int(rng.integers(n_clusters))
        for ts_off in times[u]:
            ts = START_EPOCH + int(ts_off)
            mcc = members[cluster][int(rng.integers(len(members[cluster])))]
            want_city = home if rng.random() < world.config.home_city_affinity \
                else city_names[int(rng.integers(len(city_names)))]
            merchant = pick_merchant(mcc, want_city, int(ts_off))
            info = world.merchants[merchant]
            mcc = info.mcc
            city = info.city
            mu, sigma = world.amount_params[mcc]
            amount = float(np.round(np.exp(rng.normal(mu, sigma)), 2))
            anomaly = False
            if rng.random() < world.config.anomaly_rate:
                anomaly = True
                if rng.random() < 0.5:
                    # inflated amount, guaranteed beyond the MCC's q99
                    amount = float(np.round(np.exp(mu + sigma * (2.6 + abs(rng.normal()))), 2))
                elif len(city_names) > 1:
                    others = [c for c in city_names if c != info.city]
                    city = others[int(rng.integers(len(others)))]
            rows.append(Transaction(
                user_id=user_id, ts=ts, amount=amount, merchant_raw=merchant,
                mcc=mcc, city=city, state_or_region=world.cities[city],
                country=COUNTRY, anomaly=anomaly))
            cluster = int(rng.choice(n_clusters, p=world.transition[cluster]))

    rows.sort(key=lambda t: (t.ts, t.user_id))
    return TransactionLog(rows)
