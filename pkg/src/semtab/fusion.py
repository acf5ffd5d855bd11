"""Categorical field cleaning and multi-source knowledge-base enrichment.

Raw merchant/MCC/location values are noisy: stray whitespace, control
characters, punctuation-only strings, malformed codes. `clean_field`
normalizes them (replacing information-free values with the shared null
token), and the `enrich_*` functions attach curated context from a
KnowledgeBase so downstream prompts carry real semantics instead of bare
identifiers. Enrichment is total: unknown values flow through as
structurally valid null enrichments, never exceptions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError

NULL_TOKEN = "[NULL]"

FIELD_KINDS = ("merchant", "mcc", "city", "state", "country")

# Canonical short country names used in prompts ("New York, USA").
_COUNTRY_SHORT = {
    "UNITED STATES OF AMERICA": "USA",
    "UNITED STATES": "USA",
    "US": "USA",
    "USA": "USA",
    "U.S.A.": "USA",
    "UNITED KINGDOM": "UK",
    "GREAT BRITAIN": "UK",
    "UK": "UK",
    "CANADA": "Canada",
    "MEXICO": "Mexico",
}

_MCC_RE = re.compile(r"[0-9]{4}")
_WS_RE = re.compile(r"\s+")
_ALNUM_RE = re.compile(r"[0-9A-Za-z]")


@dataclass(frozen=True)
class CleanedValue:
    text: str
    was_null_replaced: bool


@dataclass(frozen=True)
class MccEntry:
    title: str
    description: str
    included_categories: tuple[str, ...] = ()
    similar_codes: tuple[str, ...] = ()


@dataclass(frozen=True)
class LocationEntry:
    economic_context: str | None = None
    demographics: str | None = None
    industries: str | None = None


@dataclass(frozen=True)
class KnowledgeBase:
    """Curated context per categorical value; immutable once loaded."""

    mcc_entries: dict[str, MccEntry]
    location_entries: dict[tuple[str, str], LocationEntry]
    city_entries: dict[str, str]

    def __post_init__(self):
        for code, entry in self.mcc_entries.items():
            if not entry.title or not entry.description:
                raise ConfigurationError(f"MCC {code}: empty title or description")
            for sim in entry.similar_codes:
                if sim not in self.mcc_entries:
                    raise ConfigurationError(
                        f"MCC {code}: similar code {sim} not in knowledge base")


@dataclass(frozen=True)
class EnrichedMcc:
    code: str
    title: str | None
    description: str | None
    included_categories: tuple[str, ...] = ()
    similar: tuple[tuple[str, str], ...] = ()  # (code, title) pairs

    @property
    def known(self) -> bool:
        return self.title is not None


@dataclass(frozen=True)
class EnrichedMerchant:
    name: str
    city: str
    state: str
    country: str
    mcc: EnrichedMcc


@dataclass(frozen=True)
class EnrichedLocation:
    country: str
    region: str
    economic_context: str | None = None
    demographics: str | None = None
    industries: str | None = None


def clean_field(raw: str, kind: str) -> CleanedValue:
    """Normalize one raw field value.

    Control characters are stripped and whitespace collapsed. MCCs must be
    exactly four digits; text fields must keep at least two alphanumeric
    characters. Anything else becomes the shared null token. Total function,
    idempotent.
    """
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    text = "".join(c for c in str(raw) if c.isprintable() or c.isspace())
    text = _WS_RE.sub(" ", text).strip()
    if text == NULL_TOKEN:
        return CleanedValue(NULL_TOKEN, False)
    if kind == "mcc":
        if _MCC_RE.fullmatch(text):
            return CleanedValue(text, False)
        return CleanedValue(NULL_TOKEN, True)
    if len(_ALNUM_RE.findall(text)) >= 2:
        return CleanedValue(text, False)
    return CleanedValue(NULL_TOKEN, True)


def short_country(country: str) -> str:
    """Canonical short country form for prompt rendering."""
    if country == NULL_TOKEN:
        return country
    return _COUNTRY_SHORT.get(country.strip().upper(), country)


def _description_tokens(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[a-z0-9]+", text.lower()))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def _fallback_similar(code: str, kb: KnowledgeBase, k: int = 3) -> tuple[str, ...]:
    """Top-k codes by description token overlap; Jaccard desc, code asc.

    Zero-overlap codes are excluded: an unrelated "similar category" clause
    would only add prompt noise.
    """
    ref = _description_tokens(kb.mcc_entries[code].description)
    scored = []
    for other, entry in kb.mcc_entries.items():
        if other == code:
            continue
        j = _jaccard(ref, _description_tokens(entry.description))
        if j > 0.0:
            scored.append((-j, other))
    scored.sort()
    return tuple(other for _, other in scored[:k])


def enrich_mcc(code: str, kb: KnowledgeBase) -> EnrichedMcc:
    """Attach title/description/similar-category context for one MCC.

    Unknown codes yield a null enrichment carrying only the code; cold-start
    values must flow through, not raise.
    """
    entry = kb.mcc_entries.get(code)
    if entry is None:
        return EnrichedMcc(code=code, title=None, description=None)
    similar_codes = entry.similar_codes or _fallback_similar(code, kb)
    similar = tuple((c, kb.mcc_entries[c].title) for c in similar_codes)
    return EnrichedMcc(
        code=code,
        title=entry.title,
        description=entry.description,
        included_categories=entry.included_categories,
        similar=similar,
    )


def enrich_location(country: str, region: str, kb: KnowledgeBase) -> EnrichedLocation:
    """Attach economic/demographic/industry context for a (country, region)."""
    short = short_country(country)
    entry = kb.location_entries.get((short, region), LocationEntry())
    return EnrichedLocation(
        country=short,
        region=region,
        economic_context=entry.economic_context,
        demographics=entry.demographics,
        industries=entry.industries,
    )


def enrich_merchant(name: str, mcc: str, city: str, state: str, country: str,
                    kb: KnowledgeBase) -> EnrichedMerchant:
    """Combine a merchant's location and full MCC enrichment."""
    return EnrichedMerchant(
        name=name,
        city=city,
        state=state,
        country=short_country(country),
        mcc=enrich_mcc(mcc, kb),
    )


def load_kb(path: str | Path) -> KnowledgeBase:
    """Load a knowledge base from its JSON file format.

    Top-level keys: `mcc` (code -> entry), `locations` (list of entries with
    country/region keys), `cities` (city -> region).
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return kb_from_dict(raw)


def kb_from_dict(raw: dict) -> KnowledgeBase:
    for key in ("mcc", "locations", "cities"):
        if key not in raw:
            raise ConfigurationError(f"knowledge base missing top-level key {key!r}")
    mcc_entries = {}
    for code, entry in raw["mcc"].items():
        mcc_entries[code] = MccEntry(
            title=entry["title"],
            description=entry["description"],
            included_categories=tuple(entry.get("included_categories", ())),
            similar_codes=tuple(entry.get("similar_codes", ())),
        )
    location_entries = {}
    for entry in raw["locations"]:
        key = (entry["country"], entry["region"])
        location_entries[key] = LocationEntry(
            economic_context=entry.get("economic_context"),
            demographics=entry.get("demographics"),
            industries=entry.get("industries"),
        )
    return KnowledgeBase(
        mcc_entries=mcc_entries,
        location_entries=location_entries,
        city_entries=dict(raw["cities"]),
    )


def kb_to_dict(kb: KnowledgeBase) -> dict:
    """Inverse of kb_from_dict, for writing generated knowledge bases."""
    return {
        "mcc": {
            code: {
                "title": e.title,
                "description": e.description,
                "included_categories": list(e.included_categories),
                "similar_codes": list(e.similar_codes),
            }
            for code, e in kb.mcc_entries.items()
        },
        "locations": [
            {
                "country": country,
                "region": region,
                "economic_context": e.economic_context,
                "demographics": e.demographics,
                "industries": e.industries,
            }
            for (country, region), e in kb.location_entries.items()
        ],
        "cities": dict(kb.city_entries),
    }


def write_kb(kb: KnowledgeBase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(kb_to_dict(kb), fh, indent=1, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def default_kb_path() -> Path:
    """Path of the bundled ISO-18245-derived fixture knowledge base."""
    return Path(str(resources.files("semtab").joinpath("data/kb_fixture.json")))
