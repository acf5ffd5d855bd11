"""Initialization strategies: which fields get semantic tables, how each
field's prompt family is assembled, and how embedding records turn into
model-ready tables.

The entity directory carries the static attributes enrichment needs
(merchant -> MCC/location, city -> state/country). It can come from the
synthetic world (covering cold-start values) or be distilled from a log's
modal attributes; either way it holds no labels or dynamics, mirroring the
offline knowledge bases the enrichment stage is allowed to use.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..batching import Vocabularies
from ..embedcache import EmbeddingCache
from ..embedclient import MOCK_MODEL_ID, EmbeddingRecord, mock_embed_records
from ..embedtable import DEFAULT_INIT_SCALE, EmbeddingTable, build_table
from ..errors import ConfigurationError, CoverageError
from ..fusion import (
    NULL_TOKEN,
    KnowledgeBase,
    clean_field,
    enrich_location,
    enrich_mcc,
    enrich_merchant,
)
from ..prompts import Prompt, render_location, render_mcc, render_merchant, wrap_one_word
from ..synthworld import SyntheticWorld
from ..txndata import TransactionLog

STRATEGIES: dict[str, tuple[str, ...]] = {
    "vanilla": (),
    "mcc": ("mcc",),
    "merchant": ("merchant",),
    "mcc+merchant": ("mcc", "merchant"),
    "state+city": ("state", "city"),
    "all_fields": ("mcc", "merchant", "city", "state"),
}


@dataclass(frozen=True)
class EntityDirectory:
    merchant_attrs: dict[str, tuple[str, str, str, str]]  # name -> (mcc, city, state, country)
    city_attrs: dict[str, tuple[str, str]]                # city -> (state, country)
    state_attrs: dict[str, str]                           # state -> country

    @classmethod
    def from_world(cls, world: SyntheticWorld) -> "EntityDirectory":
        merchant_attrs = {}
        for name, info in world.merchants.items():
            merchant_attrs[name] = (info.mcc, info.city, world.cities[info.city], "USA")
        city_attrs = {city: (region, "USA") for city, region in world.cities.items()}
        state_attrs = {region: "USA" for region in world.regions}
        return cls(merchant_attrs, city_attrs, state_attrs)

    @classmethod
    def from_log(cls, log: TransactionLog) -> "EntityDirectory":
        merchant_votes: dict[str, Counter] = {}
        city_votes: dict[str, Counter] = {}
        state_votes: dict[str, Counter] = {}
        for t in log:
            name = clean_field(t.merchant_raw, "merchant").text
            mcc = clean_field(t.mcc, "mcc").text
            city = clean_field(t.city, "city").text
            state = clean_field(t.state_or_region, "state").text
            country = clean_field(t.country, "country").text
            merchant_votes.setdefault(name, Counter())[(mcc, city, state, country)] += 1
            city_votes.setdefault(city, Counter())[(state, country)] += 1
            state_votes.setdefault(state, Counter())[country] += 1
        return cls(
            merchant_attrs={n: v.most_common(1)[0][0] for n, v in merchant_votes.items()},
            city_attrs={c: v.most_common(1)[0][0] for c, v in city_votes.items()},
            state_attrs={s: v.most_common(1)[0][0] for s, v in state_votes.items()},
        )


def prompt_for_value(field: str, value: str, kb: KnowledgeBase,
                     directory: EntityDirectory) -> Prompt:
    """Render one vocabulary value's enrichment prompt."""
    if field == "mcc":
        return render_mcc(enrich_mcc(value, kb))
    if field == "merchant":
        mcc, city, state, country = directory.merchant_attrs.get(
            value, (NULL_TOKEN, NULL_TOKEN, NULL_TOKEN, NULL_TOKEN))
        return render_merchant(enrich_merchant(value, mcc, city, state, country, kb))
    if field == "city":
        _, country = directory.city_attrs.get(value, (NULL_TOKEN, NULL_TOKEN))
        return render_location(enrich_location(country, value, kb))
    if field == "state":
        country = directory.state_attrs.get(value, NULL_TOKEN)
        return render_location(enrich_location(country, value, kb))
    raise ConfigurationError(f"unknown field {field!r}")


def field_prompts(field: str, vocabs: Vocabularies, kb: KnowledgeBase,
                  directory: EntityDirectory,
                  wrap: bool = False) -> list[tuple[str, str]]:
    """(key, text) pairs for every non-special vocabulary value of a field."""
    out = []
    for value in vocabs.values[field][2:]:
        text = prompt_for_value(field, value, kb, directory).text
        if wrap:
            text = wrap_one_word(text)
        out.append((f"{field}:{value}", text))
    return out


class MockSource:
    """In-process deterministic embedding source."""

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.model_id = MOCK_MODEL_ID

    def label(self) -> str:
        return f"mock(dim={self.dim})"

    def records_for(self, prompts: list[tuple[str, str]]) -> dict[str, EmbeddingRecord]:
        return {r.key: r for r in mock_embed_records(prompts, self.dim, self.seed)}


class CacheSource:
    """Reads previously computed embeddings from a cache file; every prompt
    must be present (embeddings are precomputed offline)."""

    def __init__(self, cache: EmbeddingCache):
        self.cache = cache
        self.model_id = cache.model_id

    def label(self) -> str:
        return f"{self.model_id}(dim={self.cache.dim})"

    def records_for(self, prompts: list[tuple[str, str]]) -> dict[str, EmbeddingRecord]:
        from ..prompts import fingerprint64

        out: dict[str, EmbeddingRecord] = {}
        missing = []
        for key, text in prompts:
            fp = fingerprint64(text)
            vec = self.cache.get(key, self.cache.model_id, fp)
            if vec is None:
                missing.append(key)
            else:
                out[key] = EmbeddingRecord(key=key, prompt_fingerprint=fp,
                                           model_id=self.cache.model_id,
                                           dim=self.cache.dim, vector=vec)
        if missing:
            raise CoverageError(missing)
        return out


def build_strategy_tables(strategy: str, vocabs: Vocabularies, kb: KnowledgeBase,
                          directory: EntityDirectory, source,
                          d_fields: dict[str, int], projection_seed: int = 0,
                          init_scale: float = DEFAULT_INIT_SCALE,
                          wrap_one_word_prompts: bool = False
                          ) -> dict[str, EmbeddingTable]:
    """Embedding tables for every field the strategy semantically initializes."""
    if strategy not in STRATEGIES:
        raise ConfigurationError(
            f"unknown strategy {strategy!r}; expected one of {sorted(STRATEGIES)}")
    tables: dict[str, EmbeddingTable] = {}
    for field in STRATEGIES[strategy]:
        prompts = field_prompts(field, vocabs, kb, directory,
                                wrap=wrap_one_word_prompts)
        by_key = source.records_for(prompts)
        records = {value: by_key[f"{field}:{value}"]
                   for value in vocabs.values[field][2:]}
        tables[field] = build_table(field, list(vocabs.values[field]), records,
                                    d_field=d_fields[field], seed=projection_seed,
                                    init_scale=init_scale)
    return tables
