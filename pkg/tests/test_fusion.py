import pytest
from hypothesis import given
from hypothesis import strategies as st

from semtab.errors import ConfigurationError
from semtab.fusion import (
    NULL_TOKEN,
    KnowledgeBase,
    LocationEntry,
    MccEntry,
    clean_field,
    enrich_location,
    enrich_mcc,
    enrich_merchant,
    kb_from_dict,
)


class TestCleanField:
    def test_merchant_whitespace_collapse(self):
        got = clean_field("  365  MARKET  888 432-3299 ", "merchant")
        assert got.text == "365 MARKET 888 432-3299"
        assert not got.was_null_replaced

    def test_empty_city_becomes_null(self):
        got = clean_field("", "city")
        assert got.text == NULL_TOKEN
        assert got.was_null_replaced

    def test_punctuation_only_merchant_becomes_null(self):
        # "##--##" has zero alphanumerics, below the >=2 threshold
        got = clean_field("##--##", "merchant")
        assert got.text == NULL_TOKEN
        assert got.was_null_replaced

    def test_short_real_names_kept(self):
        assert clean_field("BP", "merchant").text == "BP"

    def test_control_chars_stripped(self):
        assert clean_field("AC\x00ME\x07 CO", "merchant").text == "ACME CO"

    @pytest.mark.parametrize("raw,expected", [
        ("5814", "5814"),
        ("  5814 ", "5814"),
        ("581", NULL_TOKEN),
        ("58141", NULL_TOKEN),
        ("ABCD", NULL_TOKEN),
        ("58 14", NULL_TOKEN),
    ])
    def test_mcc_rule(self, raw, expected):
        assert clean_field(raw, "mcc").text == expected

    def test_null_token_passes_through(self):
        got = clean_field(NULL_TOKEN, "mcc")
        assert got.text == NULL_TOKEN
        assert not got.was_null_replaced

    @given(st.text(max_size=80))
    def test_idempotent_on_text_kinds(self, raw):
        once = clean_field(raw, "merchant")
        twice = clean_field(once.text, "merchant")
        assert twice.text == once.text

    @given(st.text(max_size=12))
    def test_idempotent_on_mcc(self, raw):
        once = clean_field(raw, "mcc")
        twice = clean_field(once.text, "mcc")
        assert twice.text == once.text

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            clean_field("x", "zip")


class TestEnrichMcc:
    def test_listing_fixture_5044(self, kb):
        got = enrich_mcc("5044", kb)
        assert got.title == "Photographic, Photocopy, Microfilm Equipment and Supplies"
        similar_codes = [c for c, _ in got.similar]
        assert similar_codes == ["5021", "5045", "5943"]

    def test_unknown_code_flows_through(self, kb):
        got = enrich_mcc("0000", kb)
        assert got.code == "0000"
        assert got.title is None
        assert got.description is None
        assert got.similar == ()

    def test_jaccard_fallback_ranking(self):
        # A's description shares 4/5 tokens with B (Jaccard 4/6) and none with C.
        kb = KnowledgeBase(
            mcc_entries={
                "1111": MccEntry("A", "alpha beta gamma delta epsilon"),
                "2222": MccEntry("B", "alpha beta gamma delta zeta"),
                "3333": MccEntry("C", "quark rho sigma"),
            },
            location_entries={},
            city_entries={},
        )
        got = enrich_mcc("1111", kb)
        codes = [c for c, _ in got.similar]
        assert codes[0] == "2222"
        assert "3333" not in codes  # zero overlap excluded

    def test_fallback_tie_broken_by_ascending_code(self):
        kb = KnowledgeBase(
            mcc_entries={
                "9000": MccEntry("ref", "one two three"),
                "9002": MccEntry("b", "one two six"),
                "9001": MccEntry("a", "one two five"),
            },
            location_entries={},
            city_entries={},
        )
        got = enrich_mcc("9000", kb)
        assert [c for c, _ in got.similar] == ["9001", "9002"]


class TestEnrichMerchant:
    def test_listing_fixture_365_market(self, kb):
        got = enrich_merchant("365 MARKET 888 432-3299", "5814", "Troy",
                              "Michigan", "USA", kb)
        assert got.mcc.code == "5814"
        assert got.mcc.title == "Fast Food Restaurants"
        assert got.city == "Troy"
        assert got.country == "USA"

    def test_all_null_inputs(self, kb):
        got = enrich_merchant(NULL_TOKEN, NULL_TOKEN, NULL_TOKEN, NULL_TOKEN,
                              NULL_TOKEN, kb)
        assert got.name == NULL_TOKEN
        assert got.mcc.code == NULL_TOKEN
        assert got.mcc.title is None

    def test_unknown_mcc_still_produced(self, kb):
        got = enrich_merchant("CORNER SHOP", "9998", "Troy", "Michigan", "USA", kb)
        assert got.mcc.code == "9998"
        assert got.mcc.description is None


class TestEnrichLocation:
    def test_new_york_fixture(self, kb):
        got = enrich_location("UNITED STATES OF AMERICA", "New York", kb)
        assert got.country == "USA"
        assert got.region == "New York"
        assert got.economic_context == "state-specific economic trends"
        assert got.demographics == "population demographics"
        assert got.industries == "major industries"

    def test_unknown_pair_null_contexts(self, kb):
        got = enrich_location("USA", "Atlantis", kb)
        assert got.economic_context is None
        assert got.demographics is None
        assert got.industries is None

    def test_kb_hot_swap_differs_only_in_kb_fields(self, kb):
        other = KnowledgeBase(
            mcc_entries=kb.mcc_entries,
            location_entries={
                **kb.location_entries,
                ("USA", "New York"): LocationEntry(
                    economic_context="a finance-led economy",
                    demographics="population demographics",
                    industries="major industries"),
            },
            city_entries=kb.city_entries,
        )
        a = enrich_location("USA", "New York", kb)
        b = enrich_location("USA", "New York", other)
        assert (a.country, a.region) == (b.country, b.region)
        assert a.demographics == b.demographics
        assert a.industries == b.industries
        assert a.economic_context != b.economic_context


def test_kb_validation_rejects_dangling_similar():
    with pytest.raises(ConfigurationError):
        kb_from_dict({
            "mcc": {"1111": {"title": "A", "description": "x y",
                             "similar_codes": ["2222"]}},
            "locations": [],
            "cities": {},
        })


def test_enrichment_never_raises_on_unknowns(kb):
    for code in ("0000", "9999", NULL_TOKEN):
        assert enrich_mcc(code, kb).code == code
    loc = enrich_location(NULL_TOKEN, NULL_TOKEN, kb)
    assert loc.region == NULL_TOKEN
