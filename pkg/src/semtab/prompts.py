"""Prompt rendering for enriched locations, MCCs, and merchants.

Each renderer produces one canonical template string (line breaks normalized
to "\\n"), degrading gracefully when enrichment fields are missing. The
one-word wrapper is a separate composable step applied after field templates.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .fusion import NULL_TOKEN, EnrichedLocation, EnrichedMcc, EnrichedMerchant

FIELD_KIND_LOCATION = "location"
FIELD_KIND_MCC = "mcc"
FIELD_KIND_MERCHANT = "merchant"

ONE_WORD_TEMPLATE = "This sentence: '{text}' means in one word:"


def fingerprint64(text: str) -> int:
    """Stable 64-bit hash of a prompt text (platform and process independent)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Prompt:
    text: str
    field_kind: str
    one_word_wrapped: bool = False
    fingerprint: int = 0

    def __post_init__(self):
        if not self.text:
            raise ValueError("prompt text must be non-empty")
        object.__setattr__(self, "fingerprint", fingerprint64(self.text))


def _oxford_join(items: list[str]) -> str:
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + f", and {items[-1]}"


def _present(value: str | None) -> bool:
    return bool(value) and value != NULL_TOKEN


def render_location(e: EnrichedLocation) -> Prompt:
    """Location template; context clauses from the KB are folded into the
    "Consider ..." sentence and omitted when null."""
    parts = [c for c in (e.economic_context, e.demographics, e.industries) if _present(c)]
    consider = _oxford_join(parts + ["financial regulations"])
    text = (
        "Represent the following location in the context of financial "
        f"transactions, and economic indicators: {e.region}, {e.country}. "
        f"\nConsider {consider}."
    )
    return Prompt(text=text, field_kind=FIELD_KIND_LOCATION)


def render_mcc(e: EnrichedMcc) -> Prompt:
    """Enriched MCC template; unknown codes degrade to the basic short form."""
    if not e.known:
        return Prompt(text=f"Please provide the embedding of MCC {e.code}.",
                      field_kind=FIELD_KIND_MCC)
    serves = e.description
    if e.included_categories:
        serves = f"{serves} including {_oxford_join(list(e.included_categories))}"
    text = f"The MCC {e.code}, titled '{e.title}', serves {serves}."
    if e.similar:
        pairs = [f"{code} ({title})" for code, title in e.similar]
        text += f" Similar categories include {_oxford_join(pairs)}."
    text += f"\nPlease provide the embedding of MCC {e.code}."
    return Prompt(text=text, field_kind=FIELD_KIND_MCC)


def render_merchant(e: EnrichedMerchant) -> Prompt:
    """Merchant template combining location and MCC context."""
    loc_parts = [p for p in (e.city, e.state, e.country) if _present(p)]
    if loc_parts:
        text = f"The merchant '{e.name}' is located in {', '.join(loc_parts)}."
    else:
        text = f"The merchant '{e.name}'."
    if _present(e.mcc.code):
        sentence = f" It belongs to MCC category {e.mcc.code}"
        if e.mcc.title:
            sentence += f" '{e.mcc.title}'"
        if e.mcc.description:
            sentence += f", which serves {e.mcc.description}"
        text += sentence + "."
    text += "\nPlease provide the merchant embedding."
    return Prompt(text=text, field_kind=FIELD_KIND_MERCHANT)


def wrap_one_word(text: str) -> str:
    """Wrap a prompt in the explicit one-word constraint.

    Single quotes inside the text are escaped by doubling so the wrapper's
    own quotes stay unambiguous. Wrapping is intentionally not idempotent.
    """
    if not text:
        raise ValueError("cannot wrap empty text")
    return ONE_WORD_TEMPLATE.format(text=text.replace("'", "''"))


def wrapped(prompt: Prompt) -> Prompt:
    """One-word-wrapped copy of a field prompt."""
    return Prompt(text=wrap_one_word(prompt.text), field_kind=prompt.field_kind,
                  one_word_wrapped=True)
