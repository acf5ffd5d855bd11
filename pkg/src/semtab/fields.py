"""Categorical field names shared across batching, modeling, and reporting."""

CATEGORICAL_FIELDS = ("mcc", "merchant", "city", "state")

# fields predicted by classification heads (state is input-only)
TARGET_FIELDS = ("mcc", "city", "merchant")
