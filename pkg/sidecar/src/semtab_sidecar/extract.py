"""Hidden-state extraction: final layer, last non-padding token per row."""

from __future__ import annotations

import torch


def last_token_indices(attention_mask: torch.Tensor) -> torch.Tensor:
    """Index of the final 1 in each attention-mask row.

    Works for either padding side. Raises on all-padding rows.
    """
    if attention_mask.ndim != 2:
        raise ValueError(f"attention mask must be 2D, got {attention_mask.shape}")
    if bool((attention_mask.sum(dim=1) == 0).any()):
        raise ValueError("attention mask contains an all-padding row")
    positions = torch.arange(attention_mask.shape[1],
                             device=attention_mask.device)
    return (attention_mask.long() * positions).argmax(dim=1)


def extract_last_token_state(hidden_states: torch.Tensor,
                             attention_mask: torch.Tensor) -> torch.Tensor:
    """Select the final-layer hidden state at each row's last real token.

    hidden_states: (batch, seq, dim) from the model's last layer.
    Returns (batch, dim), float32.
    """
    idx = last_token_indices(attention_mask)
    rows = torch.arange(hidden_states.shape[0], device=hidden_states.device)
    return hidden_states[rows, idx].to(torch.float32)
