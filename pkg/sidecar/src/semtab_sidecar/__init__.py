from .extract import extract_last_token_state, last_token_indices
from .service import HiddenStateEmbedder, ServeConfig, create_app

__all__ = ["extract_last_token_state", "last_token_indices",
           "HiddenStateEmbedder", "ServeConfig", "create_app"]
