"""Tiny offline model fixture: a randomly initialized GPT-2 backbone with a
word-level tokenizer trained on a small corpus, saved to a temp directory so
the service loads it exactly like any Hugging Face model path.
"""

import pytest
import torch

SAMPLE_TEXTS = [
    "Represent the following location in the context of financial transactions",
    "Consider state specific economic trends population demographics major industries",
    "The MCC 5044 titled Photographic Photocopy Microfilm Equipment and Supplies",
    "serves business to business distributors of office and photographic equipment",
    "Similar categories include Office Furniture Computer Equipment Stationery Stores",
    "Please provide the embedding of MCC 5044",
    "The merchant 365 MARKET is located in Troy Michigan USA",
    "It belongs to MCC category 5814 Fast Food Restaurants which serves prepared food",
    "Please provide the merchant embedding",
    "This sentence means in one word",
    "alpha beta gamma delta epsilon zeta eta theta iota kappa",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    from tokenizers import Tokenizer, models, pre_tokenizers, trainers
    from transformers import GPT2Config, GPT2Model, PreTrainedTokenizerFast

    out = tmp_path_factory.mktemp("tiny-gpt2")
    tok = Tokenizer(models.WordLevel(unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    trainer = trainers.WordLevelTrainer(special_tokens=["[UNK]", "[PAD]"],
                                        vocab_size=512)
    tok.train_from_iterator(SAMPLE_TEXTS, trainer)
    tokenizer = PreTrainedTokenizerFast(tokenizer_object=tok,
                                        unk_token="[UNK]", pad_token="[PAD]")
    tokenizer.save_pretrained(out)

    torch.manual_seed(7)
    config = GPT2Config(vocab_size=tokenizer.vocab_size, n_positions=32,
                        n_embd=32, n_layer=2, n_head=2,
                        bos_token_id=0, eos_token_id=0)
    GPT2Model(config).save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def embedder(tiny_model_dir):
    from semtab_sidecar import HiddenStateEmbedder, ServeConfig

    return HiddenStateEmbedder(ServeConfig(model_name_or_path=tiny_model_dir,
                                           max_batch=4))


@pytest.fixture()
def client(embedder, monkeypatch):
    from fastapi.testclient import TestClient

    from semtab_sidecar import create_app

    monkeypatch.delenv("EMBED_API_KEY", raising=False)
    return TestClient(create_app(embedder))
