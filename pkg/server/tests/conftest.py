"""Fixtures: a tiny deterministic masked LM and a live server around it.

The tiny model has random (seeded) weights; conformance asserts structure
(positions, normalization, batching, error codes), never output quality,
so it stands in for a real pretrained checkpoint. The server itself takes
any HF model id or local path.
"""

import threading
import time

import pytest
import torch
import uvicorn
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Whitespace
from transformers import BertConfig, BertForMaskedLM, PreTrainedTokenizerFast

from predictor_server.app import create_app
from predictor_server.config import ServerConfig
from predictor_server.engine import MaskedLMEngine

VOCAB_WORDS = [
    "I", "went", "to", "school", "yesterday", ".", "She", "is", "happy",
    "He", "reads", "books", "One", "two", "Three", "four", "No", "masks",
    "Too", "long", "word", "die", "Katze", "schläft", "the", "cat",
    "sleeps", "a", "b", "c",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tiny-mlm")
    vocab = {"<pad>": 0, "<s>": 1, "</s>": 2, "<unk>": 3, "<mask>": 4}
    for word in VOCAB_WORDS:
        vocab[word] = len(vocab)
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tokenizer.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        bos_token="<s>", eos_token="</s>", cls_token="<s>", sep_token="</s>",
        unk_token="<unk>", pad_token="<pad>", mask_token="<mask>",
    )
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
    )
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def server_config(tiny_model_dir):
    return ServerConfig(model=tiny_model_dir, max_batch_size=4, max_seq_len=64)


@pytest.fixture(scope="session")
def engine(server_config):
    return MaskedLMEngine(server_config)


@pytest.fixture(scope="session")
def app(server_config, engine):
    return create_app(server_config, engine=engine)


@pytest.fixture(scope="session")
def live_url(app):
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
