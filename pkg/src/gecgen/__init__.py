"""Synthetic GEC data construction from bitext, plus Max-Match evaluation."""

from .errors import (
    BackendUnavailable,
    ConfigError,
    CountError,
    EmptyInput,
    GecGenError,
    InputError,
    ParseError,
    ProtocolViolation,
)
from .textcore import (
    MASK,
    ErroneousPair,
    LangProfile,
    RngStream,
    SentencePair,
    derive_record_rng,
    detokenize,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "MASK",
    "BackendUnavailable",
    "ConfigError",
    "CountError",
    "EmptyInput",
    "ErroneousPair",
    "GecGenError",
    "InputError",
    "LangProfile",
    "ParseError",
    "ProtocolViolation",
    "RngStream",
    "SentencePair",
    "derive_record_rng",
    "detokenize",
    "tokenize",
    "__version__",
]
