"""Masked-LM infill server speaking the gecgen predictor wire protocol."""

from .app import create_app
from .config import ServerConfig
from .engine import BudgetExceeded, MaskedLMEngine, RequestError

__all__ = ["BudgetExceeded", "MaskedLMEngine", "RequestError", "ServerConfig", "create_app"]
