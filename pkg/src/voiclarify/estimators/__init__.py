"""Belief backends: exact Bayes over the task model, or a chat model."""

from .base import Estimator
from .client import API_KEY_ENV, ChatClient, LlmConfig
from .exact import ExactEstimator, exact_posterior, exact_prior
from .llm import (
    LlmEstimator,
    llm_answer_likelihood,
    llm_estimate_distribution,
    llm_verbalized_confidence,
)
from .parsing import parse_strict_json_distribution
from .prompts import PromptTemplate, load_template

__all__ = [
    "API_KEY_ENV",
    "ChatClient",
    "Estimator",
    "ExactEstimator",
    "LlmConfig",
    "LlmEstimator",
    "PromptTemplate",
    "exact_posterior",
    "exact_prior",
    "llm_answer_likelihood",
    "llm_estimate_distribution",
    "llm_verbalized_confidence",
    "load_template",
    "parse_strict_json_distribution",
]
