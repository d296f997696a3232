"""Contextual recurrent units: GRU cells fed by same-length convolutions."""

from ._core import (
    Cell,
    Classifier,
    ConfigError,
    ContractError,
    DimensionError,
    count_of_query_word,
    doc_word_freq,
    gradcheck_suite,
    same_length_conv,
    tokenize,
)

VARIANTS = ("gru", "shallow", "deep", "deep_enhanced")

__all__ = [
    "Cell",
    "Classifier",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "VARIANTS",
    "count_of_query_word",
    "doc_word_freq",
    "gradcheck_suite",
    "same_length_conv",
    "tokenize",
]
