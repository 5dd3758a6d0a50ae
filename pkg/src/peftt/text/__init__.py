from .tokenizer import TSEK, Tokenizer, preprocess_symbols, tokenize
from .vocab import (
    CLS_ID,
    MASK_ID,
    MASK_TOKEN,
    N_SPECIAL_TOKENS,
    PAD_ID,
    SEP_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    Vocabulary,
    add_tokens,
    resize_embeddings,
)

__all__ = [
    "CLS_ID",
    "MASK_ID",
    "MASK_TOKEN",
    "N_SPECIAL_TOKENS",
    "PAD_ID",
    "SEP_ID",
    "SPECIAL_TOKENS",
    "TSEK",
    "Tokenizer",
    "UNK_ID",
    "Vocabulary",
    "add_tokens",
    "preprocess_symbols",
    "resize_embeddings",
    "tokenize",
]
