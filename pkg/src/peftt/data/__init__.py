from .corpus import (
    Batch,
    CorpusSplits,
    Example,
    encode_classifier_input,
    load_label_map,
    load_presplit,
    load_tncc,
    make_batches,
    split,
    write_label_map,
    write_tncc,
)
from .synthetic import (
    TIBETAN_LABEL_WORDS,
    TNCC_LABELS,
    SyntheticSpec,
    oracle_predict,
    signal_tokens,
    synthesize_corpus,
    synthetic_label_names,
)

__all__ = [
    "TIBETAN_LABEL_WORDS",
    "TNCC_LABELS",
    "Batch",
    "CorpusSplits",
    "Example",
    "SyntheticSpec",
    "encode_classifier_input",
    "load_label_map",
    "load_presplit",
    "load_tncc",
    "make_batches",
    "oracle_predict",
    "signal_tokens",
    "split",
    "synthesize_corpus",
    "synthetic_label_names",
    "write_label_map",
    "write_tncc",
]
