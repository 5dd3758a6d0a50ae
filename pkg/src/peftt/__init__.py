from .accounting import AccountingRow, accounting_table, adapter_count, ratio_report, solve_rank
from .checkpoint import load_checkpoint, save_checkpoint
from .data import CorpusSplits, Example, load_tncc, make_batches, split, synthesize_corpus
from .exceptions import PefttError
from .metrics import ConfusionMatrix, accuracy, confusion, macro_f1
from .model import EncoderConfig, EncoderModel, forward_mlm, inject_adapters, trainable_parameters
from .prompts import PromptManager, Template, Verbalizer, classify, project_verbalizer, wrap
from .tensor import Tensor, backward, check_gradients, no_grad
from .text import Tokenizer, Vocabulary, preprocess_symbols, tokenize
from .training import Scenario, Trainer, TrainReport, adam_step, evaluate, run_training

__all__ = [
    "AccountingRow",
    "ConfusionMatrix",
    "CorpusSplits",
    "EncoderConfig",
    "EncoderModel",
    "Example",
    "PefttError",
    "PromptManager",
    "Scenario",
    "Template",
    "Tensor",
    "Tokenizer",
    "TrainReport",
    "Trainer",
    "Verbalizer",
    "Vocabulary",
    "accounting_table",
    "accuracy",
    "adam_step",
    "adapter_count",
    "backward",
    "check_gradients",
    "classify",
    "confusion",
    "evaluate",
    "forward_mlm",
    "inject_adapters",
    "load_checkpoint",
    "load_tncc",
    "macro_f1",
    "make_batches",
    "no_grad",
    "preprocess_symbols",
    "project_verbalizer",
    "ratio_report",
    "run_training",
    "save_checkpoint",
    "solve_rank",
    "split",
    "synthesize_corpus",
    "tokenize",
    "trainable_parameters",
    "wrap",
]
