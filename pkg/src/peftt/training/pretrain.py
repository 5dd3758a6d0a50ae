"""Masked-language-model warm-up of a freshly initialised encoder.

The desk encoder has no published weights to load, so before any
fine-tuning mode starts it is pretrained on the training titles with a
plain MLM objective. Labels are never seen.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from peftt.exceptions import ConfigError
from peftt.model.encoder import EncoderModel, MlmHead
from peftt.tensor import backward, cross_entropy, current_tape, embedding, reshape
from peftt.text.vocab import MASK_ID, PAD_ID
from peftt.training.optim import AdamState, adam_step
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

MASK_FRACTION = 0.15


def masked_batch(
    rows: Sequence[Sequence[int]], n_fixed: int, rng: np.random.Generator
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.bool_], NDArray[np.int64], NDArray[np.int64]]:
    """Pad `rows` to the longest one and mask tokens after the first `n_fixed` of each.

    Every row with maskable tokens gets max(1, round(MASK_FRACTION * n))
    masks. Returns the masked ids, the original ids, the pad mask, the flat
    indices of the masked positions and their original ids.
    """
    length = max(len(row) for row in rows)
    ids = np.full((len(rows), length), PAD_ID, dtype=np.int64)
    pad_mask = np.ones((len(rows), length), dtype=bool)
    flat: list[int] = []
    for r, row in enumerate(rows):
        ids[r, : len(row)] = row
        pad_mask[r, : len(row)] = False
        candidates = np.arange(n_fixed, len(row))
        if candidates.size:
            count = max(1, round(MASK_FRACTION * candidates.size))
            chosen = np.sort(rng.choice(candidates, size=count, replace=False))
            flat.extend(int(r * length + position) for position in chosen)
    original = ids.copy()
    index = np.asarray(flat, dtype=np.int64)
    ids.reshape(-1)[index] = MASK_ID
    return ids, original, pad_mask, index, original.reshape(-1)[index]


def pretrain_mlm(
    model: EncoderModel,
    sequences: Sequence[Sequence[int]],
    n_fixed: int = 0,
    *,
    epochs: int,
    lr: float,
    batch_size: int = 16,
    seed: int = 0,
) -> list[float]:
    """Train every base tensor of `model` to predict masked tokens; returns the mean loss per epoch.

    `n_fixed` leading tokens of each sequence (a [CLS] or the template's
    fixed words) are never masked. Masks and batch order are drawn from a
    generator seeded by `seed` and the epoch, so the warm-up is reproducible.
    """
    if not isinstance(model.head, MlmHead):
        raise ConfigError("MLM warm-up needs a model with an MLM head")
    if model.adapters is not None:
        raise ConfigError("warm up the base before injecting adapters")
    usable = [list(row[: model.config.max_len]) for row in sequences if len(row) > n_fixed]
    if not usable:
        raise ConfigError("no sequence has tokens to mask")

    params = model.parameters()
    state = AdamState.for_parameters(params)
    losses: list[float] = []
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(len(usable))
        batch_losses: list[float] = []
        for start in range(0, len(order), batch_size):
            rows = [usable[i] for i in order[start : start + batch_size]]
            ids, _, pad_mask, index, targets = masked_batch(rows, n_fixed, rng)
            current_tape().clear()
            hidden = model.encode(ids, pad_mask)
            batch, length, width = hidden.shape
            masked_rows = embedding(reshape(hidden, (batch * length, width)), index)
            loss = cross_entropy(model.mlm_logits(masked_rows), targets)
            backward(loss)
            adam_step(params, [p.grad for p in params], state, lr)
            model.zero_grad()
            batch_losses.append(loss.item())
        losses.append(float(np.mean(batch_losses)))
        logger.debug("MLM warm-up epoch", extra={"epoch": epoch + 1, "loss": losses[-1]})

    if losses:
        model.pretrained = True
        logger.info(f"MLM warm-up: {epochs} epochs over {len(usable)} titles, loss {losses[0]:.4f} -> {losses[-1]:.4f}")
    return losses
