"""Classification loss."""

import numpy as np

from ..errors import DomainError


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray):
    """Mean categorical cross-entropy over a batch, with its gradient.

    Args:
        logits: (batch, classes) raw scores.
        targets: (batch, classes) one-hot rows.

    Returns:
        (loss, grad): scalar mean loss and the (batch, classes) gradient of
        the loss with respect to the logits, (softmax - target) / batch.
    """
    if logits.shape != targets.shape or logits.ndim != 2:
        raise DomainError(f"logits {logits.shape} and targets {targets.shape} must match")
    if not np.all((targets == 0) | (targets == 1)) or \
            not np.all(targets.sum(axis=1) == 1):
        raise DomainError("targets must be one-hot rows")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    batch = logits.shape[0]
    loss = float(-(targets * log_probs).sum() / batch)
    grad = (np.exp(log_probs) - targets) / batch
    return loss, grad.astype(logits.dtype)
