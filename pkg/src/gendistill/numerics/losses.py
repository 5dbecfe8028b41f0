"""Softmax and the two training losses (soft-target KL and hard-label CE)."""
import numpy as np


def log_softmax(logits, temperature=1.0):
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits, temperature=1.0):
    """Row-wise softmax of ``logits / temperature`` with max subtraction."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def soften(probs, temperature):
    """Re-temper a probability table: p^(1/T) renormalised (zeros stay zero)."""
    probs = np.asarray(probs, dtype=np.float64)
    if temperature == 1.0:
        return probs
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    return softmax(logp, temperature)


def kl_loss(teacher_probs, student_logits, temperature=1.0):
    """KL(teacher || student) averaged over the batch, and its gradient w.r.t. the logits.

    Both distributions are tempered by ``temperature``; the loss is scaled by
    T^2 so gradient magnitudes stay comparable across temperatures.
    """
    t = np.asarray(teacher_probs, dtype=np.float64)
    z = np.asarray(student_logits, dtype=np.float64)
    if t.shape != z.shape or t.ndim != 2:
        raise ValueError(f"kl_loss: teacher {t.shape} vs student {z.shape}")
    if np.any(t < 0):
        raise ValueError("kl_loss: negative teacher probability")
    t = soften(t, temperature)
    logs = log_softmax(z, temperature)
    B = t.shape[0]
    pos = t > 0
    logt = np.zeros_like(t)
    logt[pos] = np.log(t[pos])
    loss = float((t * (logt - logs)).sum() / B) * temperature ** 2
    grad = (np.exp(logs) - t) * (temperature / B)
    return loss, grad


def cross_entropy_loss(labels, student_logits):
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    y = np.asarray(labels, dtype=np.int64)
    z = np.asarray(student_logits, dtype=np.float64)
    B, C = z.shape
    if y.shape != (B,):
        raise ValueError(f"cross_entropy_loss: labels {y.shape} vs logits {z.shape}")
    if np.any(y < 0) or np.any(y >= C):
        raise ValueError(f"cross_entropy_loss: label outside [0, {C})")
    logs = log_softmax(z)
    rows = np.arange(B)
    loss = float(-logs[rows, y].sum() / B)
    grad = np.exp(logs)
    grad[rows, y] -= 1.0
    return loss, grad / B
