"""KL and Jensen-Shannon divergence in nats."""
import numpy as np


def kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q), with 0 * log(0 / q) taken as 0. Requires q > 0 wherever p > 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def jsd(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    # rounding can leave a hair below zero when p and q nearly coincide
    return max(0.0, 0.5 * kl(p, m) + 0.5 * kl(q, m))
