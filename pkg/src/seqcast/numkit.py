"""Dense kernels, activations and a counter-based RNG.

Matrices and vectors are plain ``float64`` numpy arrays. Everything that
needs randomness draws from :class:`Rng` so results never depend on the
version of numpy's own generators.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def sigmoid(x):
    """Logistic function, branch-on-sign form (no overflow for large |x|)."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def tanh_act(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.tanh(x)
    return out if out.ndim else float(out)


def _check_dims(name, W, v):
    if W.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {W.shape}")
    if v.shape[-1] != W.shape[1]:
        raise ValueError(
            f"dimension mismatch: {name} has {W.shape[1]} columns but its "
            f"operand has length {v.shape[-1]}"
        )


def affine(W1, v1, W2, v2, b):
    """Return ``W1 @ v1 + W2 @ v2 + b``.

    ``v1`` and ``v2`` may carry leading batch dimensions; the contraction is
    always over the last axis.
    """
    W1, v1, W2, v2, b = (np.asarray(a, dtype=np.float64) for a in (W1, v1, W2, v2, b))
    _check_dims("W1", W1, v1)
    _check_dims("W2", W2, v2)
    if W2.shape[0] != W1.shape[0]:
        raise ValueError(f"dimension mismatch: W2 has {W2.shape[0]} rows, W1 has {W1.shape[0]}")
    if b.shape != (W1.shape[0],):
        raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({W1.shape[0]},)")
    return v1 @ W1.T + v2 @ W2.T + b


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream: draw ``k`` is ``mix(seed + k * gamma)``.

    The output depends only on ``(seed, counter)``, so streams are
    reproducible on any platform.
    """

    def __init__(self, seed, counter=0):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def next_u64(self, n):
        k = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + k * np.uint64(_GAMMA)
            return _mix64(z)

    def uniform(self, n, low=0.0, high=1.0):
        """``n`` doubles uniform on ``[low, high)`` (53-bit resolution)."""
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def normal(self, n):
        """Standard normals by Box-Muller."""
        m = (n + 1) // 2
        u1 = 1.0 - self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n]

    def spawn(self):
        """Fork an independent child stream; advances this stream by one draw."""
        return Rng(int(self.next_u64(1)[0]))

    def clone(self):
        return Rng(self.seed, self.counter)


def init_uniform(rng, rows, cols, bound):
    """``rows x cols`` matrix with entries i.i.d. uniform in ``[-bound, bound]``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    return rng.uniform(rows * cols, -bound, bound).reshape(rows, cols)
