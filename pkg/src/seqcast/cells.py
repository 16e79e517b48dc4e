"""Forward dynamics for vanilla RNN, LSTM and bidirectional LSTM layers.

All step functions accept inputs with optional leading batch dimensions:
``x`` has shape ``(..., input)`` and states ``(..., hidden)``.
"""

from dataclasses import dataclass, fields

import numpy as np

from .numkit import affine, init_uniform, sigmoid, tanh_act

GATES = ("f", "i", "c", "o")


@dataclass(frozen=True)
class RnnParams:
    Wx: np.ndarray  # hidden x input
    Wh: np.ndarray  # hidden x hidden
    b: np.ndarray

    def __post_init__(self):
        H = self.b.shape[0]
        if self.Wh.shape != (H, H) or self.Wx.shape[0] != H:
            raise ValueError(
                f"inconsistent RNN shapes: Wx {self.Wx.shape}, Wh {self.Wh.shape}, b {self.b.shape}"
            )

    @property
    def hidden(self):
        return self.b.shape[0]

    @property
    def n_input(self):
        return self.Wx.shape[1]

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def init(cls, rng, n_input, hidden):
        bound = 1.0 / np.sqrt(hidden)
        return cls(
            Wx=init_uniform(rng, hidden, n_input, bound),
            Wh=init_uniform(rng, hidden, hidden, bound),
            b=np.zeros(hidden),
        )


@dataclass(frozen=True)
class LstmParams:
    """Weights for the four gates (forget, input, candidate, output)."""

    Wfh: np.ndarray
    Wfx: np.ndarray
    bf: np.ndarray
    Wih: np.ndarray
    Wix: np.ndarray
    bi: np.ndarray
    Wch: np.ndarray
    Wcx: np.ndarray
    bc: np.ndarray
    Woh: np.ndarray
    Wox: np.ndarray
    bo: np.ndarray

    def __post_init__(self):
        H = self.bf.shape[0]
        I = self.Wfx.shape[1]
        for g in GATES:
            Wh, Wx, b = self.gate(g)
            if Wh.shape != (H, H) or Wx.shape != (H, I) or b.shape != (H,):
                raise ValueError(
                    f"gate {g!r} shapes {Wh.shape}, {Wx.shape}, {b.shape} "
                    f"inconsistent with hidden={H}, input={I}"
                )

    def gate(self, g):
        return getattr(self, f"W{g}h"), getattr(self, f"W{g}x"), getattr(self, f"b{g}")

    @property
    def hidden(self):
        return self.bf.shape[0]

    @property
    def n_input(self):
        return self.Wfx.shape[1]

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def init(cls, rng, n_input, hidden, forget_bias=1.0):
        """Uniform(+-1/sqrt(hidden)) weights, zero biases except the forget gate."""
        bound = 1.0 / np.sqrt(hidden)
        kw = {}
        for g in GATES:
            kw[f"W{g}h"] = init_uniform(rng, hidden, hidden, bound)
            kw[f"W{g}x"] = init_uniform(rng, hidden, n_input, bound)
            kw[f"b{g}"] = np.full(hidden, forget_bias if g == "f" else 0.0)
        return cls(**kw)

    @classmethod
    def zeros(cls, n_input, hidden):
        kw = {}
        for g in GATES:
            kw[f"W{g}h"] = np.zeros((hidden, hidden))
            kw[f"W{g}x"] = np.zeros((hidden, n_input))
            kw[f"b{g}"] = np.zeros(hidden)
        return cls(**kw)


@dataclass(frozen=True)
class CellState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden, batch=None):
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass(frozen=True)
class GateTrace:
    """Intermediates of one LSTM step, kept for backpropagation."""

    f: np.ndarray
    i: np.ndarray
    c_tilde: np.ndarray
    c: np.ndarray
    o: np.ndarray
    h: np.ndarray
    tanh_c: np.ndarray


def _as_input(x, n_input):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (n_input,):
        raise ValueError(f"dimension mismatch: expected input width {n_input}, got shape {x.shape}")
    return x


def rnn_step(p, x, h_prev):
    """``tanh(Wx x + Wh h_prev + b)``."""
    x = _as_input(x, p.n_input)
    return tanh_act(affine(p.Wh, np.asarray(h_prev, dtype=np.float64), p.Wx, x, p.b))


def rnn_forward(p, xs, h0):
    hs = []
    h = np.asarray(h0, dtype=np.float64)
    for x in xs:
        h = rnn_step(p, x, h)
        hs.append(h)
    return hs


def lstm_step(p, x, s_prev):
    x = _as_input(x, p.n_input)
    h_prev, c_prev = s_prev.h, s_prev.c
    f = sigmoid(affine(p.Wfh, h_prev, p.Wfx, x, p.bf))
    i = sigmoid(affine(p.Wih, h_prev, p.Wix, x, p.bi))
    c_tilde = tanh_act(affine(p.Wch, h_prev, p.Wcx, x, p.bc))
    c = f * c_prev + i * c_tilde
    o = sigmoid(affine(p.Woh, h_prev, p.Wox, x, p.bo))
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return CellState(h, c), GateTrace(f, i, c_tilde, c, o, h, tanh_c)


def lstm_forward(p, xs, s0):
    """Fold :func:`lstm_step` over ``xs`` starting from ``s0``.

    Returns ``(states, traces)``; ``states[-1]`` is the final state to carry
    into the next call when training statefully.
    """
    states, traces = [], []
    s = s0
    for x in xs:
        s, tr = lstm_step(p, x, s)
        states.append(s)
        traces.append(tr)
    return states, traces


def _check_pair(pf, pb):
    if pf.n_input != pb.n_input or pf.hidden != pb.hidden:
        raise ValueError(
            f"forward/backward LSTM mismatch: input {pf.n_input} vs {pb.n_input}, "
            f"hidden {pf.hidden} vs {pb.hidden}"
        )


def bilstm_forward(pf, pb, xs):
    """Per-step concatenation ``[h_fwd[t]; h_bwd[T-1-t]]`` of width ``2H``.

    The backward LSTM runs over ``reversed(xs)``; both passes start from zero.
    """
    _check_pair(pf, pb)
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    if not xs:
        return []
    batch = xs[0].shape[:-1]
    zero = lambda: CellState(np.zeros(batch + (pf.hidden,)), np.zeros(batch + (pf.hidden,)))
    fwd, _ = lstm_forward(pf, xs, zero())
    bwd, _ = lstm_forward(pb, xs[::-1], zero())
    T = len(xs)
    return [np.concatenate([fwd[t].h, bwd[T - 1 - t].h], axis=-1) for t in range(T)]
