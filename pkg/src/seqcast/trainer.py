"""MSE objective, backpropagation through time, clipping, Adam and the fit loop.

A :class:`Network` is a single recurrent layer followed by an affine scalar
readout of the last time step. Three kinds are supported:

``"L"``  stateful LSTM. Samples inside a batch are chained, so sample ``k``
         starts from the final state of sample ``k-1``; the state is carried
         (without gradient) from one batch to the next and reset per epoch.
``"B"``  bidirectional LSTM. Each window is read forwards by one LSTM and
         backwards by another, both from zero state; the readout sees the
         concatenated final hidden states of the two directions.
``"R"``  stateful vanilla RNN, chained like ``"L"``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .cells import GATES, CellState, LstmParams, RnnParams, lstm_forward, rnn_step
from .numkit import Rng, init_uniform

KINDS = ("L", "B", "R")


def mse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {target.size} targets")
    if pred.size == 0:
        raise ValueError("mse_loss of empty input")
    return float(np.mean((pred - target) ** 2))


@dataclass
class Network:
    kind: str
    n_input: int
    hidden: int
    params: dict

    def lstm(self, prefix):
        return LstmParams(**{k[len(prefix) + 1:]: v for k, v in self.params.items()
                             if k.startswith(prefix + ".")})

    def rnn(self):
        return RnnParams(**{k[5:]: v for k, v in self.params.items() if k.startswith("cell.")})

    @property
    def stateful(self):
        return self.kind in ("L", "R")

    def zero_state(self):
        return CellState.zeros(self.hidden)

    def copy(self):
        return Network(self.kind, self.n_input, self.hidden,
                       {k: v.copy() for k, v in self.params.items()})


def init_network(kind, hidden, rng, n_input=1):
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    params = {}
    if kind == "L":
        params.update({f"cell.{k}": v for k, v in LstmParams.init(rng, n_input, hidden).arrays().items()})
    elif kind == "R":
        params.update({f"cell.{k}": v for k, v in RnnParams.init(rng, n_input, hidden).arrays().items()})
    else:
        for prefix in ("fwd", "bwd"):
            params.update({f"{prefix}.{k}": v
                           for k, v in LstmParams.init(rng, n_input, hidden).arrays().items()})
    width = 2 * hidden if kind == "B" else hidden
    params["out.W"] = init_uniform(rng, 1, width, 1.0 / math.sqrt(width))
    params["out.b"] = np.zeros(1)
    return Network(kind, n_input, hidden, params)


def _windows(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[2] != net.n_input:
        raise ValueError(f"windows must have shape (n, lookback[, {net.n_input}]), got {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("empty batch")
    return X


# ---------------------------------------------------------------------------
# forward passes


def _rnn_chain(p, xs, h0):
    hs = [np.asarray(h0, dtype=np.float64)]
    for x in xs:
        hs.append(rnn_step(p, x, hs[-1]))
    return hs


def _features(net, X, s0):
    """Readout inputs ``(n, width)`` plus whatever the backward pass needs."""
    n, L, _ = X.shape
    if net.kind == "L":
        xs = X.reshape(n * L, net.n_input)
        states, traces = lstm_forward(net.lstm("cell"), xs, s0)
        H = np.stack([states[(k + 1) * L - 1].h for k in range(n)])
        return H, (xs, states, traces), states[-1]
    if net.kind == "R":
        xs = X.reshape(n * L, net.n_input)
        hs = _rnn_chain(net.rnn(), xs, s0.h)
        H = np.stack([hs[(k + 1) * L] for k in range(n)])
        return H, (xs, hs), CellState(hs[-1], np.zeros_like(hs[-1]))
    xs = list(X.transpose(1, 0, 2))
    zero = CellState.zeros(net.hidden, n)
    fs, ftr = lstm_forward(net.lstm("fwd"), xs, zero)
    bs, btr = lstm_forward(net.lstm("bwd"), xs[::-1], zero)
    H = np.concatenate([fs[-1].h, bs[-1].h], axis=1)
    return H, (xs, fs, ftr, bs, btr), None


def predict_batch(net, X, s0=None):
    """Forward-only predictions ``(n,)`` and the carried final state."""
    X = _windows(net, X)
    if s0 is None:
        s0 = net.zero_state()
    H, _, final = _features(net, X, s0)
    return H @ net.params["out.W"][0] + net.params["out.b"][0], final


def batch_loss(net, X, y, s0=None):
    pred, _ = predict_batch(net, X, s0)
    return mse_loss(pred, y)


# ---------------------------------------------------------------------------
# backward passes


def lstm_backward(p, xs, s0, states, traces, dh):
    """Reverse-mode sweep through an LSTM unrolled over ``xs``.

    ``dh[t]`` is the loss gradient arriving at ``h_t`` from outside the
    recurrence (readouts). Returns parameter gradients keyed like
    :meth:`LstmParams.arrays`.
    """
    H, T = p.hidden, len(xs)
    Wh_stack = np.vstack([p.gate(g)[0] for g in GATES])  # (4H, H)
    dz_all = np.empty((T,) + s0.h.shape[:-1] + (4 * H,))
    dh_next = np.zeros_like(s0.h)
    dc_next = np.zeros_like(s0.c)
    for t in range(T - 1, -1, -1):
        tr = traces[t]
        c_prev = states[t - 1].c if t > 0 else s0.c
        dh_t = dh[t] + dh_next
        dc = dc_next + dh_t * tr.o * (1.0 - tr.tanh_c ** 2)
        dz = dz_all[t]
        dz[..., :H] = dc * c_prev * tr.f * (1.0 - tr.f)
        dz[..., H:2 * H] = dc * tr.c_tilde * tr.i * (1.0 - tr.i)
        dz[..., 2 * H:3 * H] = dc * tr.i * (1.0 - tr.c_tilde ** 2)
        dz[..., 3 * H:] = dh_t * tr.tanh_c * tr.o * (1.0 - tr.o)
        dh_next = dz @ Wh_stack
        dc_next = dc * tr.f
    h_prev = np.stack([s0.h] + [s.h for s in states[:-1]]).reshape(-1, H)
    x = np.stack([np.asarray(x, dtype=np.float64) for x in xs]).reshape(-1, p.n_input)
    dz_flat = dz_all.reshape(-1, 4 * H)
    dWh, dWx, db = dz_flat.T @ h_prev, dz_flat.T @ x, dz_flat.sum(axis=0)
    grads = {}
    for k, g in enumerate(GATES):
        rows = slice(k * H, (k + 1) * H)
        grads[f"W{g}h"], grads[f"W{g}x"], grads[f"b{g}"] = dWh[rows], dWx[rows], db[rows]
    return grads


def _rnn_backward(p, xs, hs, dh):
    grads = {k: np.zeros_like(v) for k, v in p.arrays().items()}
    dh_next = np.zeros_like(hs[0])
    for t in range(len(xs) - 1, -1, -1):
        h = hs[t + 1]
        dz = (dh[t] + dh_next) * (1.0 - h ** 2)
        grads["Wx"] += np.outer(dz, xs[t])
        grads["Wh"] += np.outer(dz, hs[t])
        grads["b"] += dz
        dh_next = dz @ p.Wh
    return grads


@dataclass
class BatchResult:
    grads: dict
    loss: float
    preds: np.ndarray
    state: CellState = None


def bptt_gradients(net, X, y, s0=None):
    """Exact gradients of the batch MSE with respect to every parameter."""
    X = _windows(net, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, L, _ = X.shape
    if y.shape != (n,):
        raise ValueError(f"shape mismatch: {n} windows but {y.size} targets")
    if s0 is None:
        s0 = net.zero_state()
    Hf, cache, final = _features(net, X, s0)
    W, b = net.params["out.W"], net.params["out.b"]
    preds = Hf @ W[0] + b[0]
    err = preds - y
    loss = float(np.mean(err ** 2))
    dpred = 2.0 * err / n
    grads = {"out.W": (dpred @ Hf)[None, :], "out.b": np.array([dpred.sum()])}
    dH = np.outer(dpred, W[0])

    if net.kind in ("L", "R"):
        xs = cache[0]
        dh = np.zeros((n * L, net.hidden))
        dh[L - 1::L] = dH
        if net.kind == "L":
            g = lstm_backward(net.lstm("cell"), xs, s0, cache[1], cache[2], dh)
        else:
            g = _rnn_backward(net.rnn(), xs, cache[1], dh)
        grads.update({f"cell.{k}": v for k, v in g.items()})
    else:
        xs, fs, ftr, bs, btr = cache
        zero = CellState.zeros(net.hidden, n)
        for prefix, st, tr, seq, dfin in (
            ("fwd", fs, ftr, xs, dH[:, :net.hidden]),
            ("bwd", bs, btr, xs[::-1], dH[:, net.hidden:]),
        ):
            dh = np.zeros((L, n, net.hidden))
            dh[-1] = dfin
            g = lstm_backward(net.lstm(prefix), seq, zero, st, tr, dh)
            grads.update({f"{prefix}.{k}": v for k, v in g.items()})
    return BatchResult(grads, loss, preds, final)


# ---------------------------------------------------------------------------
# optimisation


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_gradients(grads, max_norm):
    """Rescale so the global L2 norm does not exceed ``max_norm``."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, **hyper)


def adam_step(state, params, grads):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m[k] = b1 * state.m[k] + (1.0 - b1) * g
        v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        m_hat = m[k] / (1.0 - b1 ** t)
        v_hat = v[k] / (1.0 - b2 ** t)
        new_params[k] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, state.lr, b1, b2, state.eps)


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    neurons: int = 4
    batch_size: int = 32
    lookback: int = 1
    clip_norm: float = 5.0
    seed: int = 7
    learning_rate: float = 0.001
    shuffle: bool = False

    def __post_init__(self):
        for name in ("epochs", "neurons", "batch_size", "lookback"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.shuffle:
            raise ValueError("shuffle is not supported; batches are consumed in time order")


@dataclass(frozen=True)
class LossRecord:
    epoch: int
    batch_step: int
    loss: float


@dataclass
class LossTrace:
    records: list = field(default_factory=list)

    def append(self, epoch, batch_step, loss):
        self.records.append(LossRecord(epoch, batch_step, float(loss)))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def epochs(self):
        return sorted({r.epoch for r in self.records})

    def losses(self, epoch=None):
        return np.array([r.loss for r in self.records if epoch is None or r.epoch == epoch])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "batch_step", "loss"])
            for r in self.records:
                w.writerow([r.epoch, r.batch_step, repr(r.loss)])

    @classmethod
    def read_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                trace.append(int(row["epoch"]), int(row["batch_step"]), float(row["loss"]))
        return trace


def fit(model_option, train, cfg, net=None, on_batch=None):
    """Train an ``"L"`` or ``"B"`` network on a :class:`SupervisedSet`.

    ``net`` warm-starts from existing parameters; otherwise weights are drawn
    from ``Rng(cfg.seed)``. ``on_batch(epoch, step, start_state, result)`` is
    called after each forward/backward pass, before the update. Returns
    ``(network, trace)``; epochs and batch steps are numbered from 1.
    """
    if model_option not in ("L", "B"):
        raise ValueError(f"model option must be 'L' or 'B', got {model_option!r}")
    X = np.asarray(train.X, dtype=np.float64)
    y = np.asarray(train.y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("empty training set")
    if net is None:
        net = init_network(model_option, cfg.neurons, Rng(cfg.seed))
    elif net.kind != model_option:
        raise ValueError(f"warm-start network is {net.kind!r}, asked to fit {model_option!r}")
    params = net.params
    opt = AdamState.for_params(params, lr=cfg.learning_rate)
    trace = LossTrace()
    n = len(y)
    for epoch in range(1, cfg.epochs + 1):
        state = net.zero_state()
        for step, start in enumerate(range(0, n, cfg.batch_size), start=1):
            stop = min(start + cfg.batch_size, n)
            cur = Network(model_option, net.n_input, net.hidden, params)
            res = bptt_gradients(cur, X[start:stop], y[start:stop], state)
            grads = clip_gradients(res.grads, cfg.clip_norm)
            params, opt = adam_step(opt, params, grads)
            trace.append(epoch, step, res.loss)
            if on_batch is not None:
                on_batch(epoch, step, state, res)
            if cur.stateful:
                state = res.state
    return Network(model_option, net.n_input, net.hidden, params), trace
