import numpy as np
import pytest

from seqcast.numkit import Rng
from seqcast.trainer import batch_loss


def fd_gradients(net, X, y, s0=None, eps=1e-5):
    """Central finite differences of the batch loss for every parameter entry."""
    out = {}
    for name, p in net.params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = batch_loss(net, X, y, s0)
            p[idx] = old - eps
            down = batch_loss(net, X, y, s0)
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        out[name] = g
    return out


def max_rel_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for k in numeric:
        a, n = analytic[k], numeric[k]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max()))
    return worst


def perturbed(net, seed, scale=0.5):
    """Copy of ``net`` with all parameters (biases included) jittered."""
    rng = Rng(seed)
    net = net.copy()
    for k, p in net.params.items():
        net.params[k] = p + rng.uniform(p.size, -scale, scale).reshape(p.shape)
    return net


YAHOO_HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


@pytest.fixture
def write_csv(tmp_path):
    def _write(rows, name="series.csv", header=YAHOO_HEADER):
        path = tmp_path / name
        body = "".join(
            f"{d},{v},{v},{v},{v},{v},100\n" for d, v in rows
        )
        path.write_text(header + body)
        return str(path)
    return _write


ACCEPTANCE_RESULTS = {}


class Criterion:
    def __init__(self):
        self.name = None
        self.detail = ""

    def __call__(self, name):
        self.name = name


@pytest.fixture
def criterion(request):
    """Name an acceptance criterion; reported PASS iff the test passes."""
    c = Criterion()
    yield c
    if c.name:
        ACCEPTANCE_RESULTS[request.node.nodeid] = c


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    passed = {r.nodeid for r in terminalreporter.stats.get("passed", [])}
    terminalreporter.section("acceptance criteria")
    for nodeid, rec in ACCEPTANCE_RESULTS.items():
        status = "PASS" if nodeid in passed else "FAIL"
        detail = f"  ({rec.detail})" if rec.detail else ""
        terminalreporter.write_line(f"{status}  {rec.name}{detail}")
