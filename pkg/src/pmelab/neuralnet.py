"""Dense networks with hand-written backpropagation, Adam and plateau scheduling.

Shared by the surrogate, the structured embedding and the autoencoder.  Rows
of every input matrix are samples.
"""

from dataclasses import dataclass, field, replace
import hashlib
import math
from pathlib import Path

import numpy as np
from scipy.special import erf, expit

from . import _io
from .errors import ConfigError, ContractError, IntegrityError, NumericError

__all__ = [
    "ACTIVATIONS",
    "Mlp",
    "mlp_init",
    "mse_loss",
    "Adam",
    "PlateauScheduler",
    "TrainConfig",
    "TrainHistory",
    "train_supervised",
    "gradient_check",
    "gelu",
    "save_mlp",
    "load_mlp",
]

ACTIVATIONS = ("gelu", "sigmoid", "linear")
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """Exact GELU, ``x * Phi(x)``."""
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


# beyond this |z| the GELU tails are flushed to exact 0/identity; float32
# denormals in the tails otherwise slow BLAS calls by an order of magnitude
_GELU_FLUSH = 9.0


def _act_forward(kind, z):
    if kind == "gelu":
        cdf = 0.5 * (1.0 + erf(z * _INV_SQRT2))
        cdf[z < -_GELU_FLUSH] = 0.0
        return z * cdf, cdf
    if kind == "sigmoid":
        s = expit(z)
        return s, s
    return z, None


def _act_backward(kind, z, aux, g):
    if kind == "gelu":
        zc = np.clip(z, -_GELU_FLUSH, _GELU_FLUSH)
        return g * (aux + zc * _INV_SQRT2PI * np.exp(-0.5 * zc * zc))
    if kind == "sigmoid":
        return g * aux * (1.0 - aux)
    return g


class _Cache:
    __slots__ = ("layers", "version", "owner")

    def __init__(self, owner, version):
        self.owner = owner
        self.version = version
        self.layers = []


class Mlp:
    """Chain of affine layers, each followed by its activation.

    ``weights[k]`` has shape (fan_in, fan_out).  Call :meth:`freeze` to make
    every parameter array read-only.
    """

    def __init__(self, widths, activations, weights, biases):
        if len(activations) != len(widths) - 1:
            raise ConfigError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r}")
        self.widths = [int(w) for w in widths]
        self.activations = list(activations)
        self.weights = list(weights)
        self.biases = list(biases)
        self.version = 0
        self._frozen = False

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def n_in(self):
        return self.widths[0]

    @property
    def n_out(self):
        return self.widths[-1]

    @property
    def frozen(self):
        return self._frozen

    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def freeze(self):
        for p in self.params():
            p.flags.writeable = False
        self._frozen = True
        return self

    def checksum(self):
        h = hashlib.sha256()
        h.update(repr((self.widths, self.activations)).encode())
        for p in self.params():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def copy(self):
        return Mlp(
            self.widths,
            self.activations,
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
        )

    def slice(self, start, stop=None):
        """Sub-network over layers ``start:stop`` sharing the same arrays."""
        idx = range(len(self.weights))[start:stop]
        net = Mlp(
            self.widths[idx.start : idx.stop + 1],
            self.activations[start:stop],
            self.weights[start:stop],
            self.biases[start:stop],
        )
        net._frozen = self._frozen
        return net

    def set_params(self, values):
        if self._frozen:
            raise ContractError("network is frozen")
        for p, v in zip(self.params(), values):
            p[...] = v
        self.version += 1

    def forward(self, X):
        X = np.asarray(X, dtype=self.dtype)
        if X.ndim != 2 or X.shape[1] != self.n_in:
            raise ContractError(f"input width {X.shape[-1]} != {self.n_in}")
        cache = _Cache(self, self.version)
        A = X
        for k, (W, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            Z = A @ W
            Z += b
            A_next, aux = _act_forward(act, Z)
            cache.layers.append((A, Z, aux))
            A = A_next
        if not np.all(np.isfinite(A)):
            bad = [k for k, (_, Z, _) in enumerate(cache.layers) if not np.all(np.isfinite(Z))]
            raise NumericError(f"non-finite activations at layer {bad[0] if bad else len(cache.layers) - 1}")
        return A, cache

    def __call__(self, X):
        return self.forward(X)[0]

    def backward(self, cache, dY, param_grads=True, input_grad=True):
        """Reverse pass.  Returns ``(grads, dX)`` with ``grads`` aligned to :meth:`params`."""
        if cache.owner is not self or cache.version != self.version:
            raise ContractError("stale cache: parameters changed since the forward pass")
        g = np.asarray(dY, dtype=self.dtype)
        n = len(self.weights)
        grads = [None] * (2 * n)
        for k in range(n - 1, -1, -1):
            A_prev, Z, aux = cache.layers[k]
            g = _act_backward(self.activations[k], Z, aux, g)
            if param_grads:
                grads[2 * k] = A_prev.T @ g
                grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or input_grad:
                g = g @ self.weights[k].T
        return (grads if param_grads else None), (g if input_grad else None)


def mlp_init(widths, activations, seed=0, dtype=np.float64):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ConfigError(f"invalid layer widths {widths}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(widths, activations, weights, biases)


def mse_loss(pred, target):
    """Mean over all entries of the squared difference, and its gradient."""
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    return loss, (2.0 / diff.size) * diff


class Adam:
    """Bias-corrected Adam with optional decoupled weight decay."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr, weight_decay=0.0):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if weight_decay:
                p *= 1.0 - lr * weight_decay
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)


class PlateauScheduler:
    """Halve (by ``factor``) the rate after ``patience`` epochs without improvement."""

    def __init__(self, lr, factor=0.5, patience=50, lr_min=1e-6, min_improvement=1e-6):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.lr_min = lr_min
        self.min_improvement = min_improvement
        self.best = math.inf
        self.bad_epochs = 0

    def update(self, loss):
        if loss < self.best - self.min_improvement:
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.lr_min)
                self.bad_epochs = 0
        return self.lr


@dataclass
class TrainConfig:
    max_epochs: int = 10_000
    batch_size: int = 128
    lr_initial: float = 1e-3
    lr_min: float = 1e-6
    plateau_factor: float = 0.5
    plateau_patience: int = 50
    early_stop_patience: int = 500
    min_improvement: float = 1e-6
    weight_decay: float = 0.0
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr_min > self.lr_initial:
            raise ConfigError("lr_min must not exceed lr_initial")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs and batch_size must be >= 1")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = -1
    best_loss: float = math.inf
    stopped_early: bool = False

    def rows(self):
        val = self.val_loss if self.val_loss else [float("nan")] * len(self.epoch)
        return list(zip(self.epoch, self.loss, val, self.lr))


def _evaluate(net, X, Y, through, batch=1024):
    total = 0.0
    for i in range(0, len(X), batch):
        out = net(X[i : i + batch])
        if through is not None:
            out = through(out)
        total += float(np.sum((out - Y[i : i + batch]).astype(np.float64) ** 2))
    return total / Y.size


def train_supervised(net, X, Y, cfg, through=None, X_val=None, Y_val=None, log=None):
    """Minibatch Adam on the mean squared error between ``net(X)`` and ``Y``.

    If ``through`` (a frozen :class:`Mlp`) is given, the loss is taken on
    ``through(net(X))`` and its input gradient drives ``net``.  The monitored
    loss is the validation loss when ``X_val`` is supplied, otherwise the
    epoch-mean training loss.  The best monitored weights are restored at
    the end.
    """
    if len(X) == 0:
        raise ContractError("empty training set")
    if through is not None and not through.frozen:
        raise ContractError("the composed network must be frozen")
    if net.frozen:
        raise ContractError("cannot train a frozen network")
    dtype = net.dtype
    X = np.asarray(X, dtype=dtype)
    Y = np.asarray(Y, dtype=dtype)
    has_val = X_val is not None
    if has_val:
        X_val = np.asarray(X_val, dtype=dtype)
        Y_val = np.asarray(Y_val, dtype=dtype)

    rng = np.random.default_rng(cfg.seed)
    params = net.params()
    opt = Adam(params)
    sched = PlateauScheduler(
        cfg.lr_initial, cfg.plateau_factor, cfg.plateau_patience, cfg.lr_min, cfg.min_improvement
    )
    hist = TrainHistory()
    best = [p.copy() for p in params]
    since_best = 0
    S = len(X)
    for epoch in range(cfg.max_epochs):
        lr = sched.lr
        order = rng.permutation(S)
        running = 0.0
        for start in range(0, S, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = X[idx], Y[idx]
            out, cache = net.forward(xb)
            if through is not None:
                pred, tcache = through.forward(out)
                loss, g = mse_loss(pred, yb)
                _, g = through.backward(tcache, g, param_grads=False)
            else:
                loss, g = mse_loss(out, yb)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch offset {start}")
            grads, _ = net.backward(cache, g, input_grad=False)
            opt.step(params, grads, lr, cfg.weight_decay)
            net.version += 1
            running += loss * len(idx)
        train_loss = running / S
        monitored = _evaluate(net, X_val, Y_val, through) if has_val else train_loss
        if not math.isfinite(monitored):
            raise NumericError(f"non-finite monitored loss at epoch {epoch}")
        hist.epoch.append(epoch)
        hist.loss.append(train_loss)
        if has_val:
            hist.val_loss.append(monitored)
        hist.lr.append(lr)
        if log is not None:
            log(epoch, train_loss, monitored, lr)

        if monitored < hist.best_loss - cfg.min_improvement:
            hist.best_loss = monitored
            hist.best_epoch = epoch
            for b, p in zip(best, params):
                b[...] = p
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                hist.stopped_early = True
                break
        sched.update(monitored)

    for b, p in zip(best, params):
        p[...] = b
    net.version += 1
    return net, hist


def gradient_check(net, X, h=1e-5, dY=None, seed=0):
    """Max relative error of analytic vs central-difference gradients.

    The scalar probed is ``sum(dY * net(X))`` with a fixed random ``dY``;
    every parameter entry and every input entry is perturbed.
    """
    X = np.array(X, dtype=np.float64)
    if net.dtype != np.float64:
        raise ContractError("gradient checks need a float64 network")
    Y, cache = net.forward(X)
    if dY is None:
        dY = np.random.default_rng(seed).standard_normal(Y.shape)
    grads, dX = net.backward(cache, dY)

    def scalar(Xe):
        return float(np.sum(dY * net(Xe)))

    worst = 0.0

    def compare(analytic, numeric):
        nonlocal worst
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)

    for p, g in zip(net.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = scalar(X)
            flat[i] = old - h
            fm = scalar(X)
            flat[i] = old
            compare(gflat[i], (fp - fm) / (2 * h))
    for idx in np.ndindex(X.shape):
        Xp, Xm = X.copy(), X.copy()
        Xp[idx] += h
        Xm[idx] -= h
        compare(dX[idx], (scalar(Xp) - scalar(Xm)) / (2 * h))
    return worst


def save_mlp(net, dirpath, prefix, comment=None):
    """Write ``<prefix>.W<k>.csv`` / ``<prefix>.b<k>.csv``; returns manifest entries."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    entries = {
        f"{prefix}.widths": " ".join(map(str, net.widths)),
        f"{prefix}.activations": " ".join(net.activations),
        f"{prefix}.dtype": np.dtype(net.dtype).name,
        f"{prefix}.checksum": net.checksum(),
    }
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        for name, A in ((f"{prefix}.W{k}.csv", W), (f"{prefix}.b{k}.csv", b[None, :])):
            _io.write_matrix(dirpath / name, A, comment)
            entries[f"sha256.{name}"] = _io.file_sha256(dirpath / name)
    return entries


def load_mlp(dirpath, prefix, manifest):
    """Rebuild a network saved by :func:`save_mlp` and check its weight checksum."""
    dirpath = Path(dirpath)
    try:
        widths = [int(w) for w in manifest[f"{prefix}.widths"].split()]
        acts = manifest[f"{prefix}.activations"].split()
        dtype = np.dtype(manifest[f"{prefix}.dtype"])
    except KeyError as exc:
        raise IntegrityError(f"manifest missing {exc}") from exc
    weights, biases = [], []
    for k, (fi, fo) in enumerate(zip(widths[:-1], widths[1:])):
        weights.append(_io.read_matrix(dirpath / f"{prefix}.W{k}.csv", dtype, fi, fo))
        biases.append(_io.read_matrix(dirpath / f"{prefix}.b{k}.csv", dtype, 1, fo)[0])
    net = Mlp(widths, acts, weights, biases)
    if net.checksum() != manifest.get(f"{prefix}.checksum"):
        raise IntegrityError(f"weight checksum mismatch for {prefix} in {dirpath}")
    return net
