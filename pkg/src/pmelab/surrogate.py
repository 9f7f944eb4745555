"""Differentiable forward surrogate: design variables -> standardized shape modification.

The surrogate is trained once on a 90% split, selected on the remaining 10%
and then frozen; every later stage only reads it.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .dataset import Standardization, destandardize
from .errors import ContractError, IntegrityError
from .metrics import per_sample_nse
from .neuralnet import TrainConfig, TrainHistory, load_mlp, mlp_init, save_mlp, train_supervised

__all__ = [
    "DEFAULT_HIDDEN",
    "SurrogateModel",
    "SurrogatePrediction",
    "FidelityReport",
    "scaled_widths",
    "split_indices",
    "train_surrogate",
    "surrogate_predict",
    "surrogate_fidelity_report",
    "save_surrogate",
    "load_surrogate",
]

DEFAULT_HIDDEN = (128, 512, 1024)
REFERENCE_NG = 2352
VALIDATION_FRACTION = 0.1


def scaled_widths(hidden, n_g, reference=REFERENCE_NG):
    """Scale hidden widths with the output size, keeping the capacity ratio."""
    return [max(1, int(round(w * n_g / reference))) for w in hidden]


def split_indices(S, seed):
    """Seeded 90/10 permutation split; returns ``(train, validation)`` index arrays."""
    if S < 10:
        raise ContractError(f"need at least 10 samples for a validation split, got {S}")
    perm = np.random.default_rng(seed).permutation(S)
    n_val = int(round(VALIDATION_FRACTION * S))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


@dataclass
class SurrogateModel:
    network: object
    stats: Standardization
    val_loss: float = float("nan")
    val_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    history: TrainHistory = None
    checksum: str = ""

    @property
    def frozen(self):
        return self.network.frozen

    @property
    def M(self):
        return self.network.n_in

    @property
    def n_g(self):
        return self.network.n_out

    def freeze(self):
        self.network.freeze()
        self.checksum = self.network.checksum()
        return self

    def verify(self):
        """Raise if the weights no longer match the checksum taken at freezing."""
        if not self.frozen:
            raise ContractError("surrogate is not frozen")
        if self.network.checksum() != self.checksum:
            raise IntegrityError("surrogate weights changed after freezing")


@dataclass
class SurrogatePrediction:
    d_std: np.ndarray
    d: np.ndarray
    outside: np.ndarray  # rows with any component outside [0, 1]


def train_surrogate(dataset, cfg=None, hidden=None, seed=0, log=None):
    """Fit ``u -> standardized d`` on 90% of the samples, select on 10%, freeze."""
    cfg = cfg or TrainConfig()
    hidden = list(DEFAULT_HIDDEN if hidden is None else hidden)
    train, val = split_indices(dataset.S, seed)
    Y = dataset.D_std
    widths = [dataset.M] + hidden + [dataset.n_g]
    acts = ["gelu"] * len(hidden) + ["linear"]
    net = mlp_init(widths, acts, seed=seed, dtype=np.dtype(cfg.dtype))
    net, hist = train_supervised(
        net, dataset.U[train], Y[train], cfg, X_val=dataset.U[val], Y_val=Y[val], log=log
    )
    model = SurrogateModel(
        network=net, stats=dataset.stats, val_loss=hist.best_loss, val_idx=val, history=hist
    )
    return model.freeze()


def surrogate_predict(model, u, batch=1024):
    """Pure batched forward evaluation; out-of-box rows are flagged, not rejected."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u2 = np.atleast_2d(u)
    if u2.shape[1] != model.M:
        raise ContractError(f"input width {u2.shape[1]} != {model.M}")
    out = np.empty((len(u2), model.n_g))
    for i in range(0, len(u2), batch):
        out[i : i + batch] = model.network(u2[i : i + batch])
    outside = np.any((u2 < 0) | (u2 > 1), axis=1)
    d = destandardize(out, model.stats)
    if single:
        return SurrogatePrediction(out[0], d[0], outside[0])
    return SurrogatePrediction(out, d, outside)


@dataclass
class FidelityReport:
    per_sample: np.ndarray  # normalized squared error of S(u) against G(u)
    nmse: float
    median: float
    max: float


def surrogate_fidelity_report(model, U, generator):
    """Compare ``S(u)`` with the exact map ``generator(u) -> d`` on the rows of ``U``.

    ``U`` may be a dataset (its design variables are used).  The report's mean
    is the normalized error of the surrogate outputs against the exact ones.
    """
    U = np.asarray(getattr(U, "U", U), dtype=float)
    D_exact = np.array([generator(u) for u in U])
    D_sur = surrogate_predict(model, U).d
    eps = per_sample_nse(D_exact, D_sur)
    return FidelityReport(
        per_sample=eps, nmse=float(eps.mean()), median=float(np.median(eps)), max=float(eps.max())
    )


def save_surrogate(model, dirpath, extra=None, comment=None):
    if not model.frozen:
        raise ContractError("only frozen surrogates are persisted")
    dirpath = Path(dirpath)
    manifest = {"kind": "surrogate", "frozen": "true", "val_loss": repr(model.val_loss)}
    manifest.update(save_mlp(model.network, dirpath, "net", comment))
    files = {
        "stats.csv": np.vstack([model.stats.mean, model.stats.std]),
        "val_idx.csv": np.asarray(model.val_idx, dtype=float)[None, :],
    }
    if model.history is not None and model.history.epoch:
        files["history.csv"] = np.array(model.history.rows(), dtype=float)
    manifest["degenerate"] = " ".join(str(int(i)) for i in model.stats.degenerate)
    manifest.update(extra or {})
    return _io.write_checked(dirpath, files, manifest, comment)


def load_surrogate(dirpath):
    dirpath = Path(dirpath)
    man = _io.read_manifest(dirpath / "manifest.txt")
    if man.get("kind") != "surrogate":
        raise IntegrityError(f"{dirpath} is not a surrogate bundle")
    if man.get("frozen") != "true":
        raise ContractError(f"surrogate at {dirpath} is not frozen")
    _io.verify_checksums(dirpath, man)
    net = load_mlp(dirpath, "net", man)
    st = _io.read_matrix(dirpath / "stats.csv", rows=2, cols=net.n_out)
    degenerate = np.array([int(i) for i in man.get("degenerate", "").split()], dtype=int)
    val_idx = _io.read_matrix(dirpath / "val_idx.csv", rows=1)[0].astype(int)
    model = SurrogateModel(
        network=net,
        stats=Standardization(st[0], st[1], degenerate),
        val_loss=float(man["val_loss"]),
        val_idx=val_idx,
    )
    return model.freeze()
