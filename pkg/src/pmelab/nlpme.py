"""Nonlinear parametric model embedding.

An encoder maps standardized geometry to a latent vector ``z``; a sigmoid
decoder maps ``z`` to admissible design variables ``u_hat`` in (0, 1)^M; the
geometry is recovered only by pushing ``u_hat`` through the frozen surrogate
(or, for evaluation, through the exact generator).  Training minimizes the
squared geometry mismatch; no parameter-reconstruction term is used.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _io
from .dataset import Standardization, destandardize, standardize
from .errors import ConfigError, ContractError, IntegrityError
from .neuralnet import Mlp, TrainConfig, TrainHistory, load_mlp, mlp_init, save_mlp, train_supervised
from .shapegen import generate_geometry, geometry

__all__ = [
    "ENCODER_HIDDEN",
    "DECODER_HIDDEN",
    "NlpmeModel",
    "train_nlpme",
    "nlpme_encode",
    "nlpme_decode",
    "nlpme_geometry",
    "nlpme_reconstruct",
    "save_nlpme",
    "load_nlpme",
]

ENCODER_HIDDEN = (1024, 1024, 512)
DECODER_HIDDEN = (256, 128)
_OPEN_LO = np.nextafter(0.0, 1.0)
_OPEN_HI = np.nextafter(1.0, 0.0)


def encoder_layers(n_g, hidden, N):
    """Widths and activations of the shared encoder: GELU hidden layers, linear head."""
    hidden = list(hidden)
    return [n_g] + hidden + [N], ["gelu"] * len(hidden) + ["linear"]


def check_shared_stats(dataset, surrogate):
    a, b = dataset.stats, surrogate.stats
    if a.mean.shape != b.mean.shape or not (
        np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
    ):
        raise ContractError("dataset and surrogate use different standardization statistics")


@dataclass
class NlpmeModel:
    network: Mlp  # encoder followed by decoder
    n_encoder_layers: int
    surrogate: object
    N: int
    stats: Standardization
    surrogate_checksum: str
    history: TrainHistory = None

    @property
    def encoder(self):
        return self.network.slice(0, self.n_encoder_layers)

    @property
    def decoder(self):
        return self.network.slice(self.n_encoder_layers)

    @property
    def n_g(self):
        return self.network.n_in

    @property
    def M(self):
        return self.network.n_out

    def check_surrogate(self):
        if self.surrogate.network.checksum() != self.surrogate_checksum:
            raise IntegrityError("surrogate does not match the one used for training")


def train_nlpme(dataset, surrogate, N, cfg=None, encoder_hidden=None, decoder_hidden=None, log=None):
    """Train encoder and decoder through the frozen surrogate on the full dataset."""
    if not getattr(surrogate, "frozen", False):
        raise ContractError("the surrogate must be frozen before embedding training")
    surrogate.verify()
    M = dataset.M
    if not 1 <= N < M:
        raise ContractError(f"latent dimension must satisfy 1 <= N < M={M}, got {N}")
    if surrogate.M != M or surrogate.n_g != dataset.n_g:
        raise ContractError("surrogate widths do not match the dataset")
    check_shared_stats(dataset, surrogate)
    cfg = cfg or TrainConfig()
    enc_w, enc_a = encoder_layers(dataset.n_g, ENCODER_HIDDEN if encoder_hidden is None else encoder_hidden, N)
    dec_hidden = list(DECODER_HIDDEN if decoder_hidden is None else decoder_hidden)
    widths = enc_w + dec_hidden + [M]
    acts = enc_a + ["gelu"] * len(dec_hidden) + ["sigmoid"]
    net = mlp_init(widths, acts, seed=cfg.seed, dtype=np.dtype(cfg.dtype))
    X = dataset.D_std
    checksum = surrogate.network.checksum()
    net, hist = train_supervised(net, X, X, cfg, through=surrogate.network, log=log)
    if surrogate.network.checksum() != checksum:
        raise IntegrityError("surrogate weights changed during embedding training")
    return NlpmeModel(
        network=net,
        n_encoder_layers=len(enc_a),
        surrogate=surrogate,
        N=N,
        stats=dataset.stats,
        surrogate_checksum=checksum,
        history=hist,
    )


def _rows(x, width, name):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != width:
        raise ContractError(f"{name} width {x.shape[-1]} != {width}")
    return x


def nlpme_encode(model, d):
    """Latent coordinates of raw shape modifications (standardized internally)."""
    d = _rows(d, model.n_g, "geometry")
    z = model.encoder(np.atleast_2d(standardize(d, model.stats)))
    return z[0].astype(float) if d.ndim == 1 else z.astype(float)


def nlpme_decode(model, z):
    """Design variables in the open unit box."""
    z = _rows(z, model.N, "latent")
    u = model.decoder(np.atleast_2d(z)).astype(float)
    # a saturated float32 sigmoid rounds to exactly 0 or 1
    np.clip(u, _OPEN_LO, _OPEN_HI, out=u)
    return u[0] if z.ndim == 1 else u


def nlpme_geometry(model, u_hat, path="surrogate", generator=None):
    """Raw shape modifications from design variables; the only geometry-producing call.

    ``path="surrogate"`` destandardizes ``S(u_hat)``; ``path="generator"``
    evaluates the exact generator (``generator`` is its config) and returns
    ``G(u_hat) - g0``.
    """
    u_hat = _rows(u_hat, model.M, "design")
    U = np.atleast_2d(u_hat)
    if path == "surrogate":
        model.check_surrogate()
        d_hat = destandardize(model.surrogate.network(U).astype(float), model.stats)
    elif path == "generator":
        if generator is None:
            raise ConfigError("the generator path needs the generator configuration")
        g0 = geometry(generator.u_base, generator)
        d_hat = np.array([generate_geometry(u, generator, g0).d for u in U])
    else:
        raise ConfigError(f"unknown reconstruction path {path!r}")
    return d_hat[0] if u_hat.ndim == 1 else d_hat


def nlpme_reconstruct(model, d, path="surrogate", generator=None):
    """Encode, decode to ``u_hat`` and rebuild the geometry; returns ``(d_hat, u_hat)``."""
    u_hat = nlpme_decode(model, nlpme_encode(model, d))
    return nlpme_geometry(model, u_hat, path, generator), u_hat


def save_embedding_network(kind, model, dirpath, extra, comment):
    """Bundle layout shared by the embedding and the autoencoder."""
    dirpath = Path(dirpath)
    manifest = {"kind": kind, "N": model.N, "n_encoder_layers": model.n_encoder_layers}
    manifest.update(save_mlp(model.network, dirpath, "net", comment))
    manifest.update(extra or {})
    files = {"stats.csv": np.vstack([model.stats.mean, model.stats.std])}
    if model.history is not None and model.history.epoch:
        files["history.csv"] = np.array(model.history.rows(), dtype=float)
    return _io.write_checked(dirpath, files, manifest, comment)


def load_embedding_network(kind, dirpath):
    dirpath = Path(dirpath)
    man = _io.read_manifest(dirpath / "manifest.txt")
    if man.get("kind") != kind:
        raise IntegrityError(f"{dirpath} is not a {kind} bundle")
    _io.verify_checksums(dirpath, man)
    net = load_mlp(dirpath, "net", man)
    st = _io.read_matrix(dirpath / "stats.csv", rows=2, cols=net.n_in)
    return man, net, Standardization(st[0], st[1])


def save_nlpme(model, dirpath, extra=None, comment=None):
    extra = dict(extra or {})
    extra["surrogate_checksum"] = model.surrogate_checksum
    return save_embedding_network("nlpme", model, dirpath, extra, comment)


def load_nlpme(dirpath, surrogate):
    """Reload an embedding; ``surrogate`` must be the frozen model it was trained with."""
    man, net, stats = load_embedding_network("nlpme", dirpath)
    if not surrogate.frozen:
        raise ContractError("surrogate is not frozen")
    if surrogate.network.checksum() != man.get("surrogate_checksum"):
        raise IntegrityError("surrogate checksum differs from the one recorded at training")
    return NlpmeModel(
        network=net,
        n_encoder_layers=int(man["n_encoder_layers"]),
        surrogate=surrogate,
        N=int(man["N"]),
        stats=stats,
        surrogate_checksum=man["surrogate_checksum"],
    )
