"""Deep autoencoder baseline: geometry -> latent -> geometry, no design variables.

Uses the same encoder as the parametric embedding, a mirrored GELU decoder
with a linear output, and decoupled weight decay.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import Standardization, destandardize, standardize
from .errors import ContractError
from .neuralnet import Mlp, TrainConfig, TrainHistory, mlp_init, train_supervised
from .nlpme import ENCODER_HIDDEN, encoder_layers, load_embedding_network, save_embedding_network

__all__ = ["DECODER_HIDDEN", "WEIGHT_DECAY", "DaeModel", "train_dae", "dae_encode", "dae_reconstruct", "save_dae", "load_dae"]

DECODER_HIDDEN = (512, 1024, 1024)
WEIGHT_DECAY = 2.5e-4


@dataclass
class DaeModel:
    network: Mlp
    n_encoder_layers: int
    N: int
    stats: Standardization
    history: TrainHistory = None

    @property
    def encoder(self):
        return self.network.slice(0, self.n_encoder_layers)

    @property
    def n_g(self):
        return self.network.n_in


def train_dae(dataset, N, cfg=None, encoder_hidden=None, decoder_hidden=None, log=None):
    """Full-dataset training on standardized geometry.

    ``cfg.weight_decay`` is used as given; the default config applies
    :data:`WEIGHT_DECAY`.
    """
    n_g = dataset.n_g
    if not 1 <= N < n_g:
        raise ContractError(f"latent dimension must satisfy 1 <= N < n_g={n_g}, got {N}")
    cfg = cfg or TrainConfig(weight_decay=WEIGHT_DECAY)
    enc_w, enc_a = encoder_layers(n_g, ENCODER_HIDDEN if encoder_hidden is None else encoder_hidden, N)
    dec_hidden = list(DECODER_HIDDEN if decoder_hidden is None else decoder_hidden)
    widths = enc_w + dec_hidden + [n_g]
    acts = enc_a + ["gelu"] * len(dec_hidden) + ["linear"]
    net = mlp_init(widths, acts, seed=cfg.seed, dtype=np.dtype(cfg.dtype))
    X = dataset.D_std
    net, hist = train_supervised(net, X, X, cfg, log=log)
    return DaeModel(network=net, n_encoder_layers=len(enc_a), N=N, stats=dataset.stats, history=hist)


def _check(model, d):
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != model.n_g:
        raise ContractError(f"geometry width {d.shape[-1]} != {model.n_g}")
    return d


def dae_encode(model, d):
    d = _check(model, d)
    z = model.encoder(np.atleast_2d(standardize(d, model.stats))).astype(float)
    return z[0] if d.ndim == 1 else z


def dae_reconstruct(model, d):
    """Destandardized direct reconstruction of raw shape modifications."""
    d = _check(model, d)
    out = model.network(np.atleast_2d(standardize(d, model.stats))).astype(float)
    out = destandardize(out, model.stats)
    return out[0] if d.ndim == 1 else out


def save_dae(model, dirpath, extra=None, comment=None):
    return save_embedding_network("dae", model, dirpath, extra, comment)


def load_dae(dirpath):
    man, net, stats = load_embedding_network("dae", dirpath)
    return DaeModel(network=net, n_encoder_layers=int(man["n_encoder_layers"]), N=int(man["N"]), stats=stats)
