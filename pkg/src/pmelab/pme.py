"""Linear parametric model embedding (weighted generalized PCA, zero parameter weight).

With the parameter block of the weighting matrix set to zero, the augmented
eigenproblem over ``[d; u]`` decouples: the geometric modes solve the
symmetric problem ``(1/S) Mh Dc^T Dc Mh e = lam e`` with ``Mh = (w_g G)^{1/2}``
and ``q = Mh^{-1} e``, while the parametric modes follow from the lower block,
``v = Uc^T Dc M q / (S lam)``.  Samples are rows throughout.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from . import _io
from .errors import ContractError, IntegrityError, UndefinedMetricError

__all__ = [
    "PmeWeights",
    "PmeModel",
    "fit_pme",
    "pme_encode",
    "pme_reconstruct_geometry",
    "pme_backmap",
    "retained_variance",
    "save_pme",
    "load_pme",
]

RANK_CUTOFF = 1e-12


@dataclass
class PmeWeights:
    G_diag: np.ndarray = None  # None means identity
    w_g: float = 1.0
    w_u: float = 0.0

    def metric(self, n_g):
        G = np.ones(n_g) if self.G_diag is None else np.asarray(self.G_diag, dtype=float)
        if G.shape != (n_g,) or np.any(G <= 0):
            raise ContractError("geometric metric must be n_g positive entries")
        if self.w_u != 0.0:
            raise ContractError("only the zero parameter weight is supported")
        if self.w_g <= 0:
            raise ContractError("geometry weight must be positive")
        return self.w_g * G


@dataclass
class PmeModel:
    eigenvalues: np.ndarray  # all retained eigenvalues, descending
    Q: np.ndarray  # (n_g, r_stored) geometric modes
    V: np.ndarray  # (M, r_stored) parametric modes
    d_mean: np.ndarray
    u_mean: np.ndarray
    metric: np.ndarray  # diagonal of w_g * G
    alpha_train: np.ndarray  # (S, r_stored)
    total_variance: float

    @property
    def r(self):
        return len(self.eigenvalues)

    @property
    def n_stored(self):
        return self.Q.shape[1]


def fit_pme(D, U, weights=None, n_modes=None):
    """Fit the linear embedding.

    ``D`` is (S, n_g), ``U`` is (S, M); a :class:`~pmelab.dataset.Dataset`
    can be passed as ``D`` with ``U`` omitted.  ``n_modes`` caps how many mode
    vectors are kept; all eigenvalues are always kept.
    """
    if U is None and hasattr(D, "D"):
        D, U = D.D, D.U
    D = np.asarray(D, dtype=float)
    U = np.asarray(U, dtype=float)
    S, n_g = D.shape
    if S < 2:
        raise ContractError("need at least two samples")
    if U.shape[0] != S:
        raise ContractError("U and D must have the same number of samples")
    weights = weights or PmeWeights()
    metric = weights.metric(n_g)
    sq = np.sqrt(metric)

    d_mean, u_mean = D.mean(axis=0), U.mean(axis=0)
    Dc, Uc = D - d_mean, U - u_mean
    X = Dc * sq  # rows are Mh d_c

    if n_g <= S:
        lam, E = linalg.eigh(X.T @ X / S)
        lam, E = lam[::-1], E[:, ::-1]
    else:
        lam, F = linalg.eigh(X @ X.T / S)
        lam, F = lam[::-1], F[:, ::-1]
        pos = lam > 0
        E = np.zeros((n_g, len(lam)))
        E[:, pos] = X.T @ F[:, pos] / np.sqrt(S * lam[pos])

    total = float(np.sum(X * X) / S)
    # identical samples leave only rounding noise in Dc
    scale = float(np.mean((D * sq) ** 2))
    if lam[0] <= 1e-24 * scale or lam[0] <= 0:
        keep = np.zeros(len(lam), dtype=bool)
    else:
        keep = lam > RANK_CUTOFF * lam[0]
    lam, E = lam[keep], E[:, keep]
    if n_modes is not None:
        E = E[:, :n_modes]
    Q = E / sq[:, None]
    alpha = Dc @ (Q * metric[:, None])
    V = Uc.T @ alpha / (S * lam[: Q.shape[1]])
    return PmeModel(
        eigenvalues=lam,
        Q=Q,
        V=V,
        d_mean=d_mean,
        u_mean=u_mean,
        metric=metric,
        alpha_train=alpha,
        total_variance=total,
    )


def _check_n(model, N):
    if N < 0 or N > model.n_stored:
        raise ContractError(f"N={N} exceeds available modes ({model.n_stored})")


def pme_encode(model, d, N=None):
    """Reduced coordinates ``alpha_k = q_k^T M (d - d_mean)`` for one or many rows."""
    N = model.n_stored if N is None else N
    _check_n(model, N)
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != len(model.d_mean):
        raise ContractError(f"geometry width {d.shape[-1]} != {len(model.d_mean)}")
    return (d - model.d_mean) @ (model.Q[:, :N] * model.metric[:, None])


def _n_from_alpha(model, alpha, N):
    alpha = np.asarray(alpha, dtype=float)
    N = alpha.shape[-1] if N is None else N
    if alpha.shape[-1] != N:
        raise ContractError(f"alpha has {alpha.shape[-1]} entries, expected {N}")
    _check_n(model, N)
    return alpha, N


def pme_reconstruct_geometry(model, alpha, N=None):
    alpha, N = _n_from_alpha(model, alpha, N)
    return model.d_mean + alpha @ model.Q[:, :N].T


def pme_backmap(model, alpha, N=None, clip=False):
    """``u_hat = u_mean + V_N alpha``; with ``clip`` also returns the out-of-box mask."""
    alpha, N = _n_from_alpha(model, alpha, N)
    u = model.u_mean + alpha @ model.V[:, :N].T
    if clip:
        outside = (u < 0) | (u > 1)
        return np.clip(u, 0.0, 1.0), outside
    return u


def retained_variance(model, N):
    if model.r == 0:
        raise UndefinedMetricError("retained variance undefined for a rank-0 model")
    if not 0 <= N <= model.r:
        raise ContractError(f"N={N} outside 0..{model.r}")
    return float(np.sum(model.eigenvalues[:N]) / np.sum(model.eigenvalues))


def save_pme(model, dirpath, extra=None, comment=None):
    files = {
        "eigenvalues.csv": model.eigenvalues[None, :],
        "Q.csv": model.Q.T,
        "V.csv": model.V.T,
        "means.csv": model.d_mean[None, :],
        "u_mean.csv": model.u_mean[None, :],
        "metric.csv": model.metric[None, :],
        "alpha_train.csv": model.alpha_train,
    }
    manifest = {
        "kind": "pme",
        "r": model.r,
        "n_stored": model.n_stored,
        "n_g": len(model.d_mean),
        "M": len(model.u_mean),
        "S": model.alpha_train.shape[0],
        "total_variance": repr(model.total_variance),
    }
    manifest.update(extra or {})
    _io.write_checked(dirpath, files, manifest, comment)
    return Path(dirpath)


def load_pme(dirpath):
    dirpath = Path(dirpath)
    man = _io.read_manifest(dirpath / "manifest.txt")
    if man.get("kind") != "pme":
        raise IntegrityError(f"{dirpath} is not a PME bundle")
    _io.verify_checksums(dirpath, man)
    r, k, n_g, M, S = (int(man[x]) for x in ("r", "n_stored", "n_g", "M", "S"))
    read = _io.read_matrix
    return PmeModel(
        eigenvalues=read(dirpath / "eigenvalues.csv", rows=1, cols=r)[0],
        Q=read(dirpath / "Q.csv", rows=k, cols=n_g).T if k else np.zeros((n_g, 0)),
        V=read(dirpath / "V.csv", rows=k, cols=M).T if k else np.zeros((M, 0)),
        d_mean=read(dirpath / "means.csv", rows=1, cols=n_g)[0],
        u_mean=read(dirpath / "u_mean.csv", rows=1, cols=M)[0],
        metric=read(dirpath / "metric.csv", rows=1, cols=n_g)[0],
        alpha_train=read(dirpath / "alpha_train.csv", rows=S, cols=k) if k else np.zeros((S, 0)),
        total_variance=float(man["total_variance"]),
    )
