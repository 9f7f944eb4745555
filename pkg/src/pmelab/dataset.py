"""Sampled design-space discretization: design variables, shape modifications, stats.

Arrays are stored one sample per row: ``U`` is (S, M) and ``D`` is (S, n_g).
"""

from dataclasses import dataclass, field
import hashlib
from pathlib import Path

import numpy as np

from . import _io
from .errors import DatasetError, IntegrityError
from .shapegen import GeneratorConfig, generate_geometry, geometry, sample_design

__all__ = [
    "Standardization",
    "Dataset",
    "build_dataset",
    "compute_standardization",
    "standardize",
    "destandardize",
    "save",
    "load",
]

DEGENERATE_STD = 1e-12


@dataclass
class Standardization:
    """Per-feature z-score statistics (population variance)."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def compute_standardization(D):
    D = np.asarray(D, dtype=float)
    mean = D.mean(axis=0)
    std = D.std(axis=0)
    degenerate = np.flatnonzero(std < DEGENERATE_STD)
    std[degenerate] = 1.0
    return Standardization(mean=mean, std=std, degenerate=degenerate)


def standardize(D, stats):
    return (np.asarray(D, dtype=float) - stats.mean) / stats.std


def destandardize(D_std, stats):
    return np.asarray(D_std, dtype=float) * stats.std + stats.mean


@dataclass
class Dataset:
    U: np.ndarray
    D: np.ndarray
    g0: np.ndarray
    stats: Standardization
    u_mean: np.ndarray
    manifest: dict

    @property
    def S(self):
        return self.D.shape[0]

    @property
    def M(self):
        return self.U.shape[1]

    @property
    def n_g(self):
        return self.D.shape[1]

    @property
    def d_mean(self):
        return self.stats.mean

    @property
    def D_std(self):
        return standardize(self.D, self.stats)

    def hash(self):
        return self.manifest.get("dataset_hash", "")


def _assemble(U, D, g0, manifest):
    stats = compute_standardization(D)
    return Dataset(U=U, D=D, g0=g0, stats=stats, u_mean=U.mean(axis=0), manifest=manifest)


def build_dataset(cfg: GeneratorConfig, S_requested, skip=1, seed=0):
    """Sobol-sample the design box, generate geometries and keep the valid ones."""
    if S_requested < 2:
        raise DatasetError("S_requested must be >= 2")
    U_all = sample_design(cfg, S_requested, skip)
    g0 = geometry(cfg.u_base, cfg)
    keep_u, keep_d = [], []
    for u in U_all:
        sample = generate_geometry(u, cfg, g0)
        if sample.valid:
            keep_u.append(sample.u)
            keep_d.append(sample.d)
    if len(keep_u) < 2:
        raise DatasetError(f"only {len(keep_u)} valid samples out of {S_requested}")
    U, D = np.array(keep_u), np.array(keep_d)
    manifest = {
        "generator_hash": cfg.hash(),
        "seed": seed,
        "skip": skip,
        "S_requested": S_requested,
        "S": len(U),
        "M": cfg.M,
        "n_g": cfg.n_g,
    }
    digest = hashlib.sha256(repr(sorted(manifest.items())).encode())
    digest.update(U.tobytes())
    digest.update(D.tobytes())
    manifest["dataset_hash"] = digest.hexdigest()[:16]
    return _assemble(U, D, g0, manifest)


def save(dataset, dirpath, comment=None):
    """Write ``U.csv``, ``D.csv``, ``g0.csv``, ``stats.csv`` and ``manifest.txt``."""
    stats = np.vstack([dataset.stats.mean, dataset.stats.std])
    files = {"U.csv": dataset.U, "D.csv": dataset.D, "g0.csv": dataset.g0[None, :], "stats.csv": stats}
    manifest = {k: v for k, v in dataset.manifest.items() if not k.startswith("sha256.")}
    manifest["degenerate"] = " ".join(str(int(i)) for i in dataset.stats.degenerate)
    dataset.manifest = _io.write_checked(dirpath, files, manifest, comment)
    return Path(dirpath)


def load(dirpath, cfg=None):
    """Reload a saved dataset, verifying checksums and (optionally) the generator hash."""
    dirpath = Path(dirpath)
    manifest = _io.read_manifest(dirpath / "manifest.txt")
    _io.verify_checksums(dirpath, manifest)
    if cfg is not None and manifest.get("generator_hash") != cfg.hash():
        raise IntegrityError(
            f"dataset at {dirpath} was built for generator {manifest.get('generator_hash')}, "
            f"not {cfg.hash()}"
        )
    try:
        S, M, n_g = (int(manifest[k]) for k in ("S", "M", "n_g"))
    except KeyError as exc:
        raise IntegrityError(f"manifest missing field {exc}") from exc
    U = _io.read_matrix(dirpath / "U.csv", rows=S, cols=M)
    D = _io.read_matrix(dirpath / "D.csv", rows=S, cols=n_g)
    g0 = _io.read_matrix(dirpath / "g0.csv", rows=1, cols=n_g)[0]
    st = _io.read_matrix(dirpath / "stats.csv", rows=2, cols=n_g)
    degenerate = np.array([int(i) for i in manifest.get("degenerate", "").split()], dtype=int)
    stats = Standardization(mean=st[0], std=st[1], degenerate=degenerate)
    for key in ("seed", "skip", "S_requested", "S", "M", "n_g"):
        if key in manifest:
            manifest[key] = int(manifest[key])
    return Dataset(U=U, D=D, g0=g0, stats=stats, u_mean=U.mean(axis=0), manifest=manifest)
