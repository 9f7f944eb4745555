"""Plain-text persistence helpers shared by datasets and model bundles."""

import hashlib
import io
from pathlib import Path

import numpy as np

from .errors import IntegrityError


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def text_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _fmt(dtype):
    return "%.9g" if np.dtype(dtype) == np.float32 else "%.17g"


def write_matrix(path, A, comment=None):
    """One row per line, header row of column indices, round-trip precision."""
    A = np.atleast_2d(np.asarray(A))
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(",".join(str(j) for j in range(A.shape[1])) + "\n")
    np.savetxt(buf, A, fmt=_fmt(A.dtype), delimiter=",")
    Path(path).write_text(buf.getvalue())


def read_matrix(path, dtype=float, rows=None, cols=None):
    """Inverse of :func:`write_matrix`: skips ``#`` comments and the index header."""
    path = Path(path)
    if not path.exists():
        raise IntegrityError(f"missing file {path}")
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    body = lines[1:]
    try:
        if body:
            A = np.loadtxt(body, delimiter=",", dtype=dtype, ndmin=2)
        else:
            A = np.zeros((0, cols or 0), dtype=dtype)
    except ValueError as exc:
        raise IntegrityError(f"unreadable matrix {path}: {exc}") from exc
    if (rows is not None and A.shape[0] != rows) or (cols is not None and A.shape[1] != cols):
        raise IntegrityError(f"{path} has shape {A.shape}, expected ({rows}, {cols})")
    return A


def write_manifest(path, items, comment=None):
    lines = [f"# {comment}"] if comment else []
    lines += [f"{k}={v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise IntegrityError(f"missing manifest {path}")
    out = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise IntegrityError(f"malformed manifest line in {path}: {line!r}")
        out[key.strip()] = value.strip()
    return out


def write_checked(dirpath, files, manifest, comment=None):
    """Write matrices plus a manifest carrying each file's sha256."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest)
    for name, A in files.items():
        write_matrix(dirpath / name, A, comment)
        manifest[f"sha256.{name}"] = file_sha256(dirpath / name)
    write_manifest(dirpath / "manifest.txt", manifest, comment)
    return manifest


def verify_checksums(dirpath, manifest):
    dirpath = Path(dirpath)
    for key, digest in manifest.items():
        if key.startswith("sha256."):
            name = key[len("sha256."):]
            if not (dirpath / name).exists():
                raise IntegrityError(f"missing file {dirpath / name}")
            if file_sha256(dirpath / name) != digest:
                raise IntegrityError(f"checksum mismatch for {dirpath / name}")
