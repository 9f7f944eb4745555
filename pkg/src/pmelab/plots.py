"""Self-contained SVG figures with the plotted data embedded as comments."""

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["error_curves_svg", "reduction_svg", "histogram_svg"]

_STYLES = {"PME": ("C0", "o"), "NLPME": ("C3", "s"), "DAE": ("C2", "^")}
_RULES = {0.05: "--", 0.01: ":"}


def _save(fig, path, data_lines, header=None):
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "pmelab", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    svg = buf.getvalue()
    comments = [header] if header else []
    comments += data_lines
    block = "".join(f"<!-- {c.replace('--', '- -')} -->\n" for c in comments)
    # comments go right after the XML declaration so the file stays well formed
    head, sep, rest = svg.partition("?>\n")
    svg = head + sep + block + rest if sep else block + svg
    Path(path).write_text(svg)
    return Path(path)


def error_curves_svg(curves, path, taus=(0.05, 0.01), header=None):
    """Error against latent dimension on a log ordinate, one line per method.

    ``curves`` maps a method name to ``(N, eps)`` sequences.  Each threshold
    is drawn as a horizontal rule with ``gid="threshold-<tau>"``.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    data = []
    for method, (N, eps) in curves.items():
        color, marker = _STYLES.get(method, ("k", "x"))
        eps = np.asarray(eps, dtype=float)
        ok = eps > 0
        ax.plot(np.asarray(N)[ok], eps[ok], marker=marker, color=color, label=method)
        data.append(f"{method} N={list(map(int, N))} eps={[float(e) for e in eps]}")
    for tau in taus:
        line = ax.axhline(tau, color="0.4", lw=1, ls=_RULES.get(tau, "-."))
        line.set_gid(f"threshold-{tau:g}")
    ax.set_yscale("log")
    ax.set_xlabel("latent dimension N")
    ax.set_ylabel("normalized reconstruction error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path, data, header)


def reduction_svg(curves, M, path, header=None):
    """Relative error reduction vs PME (%) against dimensionality reduction ``100 (1 - N/M)``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    data = []
    for method, (N, red) in curves.items():
        color, marker = _STYLES.get(method, ("k", "x"))
        x = 100.0 * (1.0 - np.asarray(N, dtype=float) / M)
        ax.plot(x, red, marker=marker, color=color, label=method)
        data.append(f"{method} N={list(map(int, N))} reduction={[float(r) for r in red]}")
    ax.axhline(0.0, color="0.4", lw=1)
    ax.set_xlabel("dimensionality reduction (%)")
    ax.set_ylabel("error reduction vs PME (%)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path, data, header)


def histogram_svg(histograms, path, N, header=None):
    """Step plot of per-sample error densities; ``histograms`` maps method -> (density, edges)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    data = []
    for method, (density, edges) in histograms.items():
        color, _ = _STYLES.get(method, ("k", "x"))
        ax.stairs(density, edges, color=color, label=method)
        data.append(f"{method} edges={[float(e) for e in edges]} density={[float(v) for v in density]}")
    ax.set_xlabel(f"per-sample normalized squared error (N={N})")
    ax.set_ylabel("probability density")
    ax.legend()
    return _save(fig, path, data, header)
