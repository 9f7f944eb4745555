"""Synthetic lofted-wing generator: design vector -> aligned surface points.

Each section carries ten variables, in this order::

    camber, camber_pos, thickness, chord, le_x, le_y, le_z, twist, roll, yaw

Sections are NACA 4-digit profiles in the x-z plane (x chordwise, z vertical,
y spanwise), scaled by the chord, rotated and translated to the leading edge
position.  The surface is a piecewise-linear loft through the sections.
"""

from dataclasses import dataclass
import hashlib

import numpy as np

from .errors import ConfigError
from .sobol import sobol_points

__all__ = [
    "VAR_NAMES",
    "GeneratorConfig",
    "ShapeSample",
    "default_config",
    "naca_thickness",
    "naca_camber",
    "naca_section",
    "transform_section",
    "loft",
    "normalize",
    "denormalize",
    "geometry",
    "generate_geometry",
    "polygon_self_intersects",
    "validity_check",
    "sample_design",
]

VAR_NAMES = (
    "camber",
    "camber_pos",
    "thickness",
    "chord",
    "le_x",
    "le_y",
    "le_z",
    "twist",
    "roll",
    "yaw",
)
N_VARS = len(VAR_NAMES)

# closed trailing edge: coefficients sum to zero
_THICKNESS_COEFFS = (0.2969, -0.1260, -0.3516, 0.2843, -0.1036)


def naca_thickness(x, t):
    """Half-thickness of a closed-TE NACA 4-digit profile at chord fraction x."""
    x = np.asarray(x, dtype=float)
    a0, a1, a2, a3, a4 = _THICKNESS_COEFFS
    return 5.0 * t * (a0 * np.sqrt(x) + x * (a1 + x * (a2 + x * (a3 + x * a4))))


def naca_camber(x, m, p):
    x = np.asarray(x, dtype=float)
    if m == 0.0:
        return np.zeros_like(x)
    fore = m / p**2 * (2.0 * p * x - x**2)
    aft = m / (1.0 - p) ** 2 * ((1.0 - 2.0 * p) + 2.0 * p * x - x**2)
    return np.where(x < p, fore, aft)


def naca_section(m, p, t, n_pts):
    """Closed unit-chord NACA 4-digit polyline, shape (n_pts, 2).

    Points run from the trailing edge along the upper surface to the leading
    edge, then back along the lower surface.  The TE and LE each appear once.
    Surfaces are offset vertically from the camber line.
    """
    if not np.all(np.isfinite([m, p, t])):
        raise ConfigError(f"non-finite section parameters m={m}, p={p}, t={t}")
    if n_pts < 8 or n_pts % 2:
        raise ConfigError("n_pts must be even and >= 8")
    if not 0.0 < p < 1.0 or t <= 0.0 or m < 0.0:
        raise ConfigError(f"section parameters out of range: m={m}, p={p}, t={t}")

    half = n_pts // 2
    x = 0.5 * (1.0 - np.cos(np.pi * np.arange(half + 1) / half))
    yc = naca_camber(x, m, p)
    yt = naca_thickness(x, t)
    upper = np.column_stack([x, yc + yt])[half:0:-1]  # TE .. just aft of LE
    lower = np.column_stack([x, yc - yt])[:half]  # LE .. just fore of TE
    return np.vstack([upper, lower])


def _rotation(twist, roll, yaw):
    ct, st = np.cos(twist), np.sin(twist)
    cr, sr = np.cos(roll), np.sin(roll)
    cy, sy = np.cos(yaw), np.sin(yaw)
    # twist about y (positive lifts the nose), roll about x, yaw about z
    R_twist = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    R_roll = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    R_yaw = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return R_yaw @ R_roll @ R_twist


def transform_section(points2d, chord=1.0, le=(0.0, 0.0, 0.0), twist=0.0, roll=0.0, yaw=0.0):
    """Place a 2D profile in space.

    Profile (x, y) maps to (x, 0, y) in the section plane, is scaled by
    ``chord``, rotated by twist, roll and yaw (each about the fixed global
    axis, applied in that order) and translated to ``le``.
    """
    pts = np.asarray(points2d, dtype=float)
    params = np.concatenate([[chord, twist, roll, yaw], np.asarray(le, dtype=float)])
    if not np.all(np.isfinite(params)) or not np.all(np.isfinite(pts)):
        raise ConfigError("non-finite section transform")
    local = np.column_stack([pts[:, 0], np.zeros(len(pts)), pts[:, 1]]) * chord
    return local @ _rotation(twist, roll, yaw).T + np.asarray(le, dtype=float)


def loft(sections, n_span, spans=None):
    """Piecewise-linear loft through sections at normalized span positions.

    ``spans`` defaults to uniform positions in [0, 1]; otherwise it must be
    strictly increasing from 0 to 1.  Stations are uniform in [0, 1].
    Returns an (n_span, n_pts, 3) grid; flatten with ``.ravel()`` for the
    station-major, point-minor, xyz-innermost ordering.
    """
    secs = [np.asarray(s, dtype=float) for s in sections]
    if len(secs) < 2:
        raise ConfigError("need at least two sections")
    if len({s.shape for s in secs}) != 1:
        raise ConfigError("all sections must have the same shape")
    if n_span < len(secs):
        raise ConfigError("n_span must be >= number of sections")
    secs = np.stack(secs)
    n_sec = len(secs)
    if spans is None:
        spans = np.linspace(0.0, 1.0, n_sec)
    spans = np.asarray(spans, dtype=float)
    if spans.shape != (n_sec,) or spans[0] != 0.0 or spans[-1] != 1.0 or np.any(np.diff(spans) <= 0):
        raise ConfigError("spans must increase strictly from 0 to 1")
    s = np.linspace(0.0, 1.0, n_span)
    k = np.clip(np.searchsorted(spans, s, side="right") - 1, 0, n_sec - 2)
    w = ((s - spans[k]) / (spans[k + 1] - spans[k]))[:, None, None]
    a, b = secs[k], secs[k + 1]
    # a + w (b - a) reproduces equal sections exactly; w == 1 is pinned to b
    return np.where(w == 1.0, b, a + w * (b - a))


@dataclass
class GeneratorConfig:
    """Section layout, physical bounds and the active-variable mask.

    ``base``, ``lower`` and ``upper`` have length ``10 * n_sections`` in
    physical units; ``active`` selects the free variables.
    """

    n_sections: int
    pts_per_section: int
    n_span: int
    base: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        n = N_VARS * self.n_sections
        self.base = np.asarray(self.base, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)
        for name in ("base", "lower", "upper", "active"):
            if getattr(self, name).shape != (n,):
                raise ConfigError(f"{name} must have length {n}")
        if self.n_sections < 2:
            raise ConfigError("n_sections must be >= 2")
        if self.pts_per_section < 8 or self.pts_per_section % 2:
            raise ConfigError("pts_per_section must be even and >= 8")
        if self.n_span < self.n_sections:
            raise ConfigError("n_span must be >= n_sections")
        if np.any(self.lower[self.active] >= self.upper[self.active]):
            raise ConfigError("degenerate bounds on an active variable")

    @property
    def M(self):
        return int(self.active.sum())

    @property
    def n_g(self):
        return 3 * self.pts_per_section * self.n_span

    @property
    def bounds(self):
        return self.lower[self.active], self.upper[self.active]

    @property
    def u_base(self):
        return normalize(self.base[self.active], self.bounds)

    @property
    def active_names(self):
        return [f"s{i // N_VARS}.{VAR_NAMES[i % N_VARS]}" for i in np.flatnonzero(self.active)]

    def to_text(self):
        lines = [
            f"n_sections = {self.n_sections}",
            f"pts_per_section = {self.pts_per_section}",
            f"n_span = {self.n_span}",
        ]
        for name in ("base", "lower", "upper"):
            lines.append(f"{name} = " + " ".join(repr(float(v)) for v in getattr(self, name)))
        lines.append("active = " + " ".join(str(int(v)) for v in self.active))
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def default_config(n_sections=3, pts_per_section=28, n_span=28):
    """Desk-scale three-section wing with M = 10 free variables, n_g = 2352."""
    if n_sections != 3:
        raise ConfigError("the default layout is defined for three sections")
    #              m     p    t     c    lx   ly   lz    tw   rl   yw
    base = [
        [0.02, 0.40, 0.18, 1.00, 0.00, 0.0, 0.00, 0.0, 0.0, 0.0],  # root
        [0.03, 0.40, 0.14, 0.70, 0.30, 0.6, 0.05, 0.0, 0.0, 0.0],  # mid
        [0.02, 0.40, 0.10, 0.40, 0.70, 1.2, 0.15, 0.0, 0.0, 0.0],  # tip
    ]
    lower = [
        [0.00, 0.10, 0.12, 0.80, -0.2, 0.0, -0.2, -0.6, -0.5, -0.5],
        [0.00, 0.15, 0.06, 0.45, 0.00, 0.2, -0.2, -1.5, -0.5, -0.5],
        [0.00, 0.10, 0.06, 0.20, 0.30, 1.2, 0.00, -0.5, -0.5, -0.5],
    ]
    upper = [
        [0.09, 0.90, 0.24, 1.20, 0.2, 0.0, 0.2, 0.6, 0.5, 0.5],
        [0.09, 0.85, 0.24, 0.95, 0.60, 1.0, 0.3, 1.5, 0.5, 0.5],
        [0.09, 0.90, 0.24, 0.60, 1.10, 1.4, 0.30, 0.5, 0.5, 0.5],
    ]
    active = np.zeros((3, N_VARS), dtype=bool)
    active[0, [2, 3]] = True  # root: thickness, chord
    active[1, [0, 1, 5, 7]] = True  # mid: camber, camber_pos, le_y, twist
    active[2, [3, 6, 7, 9]] = True  # tip: chord, le_z, twist, yaw
    return GeneratorConfig(
        n_sections=3,
        pts_per_section=pts_per_section,
        n_span=n_span,
        base=np.ravel(base),
        lower=np.ravel(lower),
        upper=np.ravel(upper),
        active=active.ravel(),
    )


def denormalize(u_norm, bounds):
    """Map [0, 1] coordinates onto the physical box ``bounds = (lower, upper)``."""
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(lo >= hi):
        raise ConfigError("degenerate bounds: lower must be < upper")
    return lo + np.asarray(u_norm, dtype=float) * (hi - lo)


def normalize(x, bounds):
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(lo >= hi):
        raise ConfigError("degenerate bounds: lower must be < upper")
    return (np.asarray(x, dtype=float) - lo) / (hi - lo)


def _physical(u, cfg):
    u = np.asarray(u, dtype=float)
    if u.shape != (cfg.M,):
        raise ConfigError(f"design vector must have length {cfg.M}, got {u.shape}")
    phys = cfg.base.copy()
    phys[cfg.active] = denormalize(u, cfg.bounds)
    return phys.reshape(cfg.n_sections, N_VARS)


def geometry(u, cfg):
    """Flattened surface coordinates g for normalized design vector u."""
    phys = _physical(u, cfg)
    ly = phys[:, 5]
    spans = (ly - ly[0]) / (ly[-1] - ly[0])
    sections = []
    for m, p, t, c, lx, ly, lz, tw, rl, yw in phys:
        if c <= 0:
            raise ConfigError(f"non-positive chord {c}")
        prof = naca_section(m, p, t, cfg.pts_per_section)
        sections.append(transform_section(prof, c, (lx, ly, lz), tw, rl, yw))
    return loft(sections, cfg.n_span, spans).ravel()


@dataclass
class ShapeSample:
    g: np.ndarray
    d: np.ndarray
    u: np.ndarray
    valid: bool


def generate_geometry(u, cfg, g0=None):
    """Evaluate the generator; ``d = g - g0`` with ``g0`` the baseline geometry.

    Samples failing :func:`validity_check` are returned with ``valid=False``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ConfigError("design vector outside [0, 1]")
    if g0 is None:
        g0 = geometry(cfg.u_base, cfg)
    try:
        g = geometry(u, cfg)
    except ValueError:
        g = np.full(cfg.n_g, np.nan)
    d = g - g0
    # storing g as g0 + d makes d + g0 == g hold bitwise, not just to rounding
    sample = ShapeSample(g=g0 + d, d=d, u=u, valid=True)
    sample.valid = validity_check(sample, cfg)
    return sample


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (
        b[..., 0] - o[..., 0]
    )


def _crossings(P):
    """Per-polygon proper crossings for a stack of closed polygons (..., n, 2)."""
    n = P.shape[-2]
    a, b = P, np.roll(P, -1, axis=-2)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))  # first and last edges share a vertex
    i, j = i[keep], j[keep]
    p1, p2, q1, q2 = a[..., i, :], b[..., i, :], a[..., j, :], b[..., j, :]
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return np.any((d1 * d2 < 0) & (d3 * d4 < 0), axis=-1)


def polygon_self_intersects(points2d):
    """True if any two non-adjacent edges of the closed polygon properly cross."""
    return bool(_crossings(np.asarray(points2d, dtype=float)))


def _rings_in_plane(rings):
    c = rings - rings.mean(axis=-2, keepdims=True)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    return c @ np.swapaxes(vt[..., :2, :], -1, -2)


def validity_check(sample, cfg=None):
    """Flag non-finite geometry, non-positive chords and self-crossing stations.

    Accepts a :class:`ShapeSample` or a raw geometry array.  Station rings
    come from ``cfg`` when given; otherwise ``sample`` must already be a
    ``(n_rings, n_pts, 2 or 3)`` array or a single flattened 3D ring.
    """
    g = sample.g if isinstance(sample, ShapeSample) else np.asarray(sample, dtype=float)
    if not np.all(np.isfinite(g)):
        return False
    if cfg is not None:
        if isinstance(sample, ShapeSample) and np.any(_physical(sample.u, cfg)[:, 3] <= 0):
            return False
        rings = g.reshape(cfg.n_span, cfg.pts_per_section, 3)
    else:
        rings = g if g.ndim == 3 else g.reshape(1, -1, 3)
    if rings.shape[-1] == 3:
        rings = _rings_in_plane(rings)
    return not bool(np.any(_crossings(rings)))


def sample_design(cfg, count, skip=1):
    """Sobol points over the normalized design box, shape (count, M)."""
    return sobol_points(cfg.M, count, skip)
